//! Propagation to fixpoint over three tiers of constraints.
//!
//! * Binary clauses live as edges of an implication graph keyed by the bound
//!   that falsifies a literal. Constraints that imply binary clauses over the
//!   root-level domains ("implicit binaries") are visited from the same tier.
//! * Longer clauses over binary variables use two watched literals.
//! * General constraints keep a filter value `F` that over-approximates the
//!   exact propagation indicator `F'` (see [`rules::filter_value`]). A push
//!   raises `F` by `|a (k - k')|` for every constraint where the bound moves
//!   the minimum of a monomial; a constraint is only visited once `F > 0`.
//!
//! Every tier has its own cursor into the trail; after each push the loop
//! restarts at the binary tier.

mod rules;
mod store;

use std::collections::VecDeque;

pub use rules::{
    filter_value, is_conflict, min_contribution, min_lhs, min_side_heights, propagations,
    would_propagate,
};
pub use store::{ConstraintStore, Origin, StoredConstraint, Tier};

use crate::assignment::{BoundsView, ReasonInfo, Trail, TrailEntry};
use crate::model::{Bound, BoundKind, Constraint, ConstraintId, Problem, VarId};

/// Added to a filter when a monomial's minimum goes from unbounded to bounded.
const LARGE: i128 = 1 << 90;
/// Filter value of a constraint whose history is unknown: always visited.
const SENTINEL: i128 = 1 << 100;

/// A constraint that is false under the trail, with the heights of the
/// bounds that make it false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub constraint: ConstraintId,
    pub cs: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PropagationStats {
    pub binary: u64,
    pub clause: u64,
    pub general: u64,
    pub implicit: u64,
    pub visits: u64,
}

#[derive(Debug, Clone, Copy)]
enum FilterUndo {
    Reset { len: usize, cid: ConstraintId, old: i128 },
    Created { len: usize, cid: ConstraintId },
}

impl FilterUndo {
    fn len(self) -> usize {
        match self {
            FilterUndo::Reset { len, .. } | FilterUndo::Created { len, .. } => len,
        }
    }
}

#[derive(Debug, Clone)]
struct WatchedClause {
    cid: ConstraintId,
    /// Literals as bounds; the first two are watched.
    lits: Vec<Bound>,
}

#[inline]
fn key(var: VarId, kind: BoundKind) -> usize {
    var.index() * 2 + (kind == BoundKind::Upper) as usize
}

/// The bound of a literal on a binary variable that a constraint
/// monomial asks for: `1 <= x` for a negative coefficient, `x <= 0` for a
/// positive one.
#[inline]
fn literal_of(var: VarId, coeff: i64) -> Bound {
    if coeff < 0 {
        Bound::lower(var, 1)
    } else {
        Bound::upper(var, 0)
    }
}

/// True iff `c` is a disjunction of literals over binary variables:
/// coefficients `+-1` and `rhs = #positive - 1`.
fn is_clause(c: &Constraint, problem: &Problem) -> bool {
    let positives = c.monomials().iter().filter(|m| m.coeff > 0).count() as i64;
    !c.is_empty()
        && c.monomials().iter().all(|m| m.coeff.abs() == 1 && problem.is_binary(m.var))
        && c.rhs() == positives - 1
}

pub struct Engine {
    trail: Trail,
    store: ConstraintStore,
    binary_var: Vec<bool>,

    pos_occ: Vec<Vec<(ConstraintId, i64)>>,
    neg_occ: Vec<Vec<(ConstraintId, i64)>>,
    filters: Vec<i128>,
    in_queue: Vec<bool>,
    queue: VecDeque<ConstraintId>,
    undo: Vec<FilterUndo>,

    edges: Vec<Vec<(Bound, ConstraintId)>>,
    clauses: Vec<WatchedClause>,
    watches: Vec<Vec<usize>>,
    implicit: Vec<Vec<ConstraintId>>,
    implicit_enabled: bool,

    binary_cursor: usize,
    clause_cursor: usize,

    pub stats: PropagationStats,
    trace: Option<Vec<String>>,
}

impl Engine {
    /// Builds the engine for `problem`: initial bounds go onto the trail at
    /// level 0 and input constraints are sorted into tiers.
    pub fn new(problem: &Problem, implicit_binaries: bool) -> Engine {
        let n = problem.num_vars();
        let mut e = Engine {
            trail: Trail::new(n),
            store: ConstraintStore::new(),
            binary_var: problem.vars().map(|v| problem.is_binary(v)).collect(),
            pos_occ: vec![Vec::new(); n],
            neg_occ: vec![Vec::new(); n],
            filters: Vec::new(),
            in_queue: Vec::new(),
            queue: VecDeque::new(),
            undo: Vec::new(),
            edges: vec![Vec::new(); 2 * n],
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            implicit: vec![Vec::new(); 2 * n],
            implicit_enabled: implicit_binaries,
            binary_cursor: 0,
            clause_cursor: 0,
            stats: PropagationStats::default(),
            trace: None,
        };
        for v in problem.vars() {
            if let Some(u) = problem.upper(v) {
                e.push(Bound::upper(v, u), ReasonInfo::initial());
            }
            if let Some(l) = problem.lower(v) {
                e.push(Bound::lower(v, l), ReasonInfo::initial());
            }
        }
        for c in problem.constraints() {
            if c.is_tautology() {
                continue;
            }
            let tier = if is_clause(c, problem) {
                match c.len() {
                    1 => Tier::General,
                    2 => Tier::Binary,
                    _ => Tier::Clause,
                }
            } else {
                Tier::General
            };
            e.insert(c.clone(), Origin::Initial, tier);
        }
        e
    }

    #[inline]
    pub fn trail(&self) -> &Trail {
        &self.trail
    }

    #[inline]
    pub fn store(&self) -> &ConstraintStore {
        &self.store
    }

    pub(crate) fn store_mut(&mut self) -> &mut ConstraintStore {
        &mut self.store
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Current filter value of a general constraint.
    pub fn filter(&self, id: ConstraintId) -> Option<i128> {
        match self.store.get(id) {
            Some(s) if s.tier == Tier::General => Some(self.filters[id.index()]),
            _ => None,
        }
    }

    /// Adds a constraint to the general tier. Tautologies are not stored.
    pub fn add_constraint(&mut self, c: Constraint, origin: Origin) -> Option<ConstraintId> {
        if c.is_tautology() {
            return None;
        }
        Some(self.insert(c, origin, Tier::General))
    }

    fn insert(&mut self, c: Constraint, origin: Origin, tier: Tier) -> ConstraintId {
        let id = self.store.insert(c, origin, tier);
        self.filters.push(0);
        self.in_queue.push(false);
        let c = self.store.constraint(id).clone();
        match tier {
            Tier::General => {
                self.attach_occurs(id, &c);
                let f = filter_value(&c, &self.trail).unwrap_or(SENTINEL);
                self.filters[id.index()] = f;
                if self.trail.current_level() > 0 {
                    self.undo.push(FilterUndo::Created { len: self.trail.len(), cid: id });
                }
                if f > 0 {
                    self.enqueue(id);
                }
            }
            Tier::Binary => {
                let m = c.monomials();
                let (a, b) = (literal_of(m[0].var, m[0].coeff), literal_of(m[1].var, m[1].coeff));
                debug_assert!(self.trail.current_level() == 0);
                self.edges[key(a.var, a.kind.opposite())].push((b, id));
                self.edges[key(b.var, b.kind.opposite())].push((a, id));
                // Catch literals already falsified at level 0.
                self.binary_cursor = 0;
            }
            Tier::Clause => {
                let lits: Vec<Bound> = c.monomials().iter().map(|m| literal_of(m.var, m.coeff)).collect();
                let idx = self.clauses.len();
                for l in &lits[..2] {
                    self.watches[key(l.var, l.kind.opposite())].push(idx);
                }
                self.clauses.push(WatchedClause { cid: id, lits });
                self.clause_cursor = 0;
            }
        }
        id
    }

    fn attach_occurs(&mut self, id: ConstraintId, c: &Constraint) {
        for m in c.monomials() {
            if m.coeff > 0 {
                self.pos_occ[m.var.index()].push((id, m.coeff));
            } else {
                self.neg_occ[m.var.index()].push((id, m.coeff));
            }
        }
    }

    fn enqueue(&mut self, id: ConstraintId) {
        if !self.in_queue[id.index()] {
            self.in_queue[id.index()] = true;
            self.queue.push_back(id);
        }
    }

    /// Recomputes, at level 0, which constraints imply binary clauses over
    /// the current domains: pairs of binary variables whose "bad" values
    /// together exceed the slack of the constraint.
    pub fn detect_implicit_binaries(&mut self) {
        for l in &mut self.implicit {
            l.clear();
        }
        if !self.implicit_enabled {
            return;
        }
        let ids: Vec<ConstraintId> = self
            .store
            .iter()
            .filter(|(_, s)| s.tier == Tier::General && s.origin == Origin::Initial)
            .map(|(id, _)| id)
            .collect();
        for id in ids {
            let c = self.store.constraint(id);
            let Some(min) = min_lhs(c, &self.trail) else { continue };
            let slack = c.rhs() as i128 - min;
            let unfixed_binary = |v: VarId| {
                self.binary_var[v.index()] && self.trail.lower(v) == Some(0) && self.trail.upper(v) == Some(1)
            };
            let mut weights: Vec<(VarId, i128, i64)> = c
                .monomials()
                .iter()
                .filter(|m| unfixed_binary(m.var))
                .map(|m| (m.var, (m.coeff as i128).abs(), m.coeff))
                .collect();
            if weights.len() < 2 {
                continue;
            }
            weights.sort_by(|a, b| b.1.cmp(&a.1));
            let (top, second) = (weights[0].1, weights[1].1);
            if top + second <= slack {
                continue;
            }
            let mut hits = Vec::new();
            for (i, &(var, w, coeff)) in weights.iter().enumerate() {
                let partner = if i == 0 { second } else { top };
                if w + partner > slack {
                    // the bad value raises the minimum: 1 for a > 0, 0 for a < 0
                    let k = if coeff > 0 { key(var, BoundKind::Lower) } else { key(var, BoundKind::Upper) };
                    hits.push(k);
                }
            }
            for k in hits {
                self.implicit[k].push(id);
            }
        }
    }

    /// Number of (literal, constraint) pairs in the implicit-binary index.
    pub fn implicit_binary_count(&self) -> usize {
        self.implicit.iter().map(Vec::len).sum()
    }

    /// Pushes a bound with the given reason and updates the filters.
    pub fn push(&mut self, bound: Bound, info: ReasonInfo) {
        let previous = self.trail.push(bound, info);
        let v = bound.var.index();
        match bound.kind {
            BoundKind::Lower => {
                for i in 0..self.pos_occ[v].len() {
                    let (id, a) = self.pos_occ[v][i];
                    let delta = previous.map_or(LARGE, |p| a as i128 * (bound.value - p) as i128);
                    self.raise(id, delta);
                }
            }
            BoundKind::Upper => {
                for i in 0..self.neg_occ[v].len() {
                    let (id, a) = self.neg_occ[v][i];
                    let delta = previous.map_or(LARGE, |p| -(a as i128) * (p - bound.value) as i128);
                    self.raise(id, delta);
                }
            }
        }
    }

    #[inline]
    fn raise(&mut self, id: ConstraintId, delta: i128) {
        let f = &mut self.filters[id.index()];
        *f = f.saturating_add(delta);
        if *f > 0 {
            self.enqueue(id);
        }
    }

    /// Pops the top of the trail, restoring every filter to its value just
    /// before the bound was pushed.
    pub fn pop(&mut self) -> TrailEntry {
        let len = self.trail.len();
        while let Some(&u) = self.undo.last() {
            if u.len() < len {
                break;
            }
            self.undo.pop();
            match u {
                FilterUndo::Reset { cid, old, .. } => self.filters[cid.index()] = old,
                FilterUndo::Created { cid, .. } => {
                    if self.store.get(cid).is_some() {
                        self.filters[cid.index()] = SENTINEL;
                        self.enqueue(cid);
                    }
                }
            }
        }
        let entry = self.trail.pop();
        let b = entry.bound;
        let previous = (entry.pos >= 0).then(|| self.trail.entry(entry.pos as usize).bound.value);
        let v = b.var.index();
        let occ = match b.kind {
            BoundKind::Lower => &self.pos_occ[v],
            BoundKind::Upper => &self.neg_occ[v],
        };
        for &(id, a) in occ {
            let delta = previous.map_or(LARGE, |p| (a as i128 * (b.value - p) as i128).abs());
            let f = &mut self.filters[id.index()];
            *f = f.saturating_sub(delta);
        }
        let len = self.trail.len();
        self.binary_cursor = self.binary_cursor.min(len);
        self.clause_cursor = self.clause_cursor.min(len);
        if self.trail.current_level() == 0 {
            self.undo.clear();
        }
        entry
    }

    /// Pops until the trail has `height` entries.
    pub fn backjump_to(&mut self, height: usize) {
        while self.trail.len() > height {
            self.pop();
        }
    }

    fn reset_filter(&mut self, id: ConstraintId) {
        let c = self.store.constraint(id);
        let fresh = filter_value(c, &self.trail).unwrap_or(0);
        let old = self.filters[id.index()];
        if old != fresh {
            if self.trail.current_level() > 0 {
                self.undo.push(FilterUndo::Reset { len: self.trail.len(), cid: id, old });
            }
            self.filters[id.index()] = fresh;
        }
    }

    fn trace_push(&mut self, b: Bound, id: ConstraintId, set: &[usize]) {
        if let Some(t) = self.trace.as_mut() {
            let set: Vec<String> = set.iter().map(usize::to_string).collect();
            t.push(format!("propagate {} reason={} set={{{}}}", b, id.0, set.join(",")));
        }
    }

    /// Visits a general constraint: detects a conflict or pushes every fresh
    /// bound it propagates, then resets its filter to the exact value.
    fn visit(&mut self, id: ConstraintId) -> Result<usize, Conflict> {
        self.stats.visits += 1;
        let c = self.store.constraint(id);
        if let Some(cs) = is_conflict(c, &self.trail) {
            return Err(Conflict { constraint: id, cs });
        }
        let props = propagations(c, &self.trail);
        let n = props.len();
        for (b, set) in props {
            self.trace_push(b, id, &set);
            self.push(b, ReasonInfo::propagated(set, id));
        }
        self.reset_filter(id);
        Ok(n)
    }

    /// Current truth value of a literal: `Some(true)` if entailed by the
    /// current bounds, `Some(false)` if contradicted.
    fn lit_value(&self, l: Bound) -> Option<bool> {
        let (lb, ub) = self.trail.current_bounds(l.var);
        match l.kind {
            BoundKind::Lower if lb.is_some_and(|x| x >= l.value) => Some(true),
            BoundKind::Lower if ub.is_some_and(|x| x < l.value) => Some(false),
            BoundKind::Upper if ub.is_some_and(|x| x <= l.value) => Some(true),
            BoundKind::Upper if lb.is_some_and(|x| x > l.value) => Some(false),
            _ => None,
        }
    }

    /// Pushes `lit` because every other literal of clause `id` is false,
    /// or reports the clause as conflicting when `lit` is false too.
    fn assert_literal(&mut self, lit: Bound, id: ConstraintId) -> Result<bool, Conflict> {
        let c = self.store.constraint(id);
        match self.lit_value(lit) {
            Some(true) => Ok(false),
            Some(false) => {
                let cs = min_side_heights(c, &self.trail).expect("binary variables are bounded");
                Err(Conflict { constraint: id, cs })
            }
            None => {
                let set: Vec<usize> = c
                    .monomials()
                    .iter()
                    .filter(|m| m.var != lit.var)
                    .map(|m| self.trail.min_side_entry(m.var, m.coeff).expect("bounded").1)
                    .collect();
                self.trace_push(lit, id, &set);
                self.push(lit, ReasonInfo::propagated(set, id));
                Ok(true)
            }
        }
    }

    fn process_binary(&mut self, h: usize) -> Result<(), Conflict> {
        let b = self.trail.bound_at(h);
        if !self.binary_var[b.var.index()] {
            return Ok(());
        }
        // the literal this bound would falsify
        let falsified = match b.kind {
            BoundKind::Upper => Bound::lower(b.var, 1),
            BoundKind::Lower => Bound::upper(b.var, 0),
        };
        // initial bounds of binary variables falsify nothing
        if !b.contradicts(falsified) {
            return Ok(());
        }
        let k = key(b.var, b.kind);
        for i in 0..self.edges[k].len() {
            let (lit, id) = self.edges[k][i];
            if self.assert_literal(lit, id)? {
                self.stats.binary += 1;
            }
        }
        if self.implicit_enabled {
            // constraints in which this value raises the minimum
            for i in 0..self.implicit[k].len() {
                let id = self.implicit[k][i];
                if self.store.get(id).is_some() {
                    let n = self.visit(id)?;
                    self.stats.implicit += n as u64;
                }
            }
        }
        Ok(())
    }

    fn process_clauses(&mut self, h: usize) -> Result<(), Conflict> {
        let b = self.trail.bound_at(h);
        if !self.binary_var[b.var.index()] {
            return Ok(());
        }
        let falsified = match b.kind {
            BoundKind::Upper => Bound::lower(b.var, 1),
            BoundKind::Lower => Bound::upper(b.var, 0),
        };
        if !b.contradicts(falsified) {
            return Ok(());
        }
        let k = key(b.var, b.kind);
        let list = std::mem::take(&mut self.watches[k]);
        let mut keep = Vec::with_capacity(list.len());
        let mut result = Ok(());
        let mut it = list.into_iter();
        for ci in it.by_ref() {
            let cl = &mut self.clauses[ci];
            if self.store.get(cl.cid).is_none() {
                continue;
            }
            if cl.lits[0] == falsified {
                cl.lits.swap(0, 1);
            }
            debug_assert_eq!(cl.lits[1], falsified);
            let first = cl.lits[0];
            if self.lit_value(first) == Some(true) {
                keep.push(ci);
                continue;
            }
            let lits = &self.clauses[ci].lits;
            let replacement = (2..lits.len()).find(|&j| self.lit_value(lits[j]) != Some(false));
            if let Some(j) = replacement {
                let cl = &mut self.clauses[ci];
                cl.lits.swap(1, j);
                let w = cl.lits[1];
                self.watches[key(w.var, w.kind.opposite())].push(ci);
                continue;
            }
            keep.push(ci);
            let id = self.clauses[ci].cid;
            match self.assert_literal(first, id) {
                Ok(pushed) => self.stats.clause += pushed as u64,
                Err(c) => {
                    result = Err(c);
                    break;
                }
            }
        }
        keep.extend(it);
        let slot = &mut self.watches[k];
        keep.append(slot);
        *slot = keep;
        result
    }

    /// Propagates to fixpoint. On conflict the bounds pushed so far stay on
    /// the trail.
    pub fn propagate(&mut self) -> Option<Conflict> {
        loop {
            let len = self.trail.len();
            if self.binary_cursor < len {
                let h = self.binary_cursor;
                self.binary_cursor += 1;
                if let Err(c) = self.process_binary(h) {
                    return Some(c);
                }
                continue;
            }
            if self.clause_cursor < len {
                let h = self.clause_cursor;
                self.clause_cursor += 1;
                if let Err(c) = self.process_clauses(h) {
                    return Some(c);
                }
                continue;
            }
            let Some(id) = self.queue.pop_front() else { return None };
            self.in_queue[id.index()] = false;
            if self.store.get(id).is_none() {
                continue;
            }
            match self.visit(id) {
                Ok(n) => self.stats.general += n as u64,
                Err(c) => return Some(c),
            }
        }
    }

    /// Removes constraints selected by `remove` and rebuilds the general-tier
    /// indices. Only allowed at decision level 0.
    pub(crate) fn remove_constraints(&mut self, mut remove: impl FnMut(&StoredConstraint) -> bool) -> usize {
        assert_eq!(self.trail.current_level(), 0, "constraints are only removed at level 0");
        let ids: Vec<ConstraintId> = self
            .store
            .iter()
            .filter(|(_, s)| s.tier == Tier::General && remove(s))
            .map(|(id, _)| id)
            .collect();
        for &id in &ids {
            self.store.remove(id);
        }
        if !ids.is_empty() {
            for l in self.pos_occ.iter_mut().chain(self.neg_occ.iter_mut()) {
                l.retain(|(id, _)| self.store.get(*id).is_some());
            }
            for l in &mut self.implicit {
                l.retain(|id| self.store.get(*id).is_some());
            }
        }
        ids.len()
    }

    /// Checks the filter invariant `F >= F'` for every general constraint
    /// whose variables are all bounded. Returns the first violation.
    pub fn check_filters(&self) -> Result<(), ConstraintId> {
        for (id, s) in self.store.iter() {
            if s.tier != Tier::General {
                continue;
            }
            if let Some(exact) = filter_value(&s.constraint, &self.trail) {
                if self.filters[id.index()] < exact {
                    return Err(id);
                }
            }
        }
        Ok(())
    }
}
