//! The assignment stack ("trail") and the per-variable bounds vector.
//!
//! Each trail entry stores a bound, the height of the previous bound of the
//! same kind on the same variable (`pos`, `-1` for the first one) and its
//! reason information. The bounds vector keeps, for every variable, the
//! heights of the current strongest lower and upper bound, so current bounds
//! are available in constant time and every push or pop is O(1).

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Bound, BoundKind, ConstraintId, Problem, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrailError {
    #[error("height {0} is beyond the trail")]
    HeightOutOfRange(usize),
    #[error("decision level {0} does not exist")]
    LevelOutOfRange(usize),
}

/// Why a bound is on the trail.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReasonInfo {
    /// Trail heights of the bounds in the reason set.
    pub reason_set: Vec<usize>,
    pub reason_constraint: Option<ConstraintId>,
    pub is_decision: bool,
}

impl ReasonInfo {
    pub fn decision() -> Self {
        ReasonInfo { reason_set: Vec::new(), reason_constraint: None, is_decision: true }
    }

    /// Initial bound of the input: no reason set, no reason constraint.
    pub fn initial() -> Self {
        ReasonInfo::default()
    }

    pub fn propagated(reason_set: Vec<usize>, constraint: ConstraintId) -> Self {
        ReasonInfo { reason_set, reason_constraint: Some(constraint), is_decision: false }
    }

    pub fn derived(reason_set: Vec<usize>, constraint: Option<ConstraintId>) -> Self {
        ReasonInfo { reason_set, reason_constraint: constraint, is_decision: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrailEntry {
    pub bound: Bound,
    /// Height of the previous bound of the same kind on the same variable, or -1.
    pub pos: isize,
    pub info: ReasonInfo,
}

/// Read access to a set of current bounds together with the trail heights
/// of the bounds that realise them.
pub trait BoundsView {
    fn lower_entry(&self, var: VarId) -> Option<(i64, usize)>;
    fn upper_entry(&self, var: VarId) -> Option<(i64, usize)>;

    #[inline]
    fn lower(&self, var: VarId) -> Option<i64> {
        self.lower_entry(var).map(|e| e.0)
    }

    #[inline]
    fn upper(&self, var: VarId) -> Option<i64> {
        self.upper_entry(var).map(|e| e.0)
    }

    /// The bound on the side that minimises `coeff * var`.
    #[inline]
    fn min_side_entry(&self, var: VarId, coeff: i64) -> Option<(i64, usize)> {
        if coeff > 0 {
            self.lower_entry(var)
        } else {
            self.upper_entry(var)
        }
    }

    fn is_fresh(&self, b: Bound) -> bool {
        let (lb, ub) = (self.lower(b.var), self.upper(b.var));
        match b.kind {
            BoundKind::Lower => lb.is_none_or(|l| l < b.value) && ub.is_none_or(|u| b.value <= u),
            BoundKind::Upper => ub.is_none_or(|u| b.value < u) && lb.is_none_or(|l| l <= b.value),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trail {
    entries: Vec<TrailEntry>,
    /// Per variable: height of the current lower bound, -1 if none.
    pl: Vec<isize>,
    /// Per variable: height of the current upper bound, -1 if none.
    pu: Vec<isize>,
    decisions: Vec<usize>,
}

impl Trail {
    pub fn new(num_vars: usize) -> Self {
        Trail { entries: Vec::new(), pl: vec![-1; num_vars], pu: vec![-1; num_vars], decisions: Vec::new() }
    }

    /// A trail holding the problem's initial bounds as level-0 entries.
    pub fn with_initial_bounds(problem: &Problem) -> Self {
        let mut t = Trail::new(problem.num_vars());
        for v in problem.vars() {
            if let Some(u) = problem.upper(v) {
                t.push(Bound::upper(v, u), ReasonInfo::initial());
            }
            if let Some(l) = problem.lower(v) {
                t.push(Bound::lower(v, l), ReasonInfo::initial());
            }
        }
        t
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.pl.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn entries(&self) -> &[TrailEntry] {
        &self.entries
    }

    #[inline]
    pub fn entry(&self, height: usize) -> &TrailEntry {
        &self.entries[height]
    }

    #[inline]
    pub fn bound_at(&self, height: usize) -> Bound {
        self.entries[height].bound
    }

    /// Pushes a fresh bound and returns the value of the bound of the same
    /// kind it supersedes, if any.
    pub fn push(&mut self, bound: Bound, info: ReasonInfo) -> Option<i64> {
        assert!(self.is_fresh(bound), "pushing non-fresh bound {bound}");
        let height = self.entries.len();
        debug_assert!(info.reason_set.iter().all(|&h| h < height));
        debug_assert!(!info.is_decision || (info.reason_set.is_empty() && info.reason_constraint.is_none()));
        let slot = match bound.kind {
            BoundKind::Lower => &mut self.pl[bound.var.index()],
            BoundKind::Upper => &mut self.pu[bound.var.index()],
        };
        let pos = *slot;
        *slot = height as isize;
        if info.is_decision {
            self.decisions.push(height);
        }
        self.entries.push(TrailEntry { bound, pos, info });
        (pos >= 0).then(|| self.entries[pos as usize].bound.value)
    }

    pub fn pop(&mut self) -> TrailEntry {
        let e = self.entries.pop().expect("pop on empty trail");
        let slot = match e.bound.kind {
            BoundKind::Lower => &mut self.pl[e.bound.var.index()],
            BoundKind::Upper => &mut self.pu[e.bound.var.index()],
        };
        *slot = e.pos;
        if e.info.is_decision {
            self.decisions.pop();
        }
        e
    }

    pub fn current_bounds(&self, var: VarId) -> (Option<i64>, Option<i64>) {
        (self.lower(var), self.upper(var))
    }

    #[inline]
    pub fn is_defined(&self, var: VarId) -> bool {
        matches!((self.lower(var), self.upper(var)), (Some(l), Some(u)) if l == u)
    }

    pub fn all_defined(&self) -> bool {
        (0..self.num_vars()).all(|i| self.is_defined(VarId::new(i)))
    }

    /// Values of a fully defined trail.
    pub fn values(&self) -> Option<Vec<i64>> {
        (0..self.num_vars())
            .map(|i| {
                let v = VarId::new(i);
                self.is_defined(v).then(|| self.lower(v).unwrap())
            })
            .collect()
    }

    #[inline]
    pub fn decision_heights(&self) -> &[usize] {
        &self.decisions
    }

    /// Number of decisions on the trail, i.e. the current decision level.
    #[inline]
    pub fn current_level(&self) -> usize {
        self.decisions.len()
    }

    pub fn decision_level_of(&self, height: usize) -> Result<usize, TrailError> {
        if height >= self.entries.len() {
            return Err(TrailError::HeightOutOfRange(height));
        }
        Ok(self.level_of(height))
    }

    #[inline]
    pub(crate) fn level_of(&self, height: usize) -> usize {
        self.decisions.partition_point(|&d| d <= height)
    }

    /// Height at which decision level `level` starts (0 for level 0).
    pub fn level_start(&self, level: usize) -> Result<usize, TrailError> {
        match level {
            0 => Ok(0),
            l if l <= self.decisions.len() => Ok(self.decisions[l - 1]),
            l => Err(TrailError::LevelOutOfRange(l)),
        }
    }

    /// Chain of heights of the bounds of (`var`, `kind`), topmost first.
    pub fn history(&self, var: VarId, kind: BoundKind) -> impl Iterator<Item = usize> + '_ {
        let start = match kind {
            BoundKind::Lower => self.pl[var.index()],
            BoundKind::Upper => self.pu[var.index()],
        };
        std::iter::successors((start >= 0).then_some(start as usize), move |&h| {
            let p = self.entries[h].pos;
            (p >= 0).then_some(p as usize)
        })
    }

    /// View of the bounds in the first `height` entries of the trail.
    pub fn prefix(&self, height: usize) -> TrailPrefix<'_> {
        TrailPrefix { trail: self, height: height.min(self.entries.len()) }
    }

    /// Lexicographic progress measure: entry `i` is the aggregated domain
    /// size of the part of the trail below the `(i+1)`-th decision. The
    /// tuple has `m + 1` entries where `m` is the sum of the initial domain
    /// widths. `None` if some variable is unbounded.
    pub fn termination_measure(&self, problem: &Problem) -> Option<Vec<u64>> {
        let m: u64 = problem
            .vars()
            .map(|v| Some((problem.upper(v)? - problem.lower(v)?) as u64))
            .sum::<Option<u64>>()?;
        let size = |view: &dyn Fn(VarId) -> (Option<i64>, Option<i64>)| -> Option<u64> {
            problem
                .vars()
                .map(|v| {
                    let (l, u) = view(v);
                    let l = l.or(problem.lower(v))?;
                    let u = u.or(problem.upper(v))?;
                    Some((u - l + 1).max(0) as u64)
                })
                .sum()
        };
        let full = size(&|v| self.current_bounds(v))?;
        let mut out = Vec::with_capacity(m as usize + 1);
        for i in 0..=m as usize {
            if i < self.decisions.len() {
                let p = self.prefix(self.decisions[i]);
                out.push(size(&|v| (p.lower(v), p.upper(v)))?);
            } else {
                out.push(full);
            }
        }
        Some(out)
    }

    /// One line per entry:
    /// `height kind var value level reason={heights}|decision constraint=<id|none>`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (h, e) in self.entries.iter().enumerate() {
            let kind = match e.bound.kind {
                BoundKind::Lower => "lower",
                BoundKind::Upper => "upper",
            };
            let _ = write!(s, "{} {} {} {} {} ", h, kind, e.bound.var.index(), e.bound.value, self.level_of(h));
            if e.info.is_decision {
                s.push_str("decision");
            } else {
                let set: Vec<String> = e.info.reason_set.iter().map(|h| h.to_string()).collect();
                let _ = write!(s, "reason={{{}}}", set.join(","));
            }
            match e.info.reason_constraint {
                Some(c) => {
                    let _ = writeln!(s, " constraint={}", c.0);
                }
                None => s.push_str(" constraint=none\n"),
            }
        }
        s
    }
}

impl BoundsView for Trail {
    #[inline]
    fn lower_entry(&self, var: VarId) -> Option<(i64, usize)> {
        let h = self.pl[var.index()];
        (h >= 0).then(|| (self.entries[h as usize].bound.value, h as usize))
    }

    #[inline]
    fn upper_entry(&self, var: VarId) -> Option<(i64, usize)> {
        let h = self.pu[var.index()];
        (h >= 0).then(|| (self.entries[h as usize].bound.value, h as usize))
    }
}

/// The bounds of a trail restricted to its first `height` entries, found by
/// walking the `pos` history chains.
#[derive(Clone, Copy)]
pub struct TrailPrefix<'a> {
    trail: &'a Trail,
    height: usize,
}

impl TrailPrefix<'_> {
    pub fn height(&self) -> usize {
        self.height
    }

    fn find(&self, var: VarId, kind: BoundKind) -> Option<(i64, usize)> {
        self.trail
            .history(var, kind)
            .find(|&h| h < self.height)
            .map(|h| (self.trail.entries[h].bound.value, h))
    }
}

impl BoundsView for TrailPrefix<'_> {
    fn lower_entry(&self, var: VarId) -> Option<(i64, usize)> {
        self.find(var, BoundKind::Lower)
    }

    fn upper_entry(&self, var: VarId) -> Option<(i64, usize)> {
        self.find(var, BoundKind::Upper)
    }
}
