use super::{format_bounds, AnalysisObserver, AnalysisOutcome, AnalysisResult, ConflictingSet, ReasonRef};
use crate::assignment::Trail;
use crate::model::{cut, Bound, BoundKind, Constraint, VarId};
use crate::propagation::{is_conflict, propagations, Conflict, ConstraintStore};

/// True when `cc` and `rc` share no variable besides `x`. A cut of two such
/// constraints propagates nothing the premises did not, so the early
/// backjump scan can be skipped for it.
pub fn cut_skip_check(cc: &Constraint, rc: &Constraint, x: VarId) -> bool {
    let (a, b) = (cc.monomials(), rc.monomials());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].var.cmp(&b[j].var) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if a[i].var != x {
                    return false;
                }
                i += 1;
                j += 1;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScanResult {
    /// `cc` propagates nothing fresh below the current level.
    None,
    /// `cc` is false at level 0.
    Infeasible,
    /// `cc` propagates `bound` once the trail is cut back to level `level`.
    Found { level: usize, bound: Bound, reason_set: Vec<usize> },
}

/// Finds the lowest decision level below the current one at which `cc`
/// propagates a fresh bound. Only levels where a variable of `cc` changed
/// can make a difference, so those (and level 0) are the only candidates.
/// When several bounds are propagated, the one on the lowest variable wins.
pub fn early_backjump_scan(cc: &Constraint, trail: &Trail) -> ScanResult {
    let current = trail.current_level();
    if current == 0 {
        return ScanResult::None;
    }
    let mut levels: Vec<usize> = vec![0];
    for v in cc.vars() {
        for kind in [BoundKind::Lower, BoundKind::Upper] {
            levels.extend(trail.history(v, kind).map(|h| trail.level_of(h)).filter(|&l| l < current));
        }
    }
    levels.sort_unstable();
    levels.dedup();
    for level in levels {
        let view = trail.prefix(trail.level_start(level + 1).expect("level below current"));
        if is_conflict(cc, &view).is_some() {
            return if level == 0 { ScanResult::Infeasible } else { ScanResult::None };
        }
        if let Some((bound, reason_set)) = propagations(cc, &view).into_iter().next() {
            return ScanResult::Found { level, bound, reason_set };
        }
    }
    ScanResult::None
}

/// Hybrid analysis: the conflicting set is rewritten as in resolution mode
/// while a conflicting constraint `CC`, initially the false constraint, is
/// cut with the reason constraint of every rewritten bound that eliminates
/// its variable. After each change of `CC` the trail is scanned for an early
/// backjump. On the normal exit `not B_top` is pushed with `CC` as reason
/// constraint, and `CC` is learned.
pub fn analyze_hybrid(
    conflict: &Conflict,
    trail: &Trail,
    store: &ConstraintStore,
    obs: &mut dyn AnalysisObserver,
) -> AnalysisOutcome {
    debug_assert!(trail.current_level() > 0);
    let mut cs = ConflictingSet::new(trail, &conflict.cs);
    let mut used = vec![conflict.constraint];
    let mut cc = store.constraint(conflict.constraint).clone();
    let mut changed = false;
    obs.rewrite(trail, &cs.to_vec(), Some(&cc));

    while !cs.single_top(trail) {
        let top = cs.rewrite_top(trail);
        let entry = trail.entry(top);
        if obs.tracing() {
            obs.trace(format!(
                "analyze step: drop {} add {}",
                entry.bound,
                format_bounds(trail, &entry.info.reason_set)
            ));
        }
        let mut scan = false;
        if let Some(rc_id) = entry.info.reason_constraint {
            used.push(rc_id);
            let rc = store.constraint(rc_id);
            let x = entry.bound.var;
            if let Some(next) = cut(&cc, rc, x) {
                if obs.tracing() {
                    obs.trace(format!("cut {cc} * {rc} on {x} -> {next}"));
                }
                scan = !cut_skip_check(&cc, rc, x);
                cc = next;
                changed = true;
                if cc.is_contradiction() {
                    return AnalysisOutcome::Infeasible;
                }
            }
        }
        obs.rewrite(trail, &cs.to_vec(), Some(&cc));
        if scan && !cc.is_tautology() {
            match early_backjump_scan(&cc, trail) {
                ScanResult::None => {}
                ScanResult::Infeasible => return AnalysisOutcome::Infeasible,
                ScanResult::Found { level, bound, reason_set } => {
                    if obs.tracing() {
                        let pops = trail.len() - trail.level_start(level + 1).unwrap();
                        obs.trace(format!("early-backjump k={pops} push {bound}"));
                    }
                    return AnalysisOutcome::Backjump(AnalysisResult {
                        backjump_level: level,
                        bound,
                        reason_set,
                        reason: Some(ReasonRef::Learned(0)),
                        learned: vec![cc],
                        early: true,
                        vars_seen: cs.seen(),
                        constraints_used: used,
                    });
                }
            }
        }
    }

    let top = cs.top();
    let (level, rest) = cs.rest(trail);
    let (reason, learned) = if !changed {
        (Some(ReasonRef::Existing(conflict.constraint)), Vec::new())
    } else if cc.is_tautology() {
        (None, Vec::new())
    } else {
        (Some(ReasonRef::Learned(0)), vec![cc])
    };
    AnalysisOutcome::Backjump(AnalysisResult {
        backjump_level: level,
        bound: trail.bound_at(top).negate(),
        reason_set: rest,
        reason,
        learned,
        early: false,
        vars_seen: cs.seen(),
        constraints_used: used,
    })
}
