use super::{format_bounds, AnalysisObserver, AnalysisOutcome, AnalysisResult, ConflictingSet};
use crate::analysis::clause_to_constraint;
use crate::assignment::Trail;
use crate::model::{Bound, Problem};
use crate::propagation::Conflict;

/// Resolution-style analysis.
///
/// The topmost bound of the conflicting set is replaced by its reason set
/// until exactly one bound `B_top` remains at or above the last decision.
/// The solver then jumps back below the decision following the deepest
/// level among the other bounds and pushes `not B_top` with those bounds as
/// reason set. The negated conflicting set is learned when it converts to
/// a single constraint.
///
/// The conflict must involve the current decision level, which must be at
/// least 1.
pub fn analyze_resolution(
    conflict: &Conflict,
    trail: &Trail,
    problem: &Problem,
    obs: &mut dyn AnalysisObserver,
) -> AnalysisOutcome {
    debug_assert!(trail.current_level() > 0);
    let mut cs = ConflictingSet::new(trail, &conflict.cs);
    let mut used = vec![conflict.constraint];
    obs.rewrite(trail, &cs.to_vec(), None);
    while !cs.single_top(trail) {
        let top = cs.rewrite_top(trail);
        let info = &trail.entry(top).info;
        if let Some(rc) = info.reason_constraint {
            used.push(rc);
        }
        if obs.tracing() {
            obs.trace(format!(
                "analyze step: drop {} add {}",
                trail.bound_at(top),
                format_bounds(trail, &info.reason_set)
            ));
        }
        obs.rewrite(trail, &cs.to_vec(), None);
    }
    let top = cs.top();
    let (level, rest) = cs.rest(trail);
    let b_top = trail.bound_at(top);

    // Level-0 bounds are consequences of the constraints: their negations
    // can be left out of the learned clause.
    let lits: Vec<Bound> = cs
        .to_vec()
        .into_iter()
        .filter(|&h| trail.level_of(h) > 0)
        .map(|h| trail.bound_at(h).negate())
        .collect();
    let learned: Vec<_> = clause_to_constraint(&lits, problem)
        .filter(|c| !c.is_tautology())
        .into_iter()
        .collect();
    if learned.iter().any(|c| c.is_contradiction()) {
        return AnalysisOutcome::Infeasible;
    }
    AnalysisOutcome::Backjump(AnalysisResult {
        backjump_level: level,
        bound: b_top.negate(),
        reason_set: rest,
        reason: None,
        learned,
        early: false,
        vars_seen: cs.seen(),
        constraints_used: used,
    })
}
