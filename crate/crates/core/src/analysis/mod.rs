//! Conflict analysis, backjump and learning.
//!
//! Both procedures read the trail and constraint store and return what the
//! search loop must do: the level to jump back to, the bound to push there
//! and the constraints to learn. They never mutate solver state.

mod clause;
mod cut;
mod resolution;

use std::collections::BTreeSet;

pub use clause::clause_to_constraint;
pub use cut::{analyze_hybrid, cut_skip_check, early_backjump_scan, ScanResult};
pub use resolution::analyze_resolution;

use crate::assignment::Trail;
use crate::model::{Bound, Constraint, ConstraintId, VarId};

/// Reason constraint of the bound pushed after a backjump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReasonRef {
    Existing(ConstraintId),
    /// Index into [`AnalysisResult::learned`].
    Learned(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisResult {
    /// Keep decision levels `0..=backjump_level`, i.e. pop down to the start
    /// of level `backjump_level + 1`.
    pub backjump_level: usize,
    pub bound: Bound,
    pub reason_set: Vec<usize>,
    pub reason: Option<ReasonRef>,
    pub learned: Vec<Constraint>,
    pub early: bool,
    /// Distinct variables whose bounds entered the conflicting set.
    pub vars_seen: Vec<VarId>,
    /// Conflict and reason constraints used.
    pub constraints_used: Vec<ConstraintId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalysisOutcome {
    Backjump(AnalysisResult),
    /// A consequence of the constraints is false at level 0.
    Infeasible,
}

/// Hooks into the analysis, used for tracing and instrumented tests.
pub trait AnalysisObserver {
    /// Called with the initial conflicting set and after every rewrite.
    /// `cc` is the conflicting constraint in hybrid mode.
    fn rewrite(&mut self, _trail: &Trail, _cs: &[usize], _cc: Option<&Constraint>) {}

    fn tracing(&self) -> bool {
        false
    }

    fn trace(&mut self, _line: String) {}
}

impl AnalysisObserver for () {}

/// The conflicting set with the bookkeeping shared by both modes.
pub(crate) struct ConflictingSet {
    heights: BTreeSet<usize>,
    seen: Vec<VarId>,
    seen_mark: BTreeSet<VarId>,
}

impl ConflictingSet {
    pub(crate) fn new(trail: &Trail, initial: &[usize]) -> Self {
        let mut s = ConflictingSet { heights: BTreeSet::new(), seen: Vec::new(), seen_mark: BTreeSet::new() };
        s.extend(trail, initial);
        s
    }

    fn extend(&mut self, trail: &Trail, hs: &[usize]) {
        for &h in hs {
            self.heights.insert(h);
            let v = trail.bound_at(h).var;
            if self.seen_mark.insert(v) {
                self.seen.push(v);
            }
        }
    }

    pub(crate) fn to_vec(&self) -> Vec<usize> {
        self.heights.iter().copied().collect()
    }

    /// Stop condition: exactly one bound at or above the topmost decision.
    pub(crate) fn single_top(&self, trail: &Trail) -> bool {
        let d = *trail.decision_heights().last().expect("analysis needs a decision");
        self.heights.range(d..).count() == 1
    }

    /// Replaces the topmost bound by its reason set; returns its height.
    pub(crate) fn rewrite_top(&mut self, trail: &Trail) -> usize {
        let top = self.heights.pop_last().expect("non-empty conflicting set");
        let info = &trail.entry(top).info;
        debug_assert!(!info.is_decision, "rewriting a decision");
        let rs = info.reason_set.clone();
        self.extend(trail, &rs);
        top
    }

    pub(crate) fn top(&self) -> usize {
        *self.heights.last().expect("non-empty conflicting set")
    }

    /// Level of the deepest bound other than the top one (0 if none) and
    /// the heights of those bounds.
    pub(crate) fn rest(&self, trail: &Trail) -> (usize, Vec<usize>) {
        let top = self.top();
        let rest: Vec<usize> = self.heights.iter().copied().filter(|&h| h != top).collect();
        let level = rest.iter().map(|&h| trail.level_of(h)).max().unwrap_or(0);
        (level, rest)
    }

    pub(crate) fn seen(&self) -> Vec<VarId> {
        self.seen.clone()
    }
}

pub(crate) fn format_bounds(trail: &Trail, hs: &[usize]) -> String {
    let v: Vec<String> = hs.iter().map(|&h| trail.bound_at(h).to_string()).collect();
    format!("{{{}}}", v.join(", "))
}
