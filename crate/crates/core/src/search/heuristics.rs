//! Variable activity, value strategies and restart schedules.

use std::fmt;

use crate::model::{Bound, Objective, VarId};

/// Indexed max-heap of variables ordered by activity (ties: lower index).
#[derive(Debug, Clone)]
pub struct ActivityQueue {
    scores: Vec<f64>,
    heap: Vec<VarId>,
    pos: Vec<Option<usize>>,
    inc: f64,
    factor: f64,
    cap: f64,
}

impl ActivityQueue {
    pub fn new(num_vars: usize, factor: f64, cap: f64) -> Self {
        let mut q = ActivityQueue {
            scores: vec![0.0; num_vars],
            heap: Vec::with_capacity(num_vars),
            pos: vec![None; num_vars],
            inc: 1.0,
            factor,
            cap,
        };
        for i in 0..num_vars {
            q.insert(VarId::new(i));
        }
        q
    }

    /// Seeds the scores with small values, keeping them far below one bump.
    pub fn perturb(&mut self, noise: impl IntoIterator<Item = f64>) {
        for (s, n) in self.scores.iter_mut().zip(noise) {
            *s += n * 1e-3;
        }
        self.heap.clear();
        self.pos.iter_mut().for_each(|p| *p = None);
        for i in 0..self.scores.len() {
            self.insert(VarId::new(i));
        }
    }

    #[inline]
    pub fn score(&self, v: VarId) -> f64 {
        self.scores[v.index()]
    }

    pub fn increment(&self) -> f64 {
        self.inc
    }

    #[inline]
    fn above(&self, a: VarId, b: VarId) -> bool {
        let (sa, sb) = (self.scores[a.index()], self.scores[b.index()]);
        sa > sb || (sa == sb && a < b)
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.pos[v.index()].is_some()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn insert(&mut self, v: VarId) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        self.pos[v.index()] = Some(self.heap.len() - 1);
        self.sift_up(self.heap.len() - 1);
    }

    pub fn peek(&self) -> Option<VarId> {
        self.heap.first().copied()
    }

    pub fn pop(&mut self) -> Option<VarId> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top.index()] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last.index()] = Some(0);
            self.sift_down(0);
        }
        Some(top)
    }

    /// Adds the current increment to `v`'s score.
    pub fn bump(&mut self, v: VarId) {
        self.scores[v.index()] += self.inc;
        if self.scores[v.index()] > self.cap {
            self.rescale();
        }
        if let Some(i) = self.pos[v.index()] {
            self.sift_up(i);
        }
    }

    /// Grows the increment geometrically; called once per conflict.
    pub fn decay(&mut self) {
        self.inc *= self.factor;
        if self.inc > self.cap {
            self.rescale();
        }
    }

    fn rescale(&mut self) {
        let k = 1.0 / self.cap;
        self.scores.iter_mut().for_each(|s| *s *= k);
        self.inc *= k;
    }

    fn sift_up(&mut self, mut i: usize) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if !self.above(v, p) {
                break;
            }
            self.heap[i] = p;
            self.pos[p.index()] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v.index()] = Some(i);
    }

    fn sift_down(&mut self, mut i: usize) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && self.above(self.heap[r], self.heap[l]) { r } else { l };
            if !self.above(self.heap[c], v) {
                break;
            }
            let cv = self.heap[c];
            self.heap[i] = cv;
            self.pos[cv.index()] = Some(i);
            i = c;
        }
        self.heap[i] = v;
        self.pos[v.index()] = Some(i);
    }
}

/// Value strategies for a decision on `x` with domain `[l, u]` and midpoint
/// `m = floor((l + u) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// (1) `[m+1, u]`
    UpperHalf,
    /// (2) `[u, u]`
    Max,
    /// (3) `[l, m]`
    LowerHalf,
    /// (4) `[l, l]`
    Min,
    /// (5) the half containing the end of the domain that minimises the objective term
    ObjectiveHalf,
    /// (6) that end itself
    ObjectiveBest,
    /// (7) the half containing the last value of `x`
    LastValueHalf,
    /// (8) the end of the domain on the side of the last value
    LastValueEnd,
    /// (9) split the domain at the last value
    LastValue,
    /// (10) split at the value in the last solution
    LastSolution,
    /// (11) split at a user-supplied value
    Hint,
}

impl Strategy {
    pub const ALL: [Strategy; 11] = [
        Strategy::UpperHalf,
        Strategy::Max,
        Strategy::LowerHalf,
        Strategy::Min,
        Strategy::ObjectiveHalf,
        Strategy::ObjectiveBest,
        Strategy::LastValueHalf,
        Strategy::LastValueEnd,
        Strategy::LastValue,
        Strategy::LastSolution,
        Strategy::Hint,
    ];

    pub fn from_number(n: u8) -> Option<Strategy> {
        Strategy::ALL.get((n as usize).checked_sub(1)?).copied()
    }

    pub fn number(self) -> u8 {
        Strategy::ALL.iter().position(|&s| s == self).unwrap() as u8 + 1
    }

    /// Applies to every variable with a non-singleton domain.
    pub fn is_total(self) -> bool {
        matches!(self, Strategy::UpperHalf | Strategy::Max | Strategy::LowerHalf | Strategy::Min)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// What a strategy may look at besides the domain.
pub struct DecisionContext<'a> {
    pub objective: Option<&'a Objective>,
    pub last_value: Option<i64>,
    pub last_solution: Option<i64>,
    pub hint: Option<i64>,
}

#[inline]
fn midpoint(l: i64, u: i64) -> i64 {
    ((l as i128 + u as i128).div_euclid(2)) as i64
}

/// Reduce to `[l, v]` or `[v, u]`, whichever is smaller (ties go up);
/// `v` on an end fixes the variable.
fn split_at(x: VarId, l: i64, u: i64, v: i64) -> Option<Bound> {
    if v < l || v > u {
        return None;
    }
    Some(if v == l {
        Bound::upper(x, l)
    } else if v == u {
        Bound::lower(x, u)
    } else if v - l < u - v {
        Bound::upper(x, v)
    } else {
        Bound::lower(x, v)
    })
}

/// The decision bound strategy `s` proposes for `x` in `[l, u]` (`l < u`),
/// or `None` when the strategy does not apply.
pub fn decide_with(s: Strategy, x: VarId, l: i64, u: i64, ctx: &DecisionContext<'_>) -> Option<Bound> {
    debug_assert!(l < u);
    let m = midpoint(l, u);
    let objective_coeff = || ctx.objective.map(|o| o.coeff_of(x)).filter(|&c| c != 0);
    match s {
        Strategy::UpperHalf => Some(Bound::lower(x, m + 1)),
        Strategy::Max => Some(Bound::lower(x, u)),
        Strategy::LowerHalf => Some(Bound::upper(x, m)),
        Strategy::Min => Some(Bound::upper(x, l)),
        Strategy::ObjectiveHalf => {
            let c = objective_coeff()?;
            Some(if c > 0 { Bound::upper(x, m) } else { Bound::lower(x, m + 1) })
        }
        Strategy::ObjectiveBest => {
            let c = objective_coeff()?;
            Some(if c > 0 { Bound::upper(x, l) } else { Bound::lower(x, u) })
        }
        Strategy::LastValueHalf => {
            let v = ctx.last_value?;
            Some(if v <= m { Bound::upper(x, m) } else { Bound::lower(x, m + 1) })
        }
        Strategy::LastValueEnd => {
            let v = ctx.last_value?;
            Some(if v <= m { Bound::upper(x, l) } else { Bound::lower(x, u) })
        }
        Strategy::LastValue => split_at(x, l, u, ctx.last_value?),
        Strategy::LastSolution => split_at(x, l, u, ctx.last_solution?),
        Strategy::Hint => split_at(x, l, u, ctx.hint?),
    }
}

/// Restart schedule, in conflicts between restarts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RestartPolicy {
    Never,
    /// `unit * luby(i)` before the `i`-th restart.
    Luby { unit: u64 },
    /// Thresholds grow by `factor` from `inner` until they pass `outer`;
    /// then `inner` starts over and `outer` grows by `factor`.
    InnerOuter { inner: u64, outer: u64, factor: f64 },
}

/// The Luby sequence 1, 1, 2, 1, 1, 2, 4, ... (1-based).
pub fn luby(i: u64) -> u64 {
    assert!(i >= 1);
    let mut i = i;
    loop {
        let mut k = 1u32;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        if (1u64 << k) - 1 == i {
            return 1 << (k - 1);
        }
        i -= (1u64 << (k - 1)) - 1;
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RestartSchedule {
    policy: RestartPolicy,
    index: u64,
    inner: f64,
    outer: f64,
}

impl RestartSchedule {
    pub(crate) fn new(policy: RestartPolicy) -> Self {
        let (inner, outer) = match policy {
            RestartPolicy::InnerOuter { inner, outer, .. } => (inner as f64, outer as f64),
            _ => (0.0, 0.0),
        };
        RestartSchedule { policy, index: 1, inner, outer }
    }

    /// Conflicts allowed before the next restart.
    pub(crate) fn threshold(&self) -> Option<u64> {
        match self.policy {
            RestartPolicy::Never => None,
            RestartPolicy::Luby { unit } => Some(unit.saturating_mul(luby(self.index))),
            RestartPolicy::InnerOuter { .. } => Some(self.inner.round() as u64),
        }
    }

    pub(crate) fn advance(&mut self) {
        self.index += 1;
        if let RestartPolicy::InnerOuter { inner, factor, .. } = self.policy {
            self.inner *= factor;
            if self.inner > self.outer {
                self.inner = inner as f64;
                self.outer *= factor;
            }
        }
    }
}
