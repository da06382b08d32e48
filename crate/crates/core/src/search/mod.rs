//! The search loop: propagate, decide, analyse conflicts and backjump, with
//! restarts, learned-constraint cleanup and objective strengthening.

mod heuristics;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use heuristics::{decide_with, luby, ActivityQueue, DecisionContext, RestartPolicy, Strategy};
use heuristics::RestartSchedule;

use crate::analysis::{
    analyze_hybrid, analyze_resolution, AnalysisObserver, AnalysisOutcome, AnalysisResult, ReasonRef,
};
use crate::assignment::{BoundsView, ReasonInfo, Trail};
use crate::model::{Bound, Constraint, ConstraintId, Problem, Solution, VarId};
use crate::propagation::{Engine, Origin};

/// Conflict analysis procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Resolution,
    Cut,
}

/// Learned-constraint cleanup triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CleanupPolicy {
    /// Clean up once this many constraints were learned since the last cleanup.
    pub learned_threshold: usize,
    /// Or once learned constraints take about this many bytes.
    pub memory_cap: usize,
}

impl Default for CleanupPolicy {
    fn default() -> Self {
        CleanupPolicy { learned_threshold: 10_000, memory_cap: 64 << 20 }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: Mode,
    /// Tried in order; the last one must apply to every variable.
    pub strategies: Vec<Strategy>,
    pub restart: RestartPolicy,
    pub cleanup: Option<CleanupPolicy>,
    pub bump_factor: f64,
    pub rescale_cap: f64,
    pub time_limit: Option<Duration>,
    pub max_conflicts: Option<u64>,
    pub seed: u64,
    pub implicit_binaries: bool,
    /// Per-variable values for [`Strategy::Hint`].
    pub hints: Vec<Option<i64>>,
    /// Cooperative cancellation, checked like the time limit.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::Cut,
            strategies: vec![Strategy::LastValueHalf, Strategy::ObjectiveHalf, Strategy::UpperHalf],
            restart: RestartPolicy::InnerOuter { inner: 100, outer: 1000, factor: 1.1 },
            cleanup: Some(CleanupPolicy::default()),
            bump_factor: 1.05,
            rescale_cap: 1e100,
            time_limit: None,
            max_conflicts: None,
            seed: 0,
            implicit_binaries: true,
            hints: Vec::new(),
            cancel: None,
        }
    }
}

impl SolverConfig {
    pub fn with_mode(mode: Mode) -> Self {
        SolverConfig { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        match self.strategies.last() {
            None => return Err(SolverError::InvalidConfig("empty strategy order".into())),
            Some(s) if !s.is_total() => {
                return Err(SolverError::InvalidConfig(format!(
                    "strategy order must end with one of 1, 2, 3, 4 (got {s})"
                )))
            }
            _ => {}
        }
        if !(self.bump_factor >= 1.0) {
            return Err(SolverError::InvalidConfig("bump factor must be at least 1".into()));
        }
        if !(self.rescale_cap > 1.0) {
            return Err(SolverError::InvalidConfig("rescale cap must exceed 1".into()));
        }
        match self.restart {
            RestartPolicy::Luby { unit: 0 } => {
                return Err(SolverError::InvalidConfig("Luby unit must be positive".into()))
            }
            RestartPolicy::InnerOuter { inner, outer, factor } if inner == 0 || outer < inner || !(factor > 1.0) => {
                return Err(SolverError::InvalidConfig(
                    "inner-outer restarts need 0 < inner <= outer and factor > 1".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("variable `{0}` is unbounded after root propagation; unbounded variables are not supported")]
    Unbounded(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Feasible(Solution),
    Infeasible,
    /// Proved optimal. `objective` includes the objective offset.
    Optimal { solution: Solution, objective: i64 },
    /// Best solution found before a limit hit.
    Bounded { solution: Solution, objective: i64 },
    /// A limit hit before any solution was found.
    TimeLimit,
}

impl SolveOutcome {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            SolveOutcome::Feasible(s)
            | SolveOutcome::Optimal { solution: s, .. }
            | SolveOutcome::Bounded { solution: s, .. } => Some(s),
            _ => None,
        }
    }

    pub fn objective(&self) -> Option<i64> {
        match self {
            SolveOutcome::Optimal { objective, .. } | SolveOutcome::Bounded { objective, .. } => Some(*objective),
            _ => None,
        }
    }

    /// True for a definite answer (no limit was hit).
    pub fn is_complete(&self) -> bool {
        matches!(self, SolveOutcome::Feasible(_) | SolveOutcome::Infeasible | SolveOutcome::Optimal { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations_binary: u64,
    pub propagations_clause: u64,
    pub propagations_general: u64,
    pub propagations_implicit: u64,
    pub restarts: u64,
    pub cleanups: u64,
    pub learned: u64,
    pub removed: u64,
    pub early_backjumps: u64,
    pub solutions: u64,
    pub implicit_binaries: u64,
}

impl SolverStats {
    pub fn lines(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("conflicts", self.conflicts),
            ("decisions", self.decisions),
            ("propagations_binary", self.propagations_binary),
            ("propagations_clause", self.propagations_clause),
            ("propagations_general", self.propagations_general),
            ("propagations_implicit", self.propagations_implicit),
            ("restarts", self.restarts),
            ("cleanups", self.cleanups),
            ("learned", self.learned),
            ("removed", self.removed),
            ("early_backjumps", self.early_backjumps),
            ("solutions", self.solutions),
            ("implicit_binaries", self.implicit_binaries),
        ]
    }
}

/// Hooks into the search. All methods default to doing nothing.
pub trait SearchObserver {
    fn tracing(&self) -> bool {
        false
    }
    fn trace(&mut self, _line: &str) {}
    /// Initial conflicting set and every rewrite of it.
    fn conflicting_set(&mut self, _trail: &Trail, _cs: &[usize], _cc: Option<&Constraint>) {}
    /// Result of an analysis, before it is applied to the trail it was computed on.
    fn analysis(&mut self, _engine: &Engine, _result: &AnalysisResult) {}
    /// After every change of the trail that is not a restart.
    fn transition(&mut self, _trail: &Trail) {}
    fn restart(&mut self) {}
    fn incumbent(&mut self, _elapsed: Duration, _objective: i64, _conflicts: u64) {}
}

pub struct NoObserver;

impl SearchObserver for NoObserver {}

struct Bridge<'a>(&'a mut dyn SearchObserver);

impl AnalysisObserver for Bridge<'_> {
    fn rewrite(&mut self, trail: &Trail, cs: &[usize], cc: Option<&Constraint>) {
        self.0.conflicting_set(trail, cs, cc);
    }

    fn tracing(&self) -> bool {
        self.0.tracing()
    }

    fn trace(&mut self, line: String) {
        self.0.trace(&line);
    }
}

enum Stop {
    Limit,
    Exhausted,
}

pub struct Solver<'p> {
    problem: &'p Problem,
    config: SolverConfig,
    optimize: bool,
    engine: Engine,
    queue: ActivityQueue,
    phase: Vec<Option<i64>>,
    last_solution: Option<Vec<i64>>,
    incumbent: Option<(Vec<i64>, i64)>,
    objective_id: Option<ConstraintId>,
    restarts: RestartSchedule,
    conflicts_since_restart: u64,
    learned_since_cleanup: usize,
    stats: SolverStats,
    start: Instant,
}

impl<'p> Solver<'p> {
    pub fn new(problem: &'p Problem, config: SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let n = problem.num_vars();
        let mut queue = ActivityQueue::new(n, config.bump_factor, config.rescale_cap);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        queue.perturb((0..n).map(|_| rng.gen::<f64>()));
        Ok(Solver {
            problem,
            engine: Engine::new(problem, config.implicit_binaries),
            restarts: RestartSchedule::new(config.restart),
            optimize: problem.objective().is_some(),
            config,
            queue,
            phase: vec![None; n],
            last_solution: None,
            incumbent: None,
            objective_id: None,
            conflicts_since_restart: 0,
            learned_since_cleanup: 0,
            stats: SolverStats::default(),
            start: Instant::now(),
        })
    }

    /// Searches for any solution, ignoring the objective.
    pub fn feasibility_only(mut self) -> Self {
        self.optimize = false;
        self
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn stats(&self) -> SolverStats {
        let mut s = self.stats;
        let p = self.engine.stats;
        s.propagations_binary = p.binary;
        s.propagations_clause = p.clause;
        s.propagations_general = p.general;
        s.propagations_implicit = p.implicit;
        s
    }

    fn limit_hit(&self) -> bool {
        self.config.time_limit.is_some_and(|t| self.start.elapsed() >= t)
            || self.config.max_conflicts.is_some_and(|m| self.stats.conflicts >= m)
            || self.config.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed))
    }

    fn finish(&self, stop: Stop) -> SolveOutcome {
        let objective = self.problem.objective();
        match (stop, &self.incumbent) {
            (Stop::Exhausted, Some((values, _))) => SolveOutcome::Optimal {
                solution: Solution { values: values.clone() },
                objective: objective.map_or(0, |o| o.value(values)),
            },
            (Stop::Exhausted, None) => SolveOutcome::Infeasible,
            (Stop::Limit, Some((values, _))) => SolveOutcome::Bounded {
                solution: Solution { values: values.clone() },
                objective: objective.map_or(0, |o| o.value(values)),
            },
            (Stop::Limit, None) => SolveOutcome::TimeLimit,
        }
    }

    fn flush_trace(&mut self, obs: &mut dyn SearchObserver) {
        if obs.tracing() {
            for line in self.engine.take_trace() {
                obs.trace(&line);
            }
        }
    }

    /// Pops to `height`, saving the value of every variable that stops
    /// being fixed.
    fn backjump(&mut self, height: usize) {
        while self.engine.trail().len() > height {
            let t = self.engine.trail();
            let var = t.bound_at(t.len() - 1).var;
            if t.is_defined(var) {
                self.phase[var.index()] = t.lower(var);
            }
            self.engine.pop();
            self.queue.insert(var);
        }
    }

    fn restart(&mut self, obs: &mut dyn SearchObserver) {
        if self.engine.trail().current_level() > 0 {
            let h = self.engine.trail().level_start(1).unwrap();
            self.backjump(h);
        }
        self.conflicts_since_restart = 0;
        self.stats.restarts += 1;
        obs.restart();
        if obs.tracing() {
            obs.trace("restart");
        }
    }

    fn cleanup(&mut self, obs: &mut dyn SearchObserver) {
        self.restart(obs);
        let removed = self.engine.remove_constraints(|s| s.is_removable() && s.constraint.len() > 2 && s.counter == 0);
        let ids: Vec<ConstraintId> = self.engine.store().iter().map(|(id, _)| id).collect();
        for id in ids {
            if let Some(s) = self.engine.store_mut().get_mut(id) {
                s.counter /= 2;
            }
        }
        self.stats.removed += removed as u64;
        self.stats.cleanups += 1;
        self.learned_since_cleanup = 0;
        if obs.tracing() {
            obs.trace(&format!("cleanup removed={removed}"));
        }
    }

    fn cleanup_due(&self) -> bool {
        self.config.cleanup.is_some_and(|c| {
            self.learned_since_cleanup >= c.learned_threshold
                || self.engine.store().learned_bytes() >= c.memory_cap
        })
    }

    fn pick_variable(&mut self) -> Option<VarId> {
        while let Some(v) = self.queue.peek() {
            if self.engine.trail().is_defined(v) {
                self.queue.pop();
            } else {
                return Some(v);
            }
        }
        None
    }

    fn decide(&self, var: VarId) -> Bound {
        let t = self.engine.trail();
        let (l, u) = (t.lower(var).unwrap(), t.upper(var).unwrap());
        let ctx = DecisionContext {
            objective: self.problem.objective().filter(|_| self.optimize),
            last_value: self.phase[var.index()],
            last_solution: self.last_solution.as_ref().map(|s| s[var.index()]),
            hint: self.config.hints.get(var.index()).copied().flatten(),
        };
        self.config
            .strategies
            .iter()
            .find_map(|&s| decide_with(s, var, l, u, &ctx))
            .expect("the last strategy applies to every variable")
    }

    /// Records a solution. Returns `true` when the search is over.
    fn on_solution(&mut self, obs: &mut dyn SearchObserver) -> bool {
        let values = self.engine.trail().values().expect("all variables fixed");
        assert!(self.problem.is_solution(&values), "solver produced a non-solution");
        self.stats.solutions += 1;
        for (p, &v) in self.phase.iter_mut().zip(&values) {
            *p = Some(v);
        }
        self.last_solution = Some(values.clone());
        let objective = match self.problem.objective().filter(|_| self.optimize) {
            None => {
                self.incumbent = Some((values, 0));
                return true;
            }
            Some(o) => o,
        };
        let raw = objective.raw_value(&values);
        obs.incumbent(self.start.elapsed(), objective.value(&values), self.stats.conflicts);
        if obs.tracing() {
            obs.trace(&format!("incumbent {}", objective.value(&values)));
        }
        self.incumbent = Some((values, raw));
        let bound = match objective.improvement_constraint(raw) {
            Ok(c) => c,
            Err(_) => return true,
        };
        if bound.is_contradiction() {
            return true;
        }
        if let Some(old) = self.objective_id.take() {
            self.engine.store_mut().set_origin(old, Origin::Learned);
        }
        self.objective_id = self.engine.add_constraint(bound, Origin::Objective);
        false
    }

    fn apply(&mut self, r: AnalysisResult, obs: &mut dyn SearchObserver) -> Result<(), Stop> {
        let height = self.engine.trail().level_start(r.backjump_level + 1).expect("backjump below current level");
        self.backjump(height);
        let mut ids = Vec::with_capacity(r.learned.len());
        for c in r.learned {
            if c.is_contradiction() {
                return Err(Stop::Exhausted);
            }
            if obs.tracing() {
                obs.trace(&format!("learn {c}"));
            }
            let id = self.engine.add_constraint(c, Origin::Learned);
            if id.is_some() {
                self.stats.learned += 1;
                self.learned_since_cleanup += 1;
            }
            ids.push(id);
        }
        let reason = match r.reason {
            None => None,
            Some(ReasonRef::Existing(id)) => Some(id),
            Some(ReasonRef::Learned(i)) => ids[i],
        };
        if obs.tracing() {
            obs.trace(&format!("backjump level={} push {}", r.backjump_level, r.bound));
        }
        self.engine.push(r.bound, ReasonInfo::derived(r.reason_set, reason));
        for v in r.vars_seen {
            self.queue.bump(v);
        }
        self.queue.decay();
        for id in r.constraints_used {
            self.engine.store_mut().bump(id);
        }
        if r.early {
            self.stats.early_backjumps += 1;
        }
        Ok(())
    }

    /// Runs the search to completion or until a limit hits.
    pub fn run(&mut self, obs: &mut dyn SearchObserver) -> Result<SolveOutcome, SolverError> {
        self.start = Instant::now();
        self.engine.set_tracing(obs.tracing());
        let root = self.engine.propagate();
        self.flush_trace(obs);
        if root.is_some() {
            return Ok(SolveOutcome::Infeasible);
        }
        for v in self.problem.vars() {
            let t = self.engine.trail();
            if t.lower(v).is_none() || t.upper(v).is_none() {
                return Err(SolverError::Unbounded(self.problem.name(v).to_string()));
            }
        }
        self.engine.detect_implicit_binaries();
        self.stats.implicit_binaries = self.engine.implicit_binary_count() as u64;
        obs.transition(self.engine.trail());

        loop {
            let before = self.engine.trail().len();
            let conflict = self.engine.propagate();
            self.flush_trace(obs);
            if self.engine.trail().len() != before {
                obs.transition(self.engine.trail());
            }
            if let Some(conflict) = conflict {
                self.stats.conflicts += 1;
                self.conflicts_since_restart += 1;
                let trail = self.engine.trail();
                let level = conflict.cs.iter().map(|&h| trail.level_of(h)).max().unwrap_or(0);
                if level == 0 {
                    return Ok(self.finish(Stop::Exhausted));
                }
                if self.limit_hit() {
                    return Ok(self.finish(Stop::Limit));
                }
                if level < trail.current_level() {
                    let h = trail.level_start(level + 1).unwrap();
                    self.backjump(h);
                }
                let outcome = {
                    let mut bridge = Bridge(obs);
                    match self.config.mode {
                        Mode::Resolution => {
                            analyze_resolution(&conflict, self.engine.trail(), self.problem, &mut bridge)
                        }
                        Mode::Cut => analyze_hybrid(&conflict, self.engine.trail(), self.engine.store(), &mut bridge),
                    }
                };
                match outcome {
                    AnalysisOutcome::Infeasible => return Ok(self.finish(Stop::Exhausted)),
                    AnalysisOutcome::Backjump(r) => {
                        obs.analysis(&self.engine, &r);
                        if let Err(stop) = self.apply(r, obs) {
                            return Ok(self.finish(stop));
                        }
                        obs.transition(self.engine.trail());
                    }
                }
                continue;
            }

            if self.engine.trail().all_defined() {
                if self.on_solution(obs) {
                    return Ok(self.finish(Stop::Exhausted).into_found(self.optimize));
                }
                continue;
            }

            if self.restarts.threshold().is_some_and(|t| self.conflicts_since_restart >= t) {
                self.restarts.advance();
                if self.limit_hit() {
                    return Ok(self.finish(Stop::Limit));
                }
                if self.engine.trail().current_level() > 0 {
                    self.restart(obs);
                    continue;
                }
                self.conflicts_since_restart = 0;
            }
            if self.cleanup_due() {
                self.cleanup(obs);
                continue;
            }
            if self.stats.decisions % 1024 == 1023 && self.limit_hit() {
                return Ok(self.finish(Stop::Limit));
            }
            let var = self.pick_variable().expect("an undefined variable exists");
            let b = self.decide(var);
            if obs.tracing() {
                obs.trace(&format!("decide {b}"));
            }
            self.engine.push(b, ReasonInfo::decision());
            self.stats.decisions += 1;
            obs.transition(self.engine.trail());
        }
    }
}

impl SolveOutcome {
    /// In feasibility mode an exhausted search after a solution means the
    /// solution itself is the answer.
    fn into_found(self, optimize: bool) -> SolveOutcome {
        match self {
            SolveOutcome::Optimal { solution, .. } if !optimize => SolveOutcome::Feasible(solution),
            other => other,
        }
    }
}

/// Solves `problem`: optimises when it has an objective, otherwise looks
/// for any solution.
pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    solve_with(problem, config, &mut NoObserver).map(|r| r.0)
}

pub fn solve_with(
    problem: &Problem,
    config: &SolverConfig,
    obs: &mut dyn SearchObserver,
) -> Result<(SolveOutcome, SolverStats), SolverError> {
    let mut s = Solver::new(problem, config.clone())?;
    let out = s.run(obs)?;
    Ok((out, s.stats()))
}

/// Looks for any solution, ignoring the objective.
pub fn solve_feasibility(problem: &Problem, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    let mut s = Solver::new(problem, config.clone())?.feasibility_only();
    s.run(&mut NoObserver)
}

/// Minimises the objective by repeated strengthening.
pub fn solve_optimize(problem: &Problem, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    if problem.objective().is_none() {
        return Err(SolverError::InvalidConfig("problem has no objective".into()));
    }
    solve(problem, config)
}
