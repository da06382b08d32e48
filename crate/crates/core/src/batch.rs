//! Solving many independent problems at once. With the `parallel` feature
//! the problems are spread over the rayon pool; without it they are solved
//! one after the other. Each problem gets its own solver, so results do not
//! depend on the schedule.

use crate::model::Problem;
use crate::search::{solve_with, NoObserver, SolveOutcome, SolverConfig, SolverError, SolverStats};

pub type BatchResult = Result<(SolveOutcome, SolverStats), SolverError>;

fn solve_one(problem: &Problem, config: &SolverConfig) -> BatchResult {
    solve_with(problem, config, &mut NoObserver)
}

pub fn solve_batch_sequential(problems: &[Problem], config: &SolverConfig) -> Vec<BatchResult> {
    problems.iter().map(|p| solve_one(p, config)).collect()
}

#[cfg(feature = "parallel")]
pub fn solve_batch_parallel(problems: &[Problem], config: &SolverConfig) -> Vec<BatchResult> {
    use rayon::prelude::*;
    problems.par_iter().map(|p| solve_one(p, config)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn solve_batch_parallel(problems: &[Problem], config: &SolverConfig) -> Vec<BatchResult> {
    solve_batch_sequential(problems, config)
}

/// Results in input order.
pub fn solve_batch(problems: &[Problem], config: &SolverConfig) -> Vec<BatchResult> {
    solve_batch_parallel(problems, config)
}

/// Runs `f` on every item, in parallel when the feature is on.
pub fn map_batch<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
