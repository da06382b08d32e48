//! Instance generators for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Constraint, Objective, Problem, VarId};

/// Shape of random small instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub max_vars: usize,
    pub min_value: i64,
    pub max_value: i64,
    pub max_constraints: usize,
    pub max_coeff: i64,
    /// Probability that the instance gets an objective.
    pub objective: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec { max_vars: 5, min_value: -4, max_value: 4, max_constraints: 8, max_coeff: 5, objective: 0.5 }
    }
}

/// A random bounded ILP. Each domain is a random sub-interval of
/// `[min_value, max_value]`. Each constraint has between one term and one
/// term per variable, and its right-hand side lies strictly between the
/// smallest and largest left-hand side over the box, so it cuts the box
/// without emptying it on its own.
pub fn random_problem<R: Rng>(rng: &mut R, spec: &RandomSpec) -> Problem {
    let mut p = Problem::new();
    let n = rng.gen_range(1..=spec.max_vars);
    for i in 0..n {
        let a = rng.gen_range(spec.min_value..=spec.max_value);
        let b = rng.gen_range(spec.min_value..=spec.max_value);
        // binaries show up often so that clause handling gets exercised
        let (lb, ub) = if rng.gen_bool(0.3) { (0, 1) } else { (a.min(b), a.max(b)) };
        p.add_var(format!("x{i}"), lb, ub).unwrap();
    }
    let m = rng.gen_range(0..=spec.max_constraints);
    let coeff = |rng: &mut R| loop {
        let c = rng.gen_range(-spec.max_coeff..=spec.max_coeff);
        if c != 0 {
            break c;
        }
    };
    for _ in 0..m {
        let k = rng.gen_range(1..=n);
        let mut terms = Vec::with_capacity(k);
        for _ in 0..k {
            terms.push((VarId::new(rng.gen_range(0..n)), coeff(rng)));
        }
        let c = Constraint::new(terms, 0).unwrap();
        let (mut lo, mut hi) = (0, 0);
        for m in c.monomials() {
            let (l, u) = (p.lower(m.var).unwrap(), p.upper(m.var).unwrap());
            lo += (m.coeff * l).min(m.coeff * u);
            hi += (m.coeff * l).max(m.coeff * u);
        }
        let rhs = if lo < hi { rng.gen_range(lo..hi) } else { lo };
        let c = Constraint::new(c.monomials().iter().map(|m| (m.var, m.coeff)), rhs).unwrap();
        p.add_constraint(c).unwrap();
    }
    if rng.gen_bool(spec.objective) {
        let terms: Vec<_> = (0..n).map(|i| (VarId::new(i), rng.gen_range(-spec.max_coeff..=spec.max_coeff))).collect();
        p.set_objective(Objective::new(terms).unwrap()).unwrap();
    }
    p
}

/// `count` instances from a fixed seed.
pub fn random_corpus(seed: u64, count: usize, spec: &RandomSpec) -> Vec<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_problem(&mut rng, spec)).collect()
}

/// Pigeon-hole instance: every pigeon sits in some hole, no hole holds two
/// pigeons. Infeasible whenever `pigeons > holes`.
pub fn pigeonhole(pigeons: usize, holes: usize) -> Problem {
    let mut p = Problem::new();
    let mut x = Vec::with_capacity(pigeons);
    for i in 0..pigeons {
        let row: Vec<VarId> = (0..holes).map(|j| p.add_var(format!("p{i}h{j}"), 0, 1).unwrap()).collect();
        x.push(row);
    }
    for row in &x {
        p.add_constraint(Constraint::new(row.iter().map(|&v| (v, -1)), -1).unwrap()).unwrap();
    }
    for j in 0..holes {
        p.add_constraint(Constraint::new(x.iter().map(|r| (r[j], 1)), 1).unwrap()).unwrap();
    }
    p
}
