//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use intsat::analysis::{analyze_hybrid, analyze_resolution, clause_to_constraint, AnalysisOutcome, AnalysisResult};
use intsat::assignment::{BoundsView, ReasonInfo, Trail};
use intsat::batch::map_batch;
use intsat::io::{enumerate_solutions, oracle_solve_sequential};
use intsat::model::{cut, Bound, Constraint, Objective, Problem, VarId};
use intsat::propagation::{filter_value, is_conflict, propagations, Engine};
use intsat::random::{pigeonhole, random_corpus, RandomSpec};
use intsat::search::{
    solve_with, Mode, NoObserver, RestartPolicy, SearchObserver, SolveOutcome, SolverConfig,
};

const CONFLICT_CEILING: u64 = 100_000;

type Verdict = Result<String, String>;

fn report(n: u32, name: &str, elapsed: Duration, limit: Option<Duration>, v: &Verdict) -> bool {
    let over = limit.is_some_and(|l| elapsed > l);
    let ok = v.is_ok() && !over;
    let detail = match v {
        Ok(d) => d.clone(),
        Err(e) => e.clone(),
    };
    let limit = limit.map_or(String::new(), |l| format!(" (limit {:.0?})", l));
    let line = format!(
        "criterion {n} [{name}]: {} in {:.2?}{limit} - {detail}\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed
    );
    // written past the test harness capture so the lines always show
    let _ = std::io::stdout().write_all(line.as_bytes());
    ok
}

fn v(i: usize) -> VarId {
    VarId::new(i)
}

fn c(terms: &[(VarId, i64)], rhs: i64) -> Constraint {
    Constraint::new(terms.iter().copied(), rhs).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- examples

fn rounding_instance() -> (Problem, VarId, VarId, VarId) {
    let mut p = Problem::new();
    let x = p.add_var_with("x", None, None).unwrap();
    // an upper bound on y keeps the cut from propagating early at level 1
    let y = p.add_var_with("y", None, Some(1)).unwrap();
    let z = p.add_var_with("z", None, None).unwrap();
    p.add_constraint(c(&[(x, 1), (y, 1), (z, 2)], 2)).unwrap();
    p.add_constraint(c(&[(x, 1), (y, 1), (z, -2)], 0)).unwrap();
    (p, x, y, z)
}

fn core_instance() -> (Problem, VarId, VarId, VarId) {
    let mut p = Problem::new();
    let x = p.add_var_with("x", None, Some(1)).unwrap();
    let y = p.add_var_with("y", None, Some(1)).unwrap();
    let z = p.add_var_with("z", None, Some(3)).unwrap();
    p.add_constraint(c(&[(x, -1), (y, -1), (z, -1)], -2)).unwrap();
    p.add_constraint(c(&[(x, 1), (y, 1)], 1)).unwrap();
    p.add_constraint(c(&[(x, 1), (z, 1)], 1)).unwrap();
    p.add_constraint(c(&[(y, 1), (z, 1)], 1)).unwrap();
    (p, x, y, z)
}

fn backjump(o: AnalysisOutcome) -> Result<AnalysisResult, String> {
    match o {
        AnalysisOutcome::Backjump(r) => Ok(r),
        AnalysisOutcome::Infeasible => Err("analysis reported infeasible".into()),
    }
}

fn worked_examples() -> Verdict {
    // cut of 4x + 4y + 2z <= 3 and -10x + y - z <= 0 on x
    let (x, y, z) = (v(0), v(1), v(2));
    let c1 = Constraint::verbatim([(x, 4), (y, 4), (z, 2)], 3).unwrap();
    let c2 = c(&[(x, -10), (y, 1), (z, -1)], 0);
    let got = cut(&c1, &c2, x);
    ensure(got == Some(c(&[(y, 11), (z, 4)], 7)), || format!("cut gave {got:?}"))?;
    ensure(Constraint::new([(y, 22), (z, 8)], 15).unwrap() == c(&[(y, 11), (z, 4)], 7), || "22y+8z<=15".into())?;

    // 1 <= x, y <= 2 and x - 2y + 5z <= 5 propagate z <= 1
    let mut p = Problem::new();
    let x = p.add_var_with("x", Some(1), None).unwrap();
    let y = p.add_var_with("y", None, Some(2)).unwrap();
    let z = p.add_var_with("z", None, None).unwrap();
    p.add_constraint(c(&[(x, 1), (y, -2), (z, 5)], 5)).unwrap();
    let mut e = Engine::new(&p, false);
    ensure(e.propagate().is_none(), || "unexpected conflict".into())?;
    ensure(e.trail().upper(z) == Some(1), || format!("z <= {:?}", e.trail().upper(z)))?;

    // the rounding example: decide 0 <= x, then 1 <= y
    let (p, x, y, z) = rounding_instance();
    let mut e = Engine::new(&p, false);
    ensure(e.propagate().is_none(), || "root conflict".into())?;
    e.push(Bound::lower(x, 0), ReasonInfo::decision());
    ensure(e.propagate().is_none(), || "conflict after 0 <= x".into())?;
    let hx = e.trail().len() - 1;
    e.push(Bound::lower(y, 1), ReasonInfo::decision());
    let conflict = e.propagate().ok_or("no conflict after 1 <= y")?;
    ensure(e.trail().upper(z) == Some(0), || "z <= 0 was not propagated".into())?;
    let r = backjump(analyze_resolution(&conflict, e.trail(), &p, &mut ()))?;
    ensure(r.bound == Bound::upper(y, 0) && r.reason_set == vec![hx] && r.learned.is_empty(), || {
        format!("resolution: push {} reason {:?} learned {:?}", r.bound, r.reason_set, r.learned)
    })?;
    let r = backjump(analyze_hybrid(&conflict, e.trail(), e.store(), &mut ()))?;
    ensure(
        r.bound == Bound::upper(y, 0) && r.learned == vec![c(&[(x, 1), (y, 1)], 1)] && !r.early,
        || format!("cut: push {} learned {:?}", r.bound, r.learned),
    )?;

    // the core instance: 1 <= x leads to a conflict, cut mode learns 1 <= y
    let (p, x, y, _) = core_instance();
    let mut e = Engine::new(&p, false);
    ensure(e.propagate().is_none(), || "root conflict".into())?;
    e.push(Bound::lower(x, 1), ReasonInfo::decision());
    let conflict = e.propagate().ok_or("no conflict after 1 <= x")?;
    let r = backjump(analyze_hybrid(&conflict, e.trail(), e.store(), &mut ()))?;
    ensure(
        r.early
            && r.backjump_level == 0
            && r.bound == Bound::lower(y, 1)
            && r.reason_set.is_empty()
            && r.learned == vec![c(&[(y, -1)], -1)],
        || format!("core instance: push {} early={} learned {:?}", r.bound, r.early, r.learned),
    )?;
    for mode in [Mode::Resolution, Mode::Cut] {
        let (out, _) = solve_with(&p, &SolverConfig::with_mode(mode), &mut NoObserver).map_err(|e| e.to_string())?;
        ensure(out == SolveOutcome::Infeasible, || format!("{mode:?}: {out:?}"))?;
    }
    Ok("cut, propagation, both analyses and the core instance reproduce".into())
}

// ----------------------------------------------------------------- oracle

fn spec() -> RandomSpec {
    RandomSpec::default()
}

fn config(mode: Mode) -> SolverConfig {
    SolverConfig { max_conflicts: Some(CONFLICT_CEILING), ..SolverConfig::with_mode(mode) }
}

fn compare(p: &Problem, oracle: &SolveOutcome, got: &SolveOutcome) -> Result<(), String> {
    if let Some(s) = got.solution() {
        ensure(p.is_solution(&s.values), || format!("returned non-solution {:?}", s.values))?;
    }
    let ok = match (oracle, got) {
        (SolveOutcome::Infeasible, SolveOutcome::Infeasible) => true,
        (SolveOutcome::Feasible(_), SolveOutcome::Feasible(_)) => true,
        (SolveOutcome::Optimal { objective: a, .. }, SolveOutcome::Optimal { objective: b, .. }) => a == b,
        _ => false,
    };
    ensure(ok, || format!("oracle {oracle:?}, solver {got:?}"))
}

fn oracle_equivalence() -> Verdict {
    let corpus = random_corpus(2024, 600, &spec());
    let with_objective = corpus.iter().filter(|p| p.objective().is_some()).count();
    let failures: Vec<String> = map_batch(&corpus, |p| {
        let oracle = oracle_solve_sequential(p).unwrap();
        let mut errs = Vec::new();
        for mode in [Mode::Resolution, Mode::Cut] {
            match solve_with(p, &config(mode), &mut NoObserver) {
                Ok((out, _)) => {
                    if let Err(e) = compare(p, &oracle, &out) {
                        errs.push(format!("{mode:?}: {e}"));
                    }
                }
                Err(e) => errs.push(e.to_string()),
            }
        }
        errs
    })
    .into_iter()
    .flatten()
    .collect();
    ensure(failures.is_empty(), || format!("{} mismatches, first: {}", failures.len(), failures[0]))?;
    Ok(format!("{} instances ({with_objective} with objective) x 2 modes agree", corpus.len()))
}

// ------------------------------------------------------------- property suites

/// Bounds given directly as a box. Heights are `2v` for lower and `2v + 1`
/// for upper bounds.
struct BoxView {
    lb: Vec<Option<i64>>,
    ub: Vec<Option<i64>>,
}

impl BoundsView for BoxView {
    fn lower_entry(&self, var: VarId) -> Option<(i64, usize)> {
        self.lb[var.index()].map(|l| (l, 2 * var.index()))
    }

    fn upper_entry(&self, var: VarId) -> Option<(i64, usize)> {
        self.ub[var.index()].map(|u| (u, 2 * var.index() + 1))
    }
}

impl BoxView {
    fn finite(lb: Vec<i64>, ub: Vec<i64>) -> BoxView {
        BoxView { lb: lb.into_iter().map(Some).collect(), ub: ub.into_iter().map(Some).collect() }
    }

    fn points(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![]];
        for (l, u) in self.lb.iter().zip(&self.ub) {
            let (l, u) = (l.unwrap(), u.unwrap());
            out = out
                .into_iter()
                .flat_map(|p| {
                    (l..=u).map(move |x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

const N: usize = 4;

fn random_box(rng: &mut ChaCha8Rng) -> BoxView {
    let mut lb = Vec::new();
    let mut ub = Vec::new();
    for _ in 0..N {
        let a = rng.gen_range(-4..=4);
        let b = rng.gen_range(-4..=4);
        lb.push(a.min(b));
        ub.push(a.max(b));
    }
    BoxView::finite(lb, ub)
}

fn random_constraint(rng: &mut ChaCha8Rng, vars: &[usize], max: i64) -> (Vec<(VarId, i64)>, i64) {
    let terms: Vec<(VarId, i64)> = vars
        .iter()
        .map(|&i| {
            let mut a = 0;
            while a == 0 {
                a = rng.gen_range(-max..=max);
            }
            (v(i), a)
        })
        .collect();
    (terms, rng.gen_range(-15..=15))
}

fn some_vars(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = rng.gen_range(1..=N);
    let mut vars: Vec<usize> = (0..N).collect();
    for i in 0..N {
        vars.swap(i, rng.gen_range(i..N));
    }
    vars.truncate(k);
    vars
}

const CASES: usize = 400;

fn prop_conflicts(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    for _ in 0..CASES {
        let (t, r) = { let vars = some_vars(rng); random_constraint(rng, &vars, 5) };
        let con = c(&t, r);
        let bx = random_box(rng);
        let satisfiable = bx.points().iter().any(|p| con.evaluate(p));
        ensure(is_conflict(&con, &bx).is_some() == !satisfiable, || format!("conflict predicate wrong for {con}"))?;
    }
    Ok(CASES)
}

fn prop_propagations(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut checked = 0;
    while checked < CASES {
        let (t, r) = { let vars = some_vars(rng); random_constraint(rng, &vars, 5) };
        let con = c(&t, r);
        let bx = random_box(rng);
        let props = propagations(&con, &bx);
        for (b, rs) in props {
            checked += 1;
            for p in bx.points() {
                if con.evaluate(&p) {
                    ensure(b.is_satisfied_by(p[b.var.index()]), || format!("{con} does not entail {b} at {p:?}"))?;
                }
            }
            // only the reason set: the other sides are opened wide
            let mut wide = BoxView::finite(vec![0; N], vec![0; N]);
            for x in con.vars() {
                wide.lb[x.index()] = Some(-12);
                wide.ub[x.index()] = Some(12);
            }
            for h in rs {
                let (var, upper) = (h / 2, h % 2 == 1);
                if upper {
                    wide.ub[var] = bx.ub[var];
                } else {
                    wide.lb[var] = bx.lb[var];
                }
            }
            for p in wide.points() {
                if con.evaluate(&p) {
                    ensure(b.is_satisfied_by(p[b.var.index()]), || format!("reason set of {b} too weak for {con}"))?;
                }
            }
        }
    }
    Ok(checked)
}

fn min_over(a: i64, l: i64, u: i64) -> i64 {
    (a * l).min(a * u)
}

fn prop_no_rounding(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut checked = 0;
    while checked < CASES {
        let bx = random_box(rng);
        let j = rng.gen_range(0..N);
        let upper = rng.gen_bool(0.5);
        // C2 propagates a bound on x_j exactly, without rounding
        let (mut t2, _) = random_constraint(rng, &(0..N).collect::<Vec<_>>(), 4);
        let bj = rng.gen_range(1..=4) * if upper { 1 } else { -1 };
        t2[j].1 = bj;
        let rest: i64 = t2.iter().filter(|m| m.0 != v(j)).map(|m| min_over(m.1, bx.lb[m.0.index()].unwrap(), bx.ub[m.0.index()].unwrap())).sum();
        let (l, u) = (bx.lb[j].unwrap(), bx.ub[j].unwrap());
        if l == u {
            continue;
        }
        let e = if upper { rng.gen_range(l..u) } else { rng.gen_range(l + 1..=u) };
        let b0 = bj * e + rest;
        let c2 = Constraint::verbatim(t2.clone(), b0).unwrap();
        let mut r = BoxView::finite(bx.lb.iter().map(|x| x.unwrap()).collect(), bx.ub.iter().map(|x| x.unwrap()).collect());
        if upper {
            r.ub[j] = Some(e);
        } else {
            r.lb[j] = Some(e);
        }
        // C1 has the opposite sign on x_j and is false with the new bound
        let (mut t1, _) = random_constraint(rng, &(0..N).collect::<Vec<_>>(), 4);
        t1[j].1 = -rng.gen_range(1..=4) * if upper { 1 } else { -1 };
        let m1: i64 = t1.iter().map(|m| min_over(m.1, r.lb[m.0.index()].unwrap(), r.ub[m.0.index()].unwrap())).sum();
        let c1 = Constraint::verbatim(t1, m1 - rng.gen_range(1..=3)).unwrap();
        debug_assert!(is_conflict(&c1, &r).is_some());
        let Some(c3) = cut(&c1, &c2, v(j)) else { continue };
        checked += 1;
        let view = BoxView { lb: bx.lb.clone(), ub: bx.ub.clone() };
        ensure(is_conflict(&c3, &view).is_some(), || format!("cut {c3} of {c1} and {c2} is not false"))?;
    }
    Ok(checked)
}

fn prop_filters(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    for _ in 0..CASES {
        let (t, r) = { let vars = some_vars(rng); random_constraint(rng, &vars, 5) };
        let con = c(&t, r);
        let bx = random_box(rng);
        // the indicator computed from enumerated minima
        let mut sum = 0i128;
        let mut widest = 0i128;
        for m in con.monomials() {
            let (l, u) = (bx.lb[m.var.index()].unwrap(), bx.ub[m.var.index()].unwrap());
            sum += (l..=u).map(|x| m.coeff * x).min().unwrap() as i128;
            widest = widest.max((m.coeff.abs() * (u - l)) as i128);
        }
        let f = filter_value(&con, &bx).unwrap();
        ensure(f == sum + widest - con.rhs() as i128, || format!("indicator of {con} is {f}"))?;
        let props = propagations(&con, &bx);
        if f <= 0 {
            ensure(props.is_empty(), || format!("{con} propagates with indicator {f}"))?;
        } else if is_conflict(&con, &bx).is_none() {
            ensure(!props.is_empty(), || format!("{con} propagates nothing with indicator {f}"))?;
        }
    }
    // maintained filters bound the exact indicator from above throughout search
    let corpus = random_corpus(31, 60, &spec());
    for p in &corpus {
        let mut e = Engine::new(p, true);
        if e.propagate().is_some() {
            continue;
        }
        e.detect_implicit_binaries();
        for _ in 0..30 {
            let free: Vec<VarId> = p.vars().filter(|&x| !e.trail().is_defined(x)).collect();
            if free.is_empty() {
                break;
            }
            let x = free[rng.gen_range(0..free.len())];
            let (l, u) = (e.trail().lower(x).unwrap(), e.trail().upper(x).unwrap());
            let b = if rng.gen_bool(0.5) { Bound::lower(x, rng.gen_range(l + 1..=u)) } else { Bound::upper(x, rng.gen_range(l..u)) };
            e.push(b, ReasonInfo::decision());
            if e.propagate().is_some() {
                let h = e.trail().level_start(e.trail().current_level()).unwrap();
                e.backjump_to(h);
            }
            ensure(e.check_filters().is_ok(), || "maintained filter below the exact indicator".into())?;
            for (id, s) in e.store().iter() {
                if e.filter(id).is_some_and(|f| f <= 0) {
                    ensure(propagations(&s.constraint, e.trail()).is_empty(), || format!("filtered {} propagates", s.constraint))?;
                }
            }
        }
    }
    Ok(CASES)
}

fn prop_division(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut checked = 0;
    while checked < CASES {
        let (t, k) = { let vars = some_vars(rng); random_constraint(rng, &vars, 5) };
        let f = rng.gen_range(2..=5);
        let d = rng.gen_range(0..f);
        let c1 = Constraint::verbatim(t.iter().map(|&(x, a)| (x, a * f)), k * f + d).unwrap();
        let c2 = Constraint::verbatim(t.clone(), k).unwrap();
        let bx = random_box(rng);
        for &(x, _) in &t {
            let on = |cc: &Constraint| propagations(cc, &bx).into_iter().any(|(b, _)| b.var == x);
            let conflict = |cc: &Constraint| is_conflict(cc, &bx).is_some();
            if !on(&c1) && !conflict(&c1) {
                checked += 1;
                ensure(!on(&c2) && !conflict(&c2), || format!("{c2} propagates on {x} but {c1} does not"))?;
            }
        }
    }
    Ok(checked)
}

fn prop_disjoint_cut(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut checked = 0;
    while checked < CASES {
        let bx = random_box(rng);
        let x = rng.gen_range(0..N);
        let others: Vec<usize> = (0..N).filter(|&i| i != x).collect();
        let split = rng.gen_range(0..=others.len());
        let make = |rng: &mut ChaCha8Rng, vars: &[usize], sign: i64| {
            let (mut t, _) = random_constraint(rng, vars, 4);
            t.push((v(x), sign * rng.gen_range(1..=4)));
            // rhs just large enough that nothing propagates
            let mut sum = 0;
            let mut widest = 0;
            for &(y, a) in &t {
                let (l, u) = (bx.lb[y.index()].unwrap(), bx.ub[y.index()].unwrap());
                sum += min_over(a, l, u);
                widest = widest.max(a.abs() * (u - l));
            }
            Constraint::verbatim(t, sum + widest + rng.gen_range(0..=2)).unwrap()
        };
        let c1 = make(rng, &others[..split], 1);
        let c2 = make(rng, &others[split..], -1);
        if !propagations(&c1, &bx).is_empty() || !propagations(&c2, &bx).is_empty() {
            return Err("generator produced a propagating premise".into());
        }
        let Some(c3) = cut(&c1, &c2, v(x)) else { continue };
        checked += 1;
        ensure(propagations(&c3, &bx).is_empty() && is_conflict(&c3, &bx).is_none(), || {
            format!("cut {c3} of {c1} and {c2} propagates")
        })?;
    }
    Ok(checked)
}

fn property_suites() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parts = Vec::new();
    for (name, f) in [
        ("conflicts", prop_conflicts as fn(&mut ChaCha8Rng) -> Result<usize, String>),
        ("entailment", prop_propagations),
        ("no-rounding", prop_no_rounding),
        ("filters", prop_filters),
        ("division", prop_division),
        ("disjoint cut", prop_disjoint_cut),
    ] {
        let n = f(&mut rng).map_err(|e| format!("{name}: {e}"))?;
        ensure(n >= 200, || format!("{name}: only {n} cases"))?;
        parts.push(format!("{name} {n}"));
    }
    Ok(parts.join(", "))
}

// ------------------------------------------------- instrumented search runs

/// Checks the analysis contract, the progress measure and the incumbent
/// sequence of one run.
struct Checker<'a> {
    problem: &'a Problem,
    solutions: &'a [Vec<i64>],
    best: Option<i64>,
    pending: Option<(Vec<Bound>, Bound)>,
    last_measure: Option<Vec<u64>>,
    incumbents: Vec<i64>,
    violations: Vec<String>,
    analyses: u64,
    rewrites: u64,
    transitions: u64,
}

impl<'a> Checker<'a> {
    fn new(problem: &'a Problem, solutions: &'a [Vec<i64>]) -> Self {
        Checker {
            problem,
            solutions,
            best: None,
            pending: None,
            last_measure: None,
            incumbents: Vec::new(),
            violations: Vec::new(),
            analyses: 0,
            rewrites: 0,
            transitions: 0,
        }
    }

    /// Solutions of the current constraint set: the original constraints
    /// plus the objective strengthening.
    fn current(&self) -> impl Iterator<Item = &Vec<i64>> {
        let bound = self.best;
        let obj = self.problem.objective();
        self.solutions.iter().filter(move |s| match (bound, obj) {
            (Some(b), Some(o)) => o.value(s) < b,
            _ => true,
        })
    }

    fn fail(&mut self, msg: String) {
        if self.violations.len() < 5 {
            self.violations.push(msg);
        }
    }
}

fn holds_all(trail: &Trail, hs: &[usize], s: &[i64]) -> bool {
    hs.iter().all(|&h| {
        let b = trail.bound_at(h);
        b.is_satisfied_by(s[b.var.index()])
    })
}

impl SearchObserver for Checker<'_> {
    fn conflicting_set(&mut self, trail: &Trail, cs: &[usize], cc: Option<&Constraint>) {
        self.rewrites += 1;
        let found = self.current().find(|s| holds_all(trail, cs, s)).cloned();
        if let Some(s) = found {
            let msg = format!("conflicting set satisfiable by {s:?}");
            self.fail(msg);
        }
        if let Some(cc) = cc {
            let found = self.current().find(|s| !cc.evaluate(s)).cloned();
        if let Some(s) = found {
                let msg = format!("conflicting constraint {cc} excludes solution {s:?}");
                self.fail(msg);
            }
        }
    }

    fn analysis(&mut self, engine: &Engine, r: &AnalysisResult) {
        self.analyses += 1;
        let trail = engine.trail();
        let keep = trail.level_start(r.backjump_level + 1).unwrap();
        if let Some(&h) = r.reason_set.iter().find(|&&h| h >= keep) {
            self.fail(format!("reason height {h} above the backjump point {keep}"));
        }
        if !trail.prefix(keep).is_fresh(r.bound) {
            self.fail(format!("pushed bound {} is not fresh", r.bound));
        }
        let found = self.current().find(|s| holds_all(trail, &r.reason_set, s) && !r.bound.is_satisfied_by(s[r.bound.var.index()])).cloned();
        if let Some(s) = found {
            let msg = format!("reason set does not entail {} (solution {s:?})", r.bound);
            self.fail(msg);
        }
        for l in &r.learned {
            let found = self.current().find(|s| !l.evaluate(s)).cloned();
        if let Some(s) = found {
                let msg = format!("learned {l} excludes solution {s:?}");
                self.fail(msg);
            }
        }
        let prefix: Vec<Bound> = (0..keep).map(|h| trail.bound_at(h)).collect();
        self.pending = Some((prefix, r.bound));
    }

    fn transition(&mut self, trail: &Trail) {
        self.transitions += 1;
        if let Some((prefix, b)) = self.pending.take() {
            let same = trail.len() == prefix.len() + 1
                && prefix.iter().enumerate().all(|(h, &p)| trail.bound_at(h) == p)
                && trail.bound_at(prefix.len()) == b;
            if !same {
                self.fail(format!("trail after analysis is not the kept prefix plus {b}"));
            }
        }
        let m = trail.termination_measure(self.problem).expect("bounded");
        if let Some(last) = &self.last_measure {
            if m >= *last {
                let msg = format!("measure did not decrease: {last:?} -> {m:?}");
                self.fail(msg);
            }
        }
        self.last_measure = Some(m);
    }

    fn restart(&mut self) {
        self.last_measure = None;
    }

    fn incumbent(&mut self, _elapsed: Duration, objective: i64, _conflicts: u64) {
        if self.best.is_some_and(|b| objective >= b) {
            let msg = format!("incumbent {objective} does not improve on {:?}", self.best);
            self.fail(msg);
        }
        self.best = Some(objective);
        self.incumbents.push(objective);
    }
}

struct RunReport {
    violations: Vec<String>,
    analyses: u64,
    rewrites: u64,
    transitions: u64,
    conflicts: u64,
    incumbents: Vec<i64>,
    outcome: SolveOutcome,
    oracle: SolveOutcome,
}

/// Most small random instances are decided by root propagation alone. The
/// instrumented runs use instances from a larger pool that need at least
/// one analysed conflict in some mode (the final conflict
/// of a search is never analysed), plus a slice of somewhat larger instances.
fn search_corpus() -> Vec<Problem> {
    let needs_search = |p: &Problem| {
        [Mode::Resolution, Mode::Cut].into_iter().any(|m| {
            solve_with(p, &config(m), &mut NoObserver).is_ok_and(|(_, s)| s.conflicts >= 2)
        })
    };
    let pick = |pool: Vec<Problem>, n: usize| -> Vec<Problem> {
        let keep = map_batch(&pool, |p| needs_search(p));
        pool.into_iter().zip(keep).filter(|x| x.1).map(|x| x.0).take(n).collect()
    };
    let mut corpus = pick(random_corpus(99, 20_000, &spec()), 400);
    let larger = RandomSpec { max_vars: 8, min_value: 0, max_value: 3, max_constraints: 12, ..spec() };
    corpus.extend(pick(random_corpus(100, 4_000, &larger), 200));
    corpus
}

fn instrumented_runs() -> Vec<RunReport> {
    let corpus = search_corpus();
    let mut jobs = Vec::new();
    for (i, p) in corpus.iter().enumerate() {
        for mode in [Mode::Resolution, Mode::Cut] {
            let mut cfg = config(mode);
            if i % 3 == 0 {
                // frequent restarts and cleanups on a third of the runs
                cfg.restart = RestartPolicy::Luby { unit: 1 };
                cfg.cleanup = Some(intsat::search::CleanupPolicy { learned_threshold: 2, memory_cap: usize::MAX });
            }
            jobs.push((p, cfg));
        }
    }
    map_batch(&jobs, |(p, cfg)| {
        let sols = enumerate_solutions(p).unwrap();
        let oracle = oracle_solve_sequential(p).unwrap();
        let mut ck = Checker::new(p, &sols);
        let (outcome, stats) = solve_with(p, cfg, &mut ck).unwrap();
        RunReport {
            violations: ck.violations,
            analyses: ck.analyses,
            rewrites: ck.rewrites,
            transitions: ck.transitions,
            conflicts: stats.conflicts,
            incumbents: ck.incumbents,
            outcome,
            oracle,
        }
    })
}

fn validity(runs: &[RunReport]) -> Verdict {
    let bad: Vec<&String> = runs.iter().flat_map(|r| &r.violations).filter(|v| !v.starts_with("measure") && !v.starts_with("incumbent")).collect();
    ensure(bad.is_empty(), || format!("{} violations, first: {}", bad.len(), bad[0]))?;
    let analyses: u64 = runs.iter().map(|r| r.analyses).sum();
    let rewrites: u64 = runs.iter().map(|r| r.rewrites).sum();
    ensure(analyses > 0, || "no analysis happened".into())?;
    Ok(format!("{} runs, {analyses} analyses, {rewrites} conflicting sets checked", runs.len()))
}

fn termination(runs: &[RunReport]) -> Verdict {
    let bad: Vec<&String> = runs.iter().flat_map(|r| &r.violations).filter(|v| v.starts_with("measure")).collect();
    ensure(bad.is_empty(), || format!("{} violations, first: {}", bad.len(), bad[0]))?;
    let worst = runs.iter().map(|r| r.conflicts).max().unwrap_or(0);
    ensure(runs.iter().all(|r| r.outcome.is_complete() && worst < CONFLICT_CEILING), || {
        format!("a run hit the conflict ceiling ({worst})")
    })?;
    let transitions: u64 = runs.iter().map(|r| r.transitions).sum();
    Ok(format!("{transitions} transitions decrease the measure; at most {worst} conflicts per run"))
}

fn strengthening(runs: &[RunReport]) -> Verdict {
    let bad: Vec<&String> = runs.iter().flat_map(|r| &r.violations).filter(|v| v.starts_with("incumbent")).collect();
    ensure(bad.is_empty(), || format!("{} violations, first: {}", bad.len(), bad[0]))?;
    let mut n = 0;
    for r in runs {
        if let SolveOutcome::Optimal { objective, .. } = r.oracle {
            n += 1;
            ensure(r.incumbents.windows(2).all(|w| w[1] < w[0]), || format!("incumbents {:?}", r.incumbents))?;
            ensure(r.incumbents.last() == Some(&objective), || {
                format!("last incumbent {:?}, optimum {objective}", r.incumbents.last())
            })?;
            ensure(r.outcome.objective() == Some(objective), || format!("reported {:?}", r.outcome))?;
        }
    }
    ensure(n > 0, || "no optimisation runs".into())?;
    Ok(format!("{n} optimisation runs end at the optimum with strictly decreasing incumbents"))
}

// -------------------------------------------------------- clause conversion

fn clause_conversion() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut n = 0;
    while n < 400 {
        let mut p = Problem::new();
        let nb = rng.gen_range(0..=4);
        let mut lits = Vec::new();
        for i in 0..nb {
            let x = p.add_var(format!("b{i}"), 0, 1).unwrap();
            lits.push(if rng.gen_bool(0.5) { Bound::lower(x, 1) } else { Bound::upper(x, 0) });
        }
        if rng.gen_bool(0.8) {
            let a = rng.gen_range(0..=10);
            let b = rng.gen_range(0..=10);
            let (lb, ub) = (a.min(b), a.max(b));
            if lb == ub {
                continue;
            }
            let z = p.add_var("z", lb, ub).unwrap();
            lits.push(if rng.gen_bool(0.5) {
                Bound::lower(z, rng.gen_range(lb + 1..=ub))
            } else {
                Bound::upper(z, rng.gen_range(lb..ub))
            });
        }
        let con = clause_to_constraint(&lits, &p).ok_or_else(|| format!("no conversion for {lits:?}"))?;
        let bx = BoxView::finite(p.vars().map(|x| p.lower(x).unwrap()).collect(), p.vars().map(|x| p.upper(x).unwrap()).collect());
        for pt in bx.points() {
            let clause = lits.iter().any(|b| b.is_satisfied_by(pt[b.var.index()]));
            ensure(con.evaluate(&pt) == clause, || format!("{con} and {lits:?} differ at {pt:?}"))?;
        }
        n += 1;
    }
    // x <= -1 or y <= 0 with y binary and x <= u becomes x <= u - uy - y
    let mut p = Problem::new();
    let x = p.add_var_with("x", None, Some(5)).unwrap();
    let y = p.add_var("y", 0, 1).unwrap();
    let con = clause_to_constraint(&[Bound::upper(x, -1), Bound::upper(y, 0)], &p);
    ensure(con == Some(c(&[(x, 1), (y, 6)], 5)), || format!("got {con:?}"))?;
    Ok(format!("{n} random clauses agree on every box point"))
}

// --------------------------------------------------------------- pigeonhole

fn pigeonhole_smoke() -> Verdict {
    let p = pigeonhole(6, 5);
    let limit = Duration::from_secs(10);
    let run = |mode| {
        let cfg = SolverConfig { time_limit: Some(limit), ..SolverConfig::with_mode(mode) };
        let t = Instant::now();
        let (out, stats) = solve_with(&p, &cfg, &mut NoObserver).unwrap();
        (out, stats, t.elapsed())
    };
    let (out, stats, t) = run(Mode::Cut);
    ensure(out == SolveOutcome::Infeasible && t < limit, || format!("cut mode: {out:?} after {t:.2?}"))?;
    let (rout, rstats, rt) = run(Mode::Resolution);
    let rdesc = match rout {
        SolveOutcome::Infeasible => "infeasible",
        SolveOutcome::TimeLimit => "time limit",
        _ => "wrong answer",
    };
    ensure(rdesc != "wrong answer", || format!("resolution mode: {rout:?}"))?;
    Ok(format!(
        "cut: infeasible, {} conflicts, {t:.2?}; resolution: {rdesc}, {} conflicts, {rt:.2?}",
        stats.conflicts, rstats.conflicts
    ))
}

#[test]
fn acceptance() {
    let mut all = true;
    let mut run = |n, name: &str, limit: Option<Duration>, f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = f();
        all &= report(n, name, t.elapsed(), limit, &v);
    };
    run(1, "worked examples", Some(Duration::from_secs(1)), &worked_examples);
    run(2, "oracle equivalence", Some(Duration::from_secs(60)), &oracle_equivalence);
    run(3, "property suites", Some(Duration::from_secs(30)), &property_suites);

    let t = Instant::now();
    let runs = instrumented_runs();
    let shared = t.elapsed();
    let _ = std::io::stdout().write_all(format!("instrumented runs for criteria 4, 5, 7: {shared:.2?}\n").as_bytes());
    run(4, "validity", None, &|| validity(&runs));
    run(5, "termination measure", None, &|| termination(&runs));
    run(6, "clause conversion", None, &clause_conversion);
    run(7, "objective strengthening", None, &|| strengthening(&runs));
    run(8, "pigeonhole", None, &pigeonhole_smoke);
    assert!(all, "some acceptance criteria failed");
}

#[test]
fn objective_offset_is_reported() {
    let mut p = Problem::new();
    let x = p.add_var("x", 2, 5).unwrap();
    let mut o = Objective::new([(x, 1)]).unwrap();
    o.offset = 10;
    p.set_objective(o).unwrap();
    let (out, _) = solve_with(&p, &SolverConfig::default(), &mut NoObserver).unwrap();
    assert_eq!(out.objective(), Some(12));
}
