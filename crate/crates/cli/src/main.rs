use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, ValueEnum};

use intsat::assignment::Trail;
use intsat::io::{oracle_solve, parse, write_problem, write_solution, OracleError};
use intsat::model::Problem;
use intsat::search::{
    solve_with, Mode, RestartPolicy, SearchObserver, SolveOutcome, SolverConfig, SolverStats, Strategy,
};

const EXIT_TIMEOUT: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliMode {
    Resolution,
    Cut,
}

/// Solve a bounded integer linear program.
#[derive(Debug, Parser)]
#[command(name = "intsat", version)]
struct Args {
    /// Instance file
    input: PathBuf,
    /// Conflict analysis
    #[arg(long, value_enum, default_value = "cut")]
    mode: CliMode,
    /// Wall-clock limit in seconds
    #[arg(long, value_name = "SECONDS")]
    time_limit: Option<f64>,
    /// `luby:<unit>`, `inout:<inner>,<outer>,<factor>` or `never`
    #[arg(long, value_parser = parse_restart)]
    restart: Option<RestartPolicy>,
    /// Decision strategies in order, e.g. `7,5,1`; the last one must be 1-4
    #[arg(long, value_parser = parse_strategies)]
    strategies: Option<Strategies>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cross-check the answer with exhaustive enumeration
    #[arg(long)]
    verify: bool,
    /// Write a trail and analysis trace to this file
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Print search statistics
    #[arg(long)]
    stats: bool,
}

#[derive(Debug, Clone)]
struct Strategies(Vec<Strategy>);

fn parse_restart(s: &str) -> Result<RestartPolicy, String> {
    if s == "never" {
        return Ok(RestartPolicy::Never);
    }
    if let Some(u) = s.strip_prefix("luby:") {
        let unit = u.parse().map_err(|_| format!("bad Luby unit `{u}`"))?;
        return Ok(RestartPolicy::Luby { unit });
    }
    if let Some(rest) = s.strip_prefix("inout:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if let [i, o, f] = parts[..] {
            let inner = i.trim().parse().map_err(|_| format!("bad inner threshold `{i}`"))?;
            let outer = o.trim().parse().map_err(|_| format!("bad outer threshold `{o}`"))?;
            let factor = f.trim().parse().map_err(|_| format!("bad factor `{f}`"))?;
            return Ok(RestartPolicy::InnerOuter { inner, outer, factor });
        }
    }
    Err(format!("expected `luby:<unit>`, `inout:<i>,<o>,<f>` or `never`, got `{s}`"))
}

fn parse_strategies(s: &str) -> Result<Strategies, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u8>()
                .ok()
                .and_then(Strategy::from_number)
                .ok_or_else(|| format!("`{t}` is not a strategy number 1-11"))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Strategies)
}

/// Prints incumbents as they come and optionally writes the trace.
struct Driver {
    out: io::Stdout,
    trace: Option<BufWriter<File>>,
    names: Vec<String>,
    format: Box<dyn Fn(i64) -> String>,
}

impl SearchObserver for Driver {
    fn tracing(&self) -> bool {
        self.trace.is_some()
    }

    fn trace(&mut self, line: &str) {
        if let Some(t) = &mut self.trace {
            let _ = writeln!(t, "{line}");
        }
    }

    fn transition(&mut self, trail: &Trail) {
        if let Some(t) = &mut self.trace {
            let _ = writeln!(t, "trail len={} level={}", trail.len(), trail.current_level());
        }
    }

    fn incumbent(&mut self, elapsed: Duration, objective: i64, _conflicts: u64) {
        let mut out = self.out.lock();
        let _ = writeln!(out, "t={:.3} obj={}", elapsed.as_secs_f64(), (self.format)(objective));
        let _ = out.flush();
    }
}

impl Driver {
    fn header(&mut self) {
        if let Some(t) = &mut self.trace {
            for (i, n) in self.names.iter().enumerate() {
                let _ = writeln!(t, "var x{i} = {n}");
            }
        }
    }
}

fn same_answer(a: &SolveOutcome, b: &SolveOutcome) -> bool {
    match (a, b) {
        (SolveOutcome::Infeasible, SolveOutcome::Infeasible) => true,
        (SolveOutcome::Feasible(_), SolveOutcome::Feasible(_)) => true,
        (SolveOutcome::Optimal { objective: x, .. }, SolveOutcome::Optimal { objective: y, .. }) => x == y,
        _ => false,
    }
}

fn without_constraint(p: &Problem, skip: usize) -> Problem {
    let mut q = Problem::new();
    for v in p.vars() {
        q.add_var_with(p.name(v), p.lower(v), p.upper(v)).unwrap();
    }
    for (i, c) in p.constraints().iter().enumerate() {
        if i != skip {
            q.add_constraint(c.clone()).unwrap();
        }
    }
    if let Some(o) = p.objective() {
        q.set_objective(o.clone()).unwrap();
    }
    q
}

/// Drops constraints one at a time while solver and oracle still disagree.
fn minimize(p: &Problem, config: &SolverConfig) -> Problem {
    let disagree = |q: &Problem| {
        let Ok(oracle) = oracle_solve(q) else { return false };
        match solve_with(q, config, &mut intsat::search::NoObserver) {
            Ok((out, _)) => {
                !same_answer(&out, &oracle) || out.solution().is_some_and(|s| !q.is_solution(&s.values))
            }
            Err(_) => false,
        }
    };
    let mut cur = p.clone();
    let mut i = 0;
    while i < cur.constraints().len() {
        let next = without_constraint(&cur, i);
        if disagree(&next) {
            cur = next;
        } else {
            i += 1;
        }
    }
    cur
}

fn print_stats(stats: &SolverStats, elapsed: Duration) {
    let mut out = io::stdout().lock();
    for (k, v) in stats.lines() {
        let _ = writeln!(out, "c {k}={v}");
    }
    let _ = writeln!(out, "c time={:.3}", elapsed.as_secs_f64());
}

fn run(args: Args) -> Result<u8, (u8, String)> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| (EXIT_INPUT, format!("cannot read {}: {e}", args.input.display())))?;
    let problem = parse(&text).map_err(|e| (EXIT_INPUT, format!("{}: {e}", args.input.display())))?;

    let mut config = SolverConfig::with_mode(match args.mode {
        CliMode::Resolution => Mode::Resolution,
        CliMode::Cut => Mode::Cut,
    });
    config.seed = args.seed;
    if let Some(r) = args.restart {
        config.restart = r;
    }
    if let Some(s) = args.strategies {
        config.strategies = s.0;
    }
    config.validate().map_err(|e| (EXIT_INPUT, e.to_string()))?;
    let cancel = Arc::new(AtomicBool::new(false));
    if let Some(secs) = args.time_limit {
        if !(secs.is_finite() && secs >= 0.0) {
            return Err((EXIT_INPUT, format!("bad time limit {secs}")));
        }
        let flag = cancel.clone();
        std::thread::spawn(move || {
            std::thread::sleep(Duration::from_secs_f64(secs));
            flag.store(true, Ordering::Relaxed);
        });
        config.cancel = Some(cancel);
    }

    let trace = match &args.trace {
        Some(path) => Some(BufWriter::new(
            File::create(path).map_err(|e| (EXIT_INPUT, format!("cannot create {}: {e}", path.display())))?,
        )),
        None => None,
    };
    let objective = problem.objective().cloned();
    let mut driver = Driver {
        out: io::stdout(),
        trace,
        names: problem.names().to_vec(),
        format: Box::new(move |v| objective.as_ref().map_or(v.to_string(), |o| o.format_value(v))),
    };
    driver.header();
    let start = std::time::Instant::now();
    let (outcome, stats) = solve_with(&problem, &config, &mut driver).map_err(|e| (EXIT_INPUT, e.to_string()))?;
    let elapsed = start.elapsed();
    if let Some(t) = &mut driver.trace {
        let _ = t.flush();
    }

    print!("{}", write_solution(&outcome, &problem));
    if args.stats {
        print_stats(&stats, elapsed);
    }
    let _ = io::stdout().flush();

    if args.verify {
        match oracle_solve(&problem) {
            Err(e @ OracleError::TooLarge(_)) => println!("c verify skipped: {e}"),
            Err(e) => return Err((EXIT_INPUT, e.to_string())),
            Ok(oracle) if !outcome.is_complete() => {
                println!("c verify skipped: no complete answer (oracle: {})", write_solution(&oracle, &problem).lines().next().unwrap_or(""));
            }
            Ok(oracle) => {
                let bad_solution = outcome.solution().is_some_and(|s| !problem.is_solution(&s.values));
                if bad_solution || !same_answer(&outcome, &oracle) {
                    let small = minimize(&problem, &config);
                    let mut err = io::stderr().lock();
                    let _ = writeln!(err, "verify mismatch");
                    let _ = writeln!(err, "solver: {}", write_solution(&outcome, &problem).lines().next().unwrap_or(""));
                    let _ = writeln!(err, "oracle: {}", write_solution(&oracle, &problem).lines().next().unwrap_or(""));
                    let _ = writeln!(err, "smallest disagreeing instance:\n{}", write_problem(&small));
                    return Ok(EXIT_VERIFY);
                }
                println!("c verify ok");
            }
        }
    }
    Ok(if matches!(outcome, SolveOutcome::TimeLimit) { EXIT_TIMEOUT } else { 0 })
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
