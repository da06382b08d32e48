//! Line-oriented instance format, solution output and the brute-force oracle.
//!
//! ```text
//! # comment
//! var x int [0, 10]
//! var y int [-3, 3]
//! min: 2x - 0.5 y + 1
//! x + y >= 1
//! 3 x - 2*y = 4
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{format_scaled, Constraint, ModelError, Objective, Problem, Solution, VarId, COEFF_CAP};
use crate::search::SolveOutcome;

/// Numbers are read as fixed point with this many fraction digits.
const MAX_DECIMALS: u32 = 3;
const FIXED: i128 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: variable `{name}` is unbounded; every variable needs finite bounds")]
    Unbounded { line: usize, name: String },
    #[error("line {line}: {source}")]
    Model { line: usize, source: ModelError },
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok<'a> {
    Num(i128),
    Name(&'a str),
    Plus,
    Minus,
    Star,
    Le,
    Ge,
    Eq,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '@')
}

/// Parses a decimal into fixed point (value times 1000).
fn parse_number(s: &str, line: usize) -> Result<i128, ParseError> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(syntax(line, format!("bad number `{s}`")));
    }
    if frac.len() > MAX_DECIMALS as usize {
        return Err(syntax(line, format!("`{s}` has more than {MAX_DECIMALS} fraction digits")));
    }
    let int: i128 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| syntax(line, format!("bad number `{s}`")))?
    };
    let mut f: i128 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| syntax(line, format!("bad number `{s}`")))?
    };
    for _ in frac.len()..MAX_DECIMALS as usize {
        f *= 10;
    }
    int.checked_mul(FIXED)
        .and_then(|v| v.checked_add(f))
        .filter(|v| v.abs() <= i64::MAX as i128)
        .ok_or_else(|| syntax(line, format!("number `{s}` out of range")))
}

fn tokenize(s: &str, line: usize) -> Result<Vec<Tok<'_>>, ParseError> {
    let mut out = Vec::new();
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '<' | '>' | '=' => {
                let two = b.get(i + 1) == Some(&b'=');
                let tok = match (c, two) {
                    ('<', true) => Tok::Le,
                    ('>', true) => Tok::Ge,
                    ('=', _) => Tok::Eq,
                    _ => return Err(syntax(line, format!("expected `{c}=`"))),
                };
                out.push(tok);
                i += if two { 2 } else { 1 };
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                out.push(Tok::Num(parse_number(&s[start..i], line)?));
            }
            c if is_name_start(c) => {
                let start = i;
                while i < b.len() && is_name_char(b[i] as char) {
                    i += 1;
                }
                out.push(Tok::Name(&s[start..i]));
            }
            _ => return Err(syntax(line, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

/// Linear expression in fixed point: variable terms and a constant.
#[derive(Debug, Default)]
struct Expr {
    terms: Vec<(VarId, i128)>,
    constant: i128,
}

fn parse_expr(toks: &[Tok<'_>], vars: &HashMap<String, VarId>, line: usize) -> Result<Expr, ParseError> {
    let mut e = Expr::default();
    let mut i = 0;
    let mut first = true;
    while i < toks.len() {
        let mut sign = 1;
        match toks[i] {
            Tok::Plus => i += 1,
            Tok::Minus => {
                sign = -1;
                i += 1;
            }
            _ if first => {}
            t => return Err(syntax(line, format!("expected `+` or `-`, found {t:?}"))),
        }
        first = false;
        let coeff = match toks.get(i) {
            Some(&Tok::Num(n)) => {
                i += 1;
                if toks.get(i) == Some(&Tok::Star) {
                    i += 1;
                }
                Some(n)
            }
            _ => None,
        };
        match toks.get(i) {
            Some(&Tok::Name(name)) => {
                let var = *vars
                    .get(name)
                    .ok_or_else(|| syntax(line, format!("undeclared variable `{name}`")))?;
                e.terms.push((var, sign * coeff.unwrap_or(FIXED)));
                i += 1;
            }
            _ => match coeff {
                Some(n) => e.constant += sign * n,
                None => return Err(syntax(line, "expected a number or a variable")),
            },
        }
    }
    if first {
        return Err(syntax(line, "empty expression"));
    }
    Ok(e)
}

/// Smallest power of ten that makes every fixed-point value an integer.
fn row_decimals(values: impl Iterator<Item = i128>) -> u32 {
    let mut d = 0;
    for v in values {
        while d < MAX_DECIMALS && v % 10i128.pow(MAX_DECIMALS - d) != 0 {
            d += 1;
        }
    }
    d
}

fn to_i64(v: i128, line: usize) -> Result<i64, ParseError> {
    i64::try_from(v).map_err(|_| ParseError::Model { line, source: ModelError::RhsOverflow })
}

fn parse_var(rest: &str, line: usize) -> Result<(String, Option<i64>, Option<i64>), ParseError> {
    let bad = || syntax(line, "expected `var <name> int [<lb>, <ub>]`");
    let (name, rest) = rest.trim().split_once(char::is_whitespace).ok_or_else(bad)?;
    let rest = rest.trim().strip_prefix("int").ok_or_else(bad)?.trim();
    let inner = rest.strip_prefix('[').and_then(|r| r.strip_suffix(']')).ok_or_else(bad)?;
    let (lb, ub) = inner.split_once(',').ok_or_else(bad)?;
    if !name.starts_with(is_name_start) || !name.chars().all(is_name_char) {
        return Err(syntax(line, format!("bad variable name `{name}`")));
    }
    let bound = |s: &str| -> Result<Option<i64>, ParseError> {
        let s = s.trim();
        if matches!(s, "inf" | "+inf" | "-inf") {
            return Ok(None);
        }
        s.parse::<i64>().map(Some).map_err(|_| syntax(line, format!("bad integer bound `{s}`")))
    };
    Ok((name.to_string(), bound(lb)?, bound(ub)?))
}

/// Parses an instance. `>=` rows are negated, `=` rows split in two, and
/// each row is scaled by the least power of ten that clears its decimals.
pub fn parse(text: &str) -> Result<Problem, ParseError> {
    let mut p = Problem::new();
    let mut vars: HashMap<String, VarId> = HashMap::new();
    let mut have_objective = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix("var ") {
            let (name, lb, ub) = parse_var(rest, line)?;
            if lb.is_none() || ub.is_none() {
                return Err(ParseError::Unbounded { line, name });
            }
            let v = p.add_var_with(name.clone(), lb, ub).map_err(|source| ParseError::Model { line, source })?;
            vars.insert(name, v);
            continue;
        }
        if let Some(rest) = s.strip_prefix("min:") {
            if have_objective {
                return Err(syntax(line, "more than one objective"));
            }
            have_objective = true;
            let e = parse_expr(&tokenize(rest, line)?, &vars, line)?;
            let d = row_decimals(e.terms.iter().map(|t| t.1).chain([e.constant]));
            let div = 10i128.pow(MAX_DECIMALS - d);
            let mut terms = Vec::with_capacity(e.terms.len());
            for (v, a) in e.terms {
                terms.push((v, to_i64(a / div, line)?));
            }
            let mut obj = Objective::new(terms).map_err(|source| ParseError::Model { line, source })?;
            obj.offset = to_i64(e.constant / div, line)?;
            obj.decimals = d;
            p.set_objective(obj).map_err(|source| ParseError::Model { line, source })?;
            continue;
        }
        if s.starts_with("max:") {
            return Err(syntax(line, "only minimisation is supported; negate the objective"));
        }

        let toks = tokenize(s, line)?;
        let rel = toks
            .iter()
            .position(|t| matches!(t, Tok::Le | Tok::Ge | Tok::Eq))
            .ok_or_else(|| syntax(line, "expected `<=`, `>=` or `=`"))?;
        let lhs = parse_expr(&toks[..rel], &vars, line)?;
        let rhs = parse_expr(&toks[rel + 1..], &vars, line)?;
        if !rhs.terms.is_empty() {
            return Err(syntax(line, "the right-hand side must be a number"));
        }
        let bound = rhs.constant - lhs.constant;
        let d = row_decimals(lhs.terms.iter().map(|t| t.1).chain([bound]));
        let div = 10i128.pow(MAX_DECIMALS - d);
        let mut terms = Vec::with_capacity(lhs.terms.len());
        for &(v, a) in &lhs.terms {
            let a = a / div;
            if a.abs() > COEFF_CAP as i128 {
                return Err(ParseError::Model { line, source: ModelError::CoefficientOverflow });
            }
            terms.push((v, a as i64));
        }
        let b = to_i64(bound / div, line)?;
        let neg: Vec<(VarId, i64)> = terms.iter().map(|&(v, a)| (v, -a)).collect();
        let rows = match toks[rel] {
            Tok::Le => vec![(terms, b)],
            Tok::Ge => vec![(neg, -b)],
            _ => vec![(terms, b), (neg, -b)],
        };
        for (t, b) in rows {
            let c = Constraint::new(t, b).map_err(|source| ParseError::Model { line, source })?;
            p.add_constraint(c).map_err(|source| ParseError::Model { line, source })?;
        }
    }
    Ok(p)
}

/// Writes `problem` in the instance format. Parsing the result gives a
/// problem with the same solutions and objective.
pub fn write_problem(problem: &Problem) -> String {
    let mut out = String::new();
    let bound = |b: Option<i64>, inf: &str| b.map_or(inf.to_string(), |v| v.to_string());
    for v in problem.vars() {
        let _ = writeln!(
            out,
            "var {} int [{}, {}]",
            problem.name(v),
            bound(problem.lower(v), "-inf"),
            bound(problem.upper(v), "inf")
        );
    }
    let term_list = |out: &mut String, terms: &mut dyn Iterator<Item = (VarId, String)>| {
        let mut any = false;
        for (v, a) in terms {
            let (sign, mag) = match a.strip_prefix('-') {
                Some(m) => ("-", m.to_string()),
                None => ("+", a),
            };
            if any {
                let _ = write!(out, " {sign} {mag} {}", problem.name(v));
            } else {
                let s = if sign == "-" { "-" } else { "" };
                let _ = write!(out, "{s}{mag} {}", problem.name(v));
            }
            any = true;
        }
        any
    };
    if let Some(o) = problem.objective() {
        out.push_str("min: ");
        let any = term_list(&mut out, &mut o.terms().iter().map(|m| (m.var, format_scaled(m.coeff, o.decimals))));
        if o.offset != 0 || !any {
            let off = format_scaled(o.offset, o.decimals);
            match (any, off.strip_prefix('-')) {
                (false, _) => out.push_str(&off),
                (true, Some(m)) => {
                    let _ = write!(out, " - {m}");
                }
                (true, None) => {
                    let _ = write!(out, " + {off}");
                }
            }
        }
        out.push('\n');
    }
    for c in problem.constraints() {
        if !term_list(&mut out, &mut c.monomials().iter().map(|m| (m.var, m.coeff.to_string()))) {
            out.push('0');
        }
        let _ = writeln!(out, " <= {}", c.rhs());
    }
    out
}

/// Status line followed by `name = value` lines for any solution.
pub fn write_solution(outcome: &SolveOutcome, problem: &Problem) -> String {
    let fmt_obj = |v: i64| problem.objective().map_or(v.to_string(), |o| o.format_value(v));
    let (status, solution) = match outcome {
        SolveOutcome::Infeasible => ("INFEASIBLE".to_string(), None),
        SolveOutcome::TimeLimit => ("UNKNOWN".to_string(), None),
        SolveOutcome::Feasible(s) => ("FEASIBLE".to_string(), Some(s)),
        SolveOutcome::Optimal { solution, objective } => (format!("OPTIMAL {}", fmt_obj(*objective)), Some(solution)),
        SolveOutcome::Bounded { solution, objective } => (format!("FEASIBLE {}", fmt_obj(*objective)), Some(solution)),
    };
    let mut out = status;
    out.push('\n');
    if let Some(s) = solution {
        for v in problem.vars() {
            let _ = writeln!(out, "{} = {}", problem.name(v), s.value(v));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("search space of {0} points exceeds the oracle limit of {ORACLE_LIMIT}")]
    TooLarge(u128),
    #[error("variable `{0}` is unbounded")]
    Unbounded(String),
}

/// Largest box the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 10_000_000;

/// Points per work unit.
const CHUNK: u64 = 1 << 14;

struct Box_ {
    lower: Vec<i64>,
    width: Vec<u64>,
    size: u64,
}

impl Box_ {
    fn of(problem: &Problem) -> Result<Box_, OracleError> {
        let mut lower = Vec::new();
        let mut width = Vec::new();
        for v in problem.vars() {
            match (problem.lower(v), problem.upper(v)) {
                (Some(l), Some(u)) => {
                    lower.push(l);
                    width.push((u - l) as u64 + 1);
                }
                _ => return Err(OracleError::Unbounded(problem.name(v).to_string())),
            }
        }
        let size = problem.box_size().unwrap_or(u128::MAX);
        if size > ORACLE_LIMIT {
            return Err(OracleError::TooLarge(size));
        }
        Ok(Box_ { lower, width, size: size as u64 })
    }

    /// The point with mixed-radix index `i`, last variable fastest.
    fn point(&self, mut i: u64, out: &mut [i64]) {
        for k in (0..self.width.len()).rev() {
            out[k] = self.lower[k] + (i % self.width[k]) as i64;
            i /= self.width[k];
        }
    }

    fn advance(&self, p: &mut [i64]) {
        for k in (0..self.width.len()).rev() {
            if p[k] < self.lower[k] + self.width[k] as i64 - 1 {
                p[k] += 1;
                return;
            }
            p[k] = self.lower[k];
        }
    }
}

/// Best point of one chunk: `(objective, index)`, lowest index on ties.
fn scan_chunk(problem: &Problem, bx: &Box_, chunk: u64, first_only: bool) -> Option<(i64, u64)> {
    let start = chunk * CHUNK;
    let end = (start + CHUNK).min(bx.size);
    let mut p = vec![0; bx.width.len()];
    bx.point(start, &mut p);
    let mut best: Option<(i64, u64)> = None;
    for i in start..end {
        if problem.constraints().iter().all(|c| c.evaluate(&p)) {
            let obj = problem.objective().map_or(0, |o| o.raw_value(&p));
            if best.is_none_or(|b| obj < b.0) {
                best = Some((obj, i));
                if first_only {
                    return best;
                }
            }
        }
        bx.advance(&mut p);
    }
    best
}

fn outcome(problem: &Problem, bx: &Box_, best: Option<(i64, u64)>) -> SolveOutcome {
    match best {
        None => SolveOutcome::Infeasible,
        Some((_, i)) => {
            let mut values = vec![0; bx.width.len()];
            bx.point(i, &mut values);
            match problem.objective() {
                None => SolveOutcome::Feasible(Solution { values }),
                Some(o) => SolveOutcome::Optimal { objective: o.value(&values), solution: Solution { values } },
            }
        }
    }
}

fn num_chunks(bx: &Box_) -> u64 {
    bx.size.div_ceil(CHUNK)
}

/// Exhaustive enumeration on one thread. Returns the first solution in
/// lexicographic order, or the first optimal one.
pub fn oracle_solve_sequential(problem: &Problem) -> Result<SolveOutcome, OracleError> {
    let bx = Box_::of(problem)?;
    let first_only = problem.objective().is_none();
    let mut best: Option<(i64, u64)> = None;
    for k in 0..num_chunks(&bx) {
        if let Some(b) = scan_chunk(problem, &bx, k, first_only) {
            if best.is_none_or(|x| b.0 < x.0) {
                best = Some(b);
            }
            if first_only {
                break;
            }
        }
    }
    Ok(outcome(problem, &bx, best))
}

/// Same answer as [`oracle_solve_sequential`], with chunks scanned on the
/// rayon pool.
#[cfg(feature = "parallel")]
pub fn oracle_solve_parallel(problem: &Problem) -> Result<SolveOutcome, OracleError> {
    use rayon::prelude::*;
    let bx = Box_::of(problem)?;
    let first_only = problem.objective().is_none();
    let chunks = (0..num_chunks(&bx)).into_par_iter();
    let best = if first_only {
        chunks.find_map_first(|k| scan_chunk(problem, &bx, k, true))
    } else {
        chunks.filter_map(|k| scan_chunk(problem, &bx, k, false)).min()
    };
    Ok(outcome(problem, &bx, best))
}

#[cfg(not(feature = "parallel"))]
pub fn oracle_solve_parallel(problem: &Problem) -> Result<SolveOutcome, OracleError> {
    oracle_solve_sequential(problem)
}

/// The oracle: parallel when the `parallel` feature is on.
pub fn oracle_solve(problem: &Problem) -> Result<SolveOutcome, OracleError> {
    oracle_solve_parallel(problem)
}

/// Every solution of `problem`, in lexicographic order.
pub fn enumerate_solutions(problem: &Problem) -> Result<Vec<Vec<i64>>, OracleError> {
    let bx = Box_::of(problem)?;
    let mut out = Vec::new();
    let mut p = vec![0; bx.width.len()];
    bx.point(0, &mut p);
    for _ in 0..bx.size {
        if problem.constraints().iter().all(|c| c.evaluate(&p)) {
            out.push(p.clone());
        }
        bx.advance(&mut p);
    }
    Ok(out)
}
