//! Core domain types: variables, bounds, linear constraints, objectives and
//! problems, together with the arithmetic rules (normalisation, the cut rule,
//! bound negation) that the propagation and analysis layers build on.
//!
//! Every constraint is kept in the canonical form `a_1 x_1 + ... + a_n x_n <= a_0`
//! with monomials sorted by variable, no duplicate variables, no zero
//! coefficients and a left-hand side whose coefficients have gcd 1.

use std::fmt;

use thiserror::Error;

/// Largest coefficient magnitude a stored constraint may carry.
pub const COEFF_CAP: i64 = 1 << 30;

/// Largest right-hand side magnitude accepted for input constraints.
pub const RHS_CAP: i64 = 1 << 62;

/// Largest right-hand side magnitude kept for a derived (cut) constraint.
pub const LEARNED_RHS_CAP: i64 = 1 << 30;

/// Largest magnitude of a variable bound.
pub const BOUND_CAP: i64 = 1 << 60;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("coefficient magnitude exceeds 2^30")]
    CoefficientOverflow,
    #[error("right-hand side magnitude exceeds the supported range")]
    RhsOverflow,
    #[error("bound {0} exceeds the supported range")]
    BoundOverflow(i64),
    #[error("variable `{name}` has an empty domain [{lb}, {ub}]")]
    EmptyDomain { name: String, lb: i64, ub: i64 },
    #[error("unknown variable index {0}")]
    UnknownVar(usize),
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
}

/// Dense, 0-based variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl VarId {
    #[inline]
    pub fn new(index: usize) -> Self {
        VarId(index as u32)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Index of a constraint in the solver's constraint store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintId(pub u32);

impl ConstraintId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub var: VarId,
    pub coeff: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    Lower,
    Upper,
}

impl BoundKind {
    #[inline]
    pub fn opposite(self) -> Self {
        match self {
            BoundKind::Lower => BoundKind::Upper,
            BoundKind::Upper => BoundKind::Lower,
        }
    }
}

/// A one-variable constraint: `value <= var` (lower) or `var <= value` (upper).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bound {
    pub var: VarId,
    pub kind: BoundKind,
    pub value: i64,
}

impl Bound {
    pub fn lower(var: VarId, value: i64) -> Self {
        Bound { var, kind: BoundKind::Lower, value }
    }

    pub fn upper(var: VarId, value: i64) -> Self {
        Bound { var, kind: BoundKind::Upper, value }
    }

    /// Integer negation: `not (k <= x)` is `x <= k - 1`, `not (x <= k)` is `k + 1 <= x`.
    pub fn negate(self) -> Bound {
        match self.kind {
            BoundKind::Lower => Bound::upper(self.var, self.value - 1),
            BoundKind::Upper => Bound::lower(self.var, self.value + 1),
        }
    }

    #[inline]
    pub fn is_satisfied_by(self, value: i64) -> bool {
        match self.kind {
            BoundKind::Lower => self.value <= value,
            BoundKind::Upper => value <= self.value,
        }
    }

    /// True if `self` is implied by `other` (same variable and kind, `other` at least as strong).
    pub fn is_redundant_with(self, other: Bound) -> bool {
        self.var == other.var
            && self.kind == other.kind
            && match self.kind {
                BoundKind::Lower => other.value >= self.value,
                BoundKind::Upper => other.value <= self.value,
            }
    }

    pub fn contradicts(self, other: Bound) -> bool {
        if self.var != other.var || self.kind == other.kind {
            return false;
        }
        match self.kind {
            BoundKind::Lower => self.value > other.value,
            BoundKind::Upper => other.value > self.value,
        }
    }

    /// The bound as a constraint in `<=` form.
    pub fn to_constraint(self) -> Constraint {
        match self.kind {
            BoundKind::Lower => Constraint::from_parts(
                vec![Monomial { var: self.var, coeff: -1 }],
                -self.value,
            ),
            BoundKind::Upper => {
                Constraint::from_parts(vec![Monomial { var: self.var, coeff: 1 }], self.value)
            }
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BoundKind::Lower => write!(f, "{} <= {}", self.value, self.var),
            BoundKind::Upper => write!(f, "{} <= {}", self.var, self.value),
        }
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Linear constraint `sum a_i x_i <= rhs` in canonical normalised form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    monomials: Vec<Monomial>,
    rhs: i64,
}

impl Constraint {
    /// Builds a normalised constraint from arbitrary terms. Repeated variables
    /// are merged and zero coefficients dropped.
    pub fn new(
        terms: impl IntoIterator<Item = (VarId, i64)>,
        rhs: i64,
    ) -> Result<Constraint, ModelError> {
        let terms: Vec<(VarId, i128)> = terms.into_iter().map(|(v, a)| (v, a as i128)).collect();
        let c = normalize_wide(terms, rhs as i128)?;
        if c.rhs.abs() > RHS_CAP {
            return Err(ModelError::RhsOverflow);
        }
        Ok(c)
    }

    /// Like [`Constraint::new`] but keeps the coefficients as given: terms
    /// are sorted and merged, and nothing is divided.
    pub fn verbatim(
        terms: impl IntoIterator<Item = (VarId, i64)>,
        rhs: i64,
    ) -> Result<Constraint, ModelError> {
        let terms: Vec<(VarId, i128)> = terms.into_iter().map(|(v, a)| (v, a as i128)).collect();
        merge_wide(terms, rhs as i128, false)
    }

    /// Trusted constructor for terms already sorted, merged and normalised.
    pub(crate) fn from_parts(monomials: Vec<Monomial>, rhs: i64) -> Constraint {
        debug_assert!(monomials.windows(2).all(|w| w[0].var < w[1].var));
        debug_assert!(monomials.iter().all(|m| m.coeff != 0));
        Constraint { monomials, rhs }
    }

    #[inline]
    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    #[inline]
    pub fn rhs(&self) -> i64 {
        self.rhs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.monomials.iter().map(|m| m.var)
    }

    pub fn coeff_of(&self, var: VarId) -> Option<i64> {
        self.monomials
            .binary_search_by_key(&var, |m| m.var)
            .ok()
            .map(|i| self.monomials[i].coeff)
    }

    /// `0 <= rhs` with `rhs >= 0`.
    pub fn is_tautology(&self) -> bool {
        self.monomials.is_empty() && self.rhs >= 0
    }

    /// `0 <= rhs` with `rhs < 0`: no assignment satisfies it.
    pub fn is_contradiction(&self) -> bool {
        self.monomials.is_empty() && self.rhs < 0
    }

    pub fn max_abs_coeff(&self) -> i64 {
        self.monomials.iter().map(|m| m.coeff.abs()).max().unwrap_or(0)
    }

    /// Left-hand side value under a full assignment indexed by variable.
    pub fn lhs_value(&self, values: &[i64]) -> i128 {
        self.monomials
            .iter()
            .map(|m| m.coeff as i128 * values[m.var.index()] as i128)
            .sum()
    }

    pub fn evaluate(&self, values: &[i64]) -> bool {
        self.lhs_value(values) <= self.rhs as i128
    }

    /// Renders the constraint with the given variable names.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        NamedConstraint { c: self, names }
    }
}

struct NamedConstraint<'a> {
    c: &'a Constraint,
    names: &'a [String],
}

fn write_lhs(
    f: &mut fmt::Formatter<'_>,
    monomials: &[Monomial],
    name: impl Fn(VarId) -> String,
) -> fmt::Result {
    if monomials.is_empty() {
        return write!(f, "0");
    }
    for (i, m) in monomials.iter().enumerate() {
        let sign = if m.coeff < 0 { "-" } else { "+" };
        if i == 0 {
            if m.coeff < 0 {
                write!(f, "-")?;
            }
        } else {
            write!(f, " {} ", sign)?;
        }
        let a = m.coeff.abs();
        if a == 1 {
            write!(f, "{}", name(m.var))?;
        } else {
            write!(f, "{}*{}", a, name(m.var))?;
        }
    }
    Ok(())
}

impl fmt::Display for NamedConstraint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_lhs(f, &self.c.monomials, |v| {
            self.names.get(v.index()).cloned().unwrap_or_else(|| v.to_string())
        })?;
        write!(f, " <= {}", self.c.rhs)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_lhs(f, &self.monomials, |v| v.to_string())?;
        write!(f, " <= {}", self.rhs)
    }
}

/// Normalises raw terms: sorts, merges duplicates, drops zeros, divides by
/// the gcd of the coefficients and floors the right-hand side.
///
/// An all-zero left-hand side yields the variable-free constraint `0 <= rhs`.
pub fn normalize(terms: &[(VarId, i64)], rhs: i64) -> Result<Constraint, ModelError> {
    Constraint::new(terms.iter().copied(), rhs)
}

pub(crate) fn normalize_wide(
    terms: Vec<(VarId, i128)>,
    rhs: i128,
) -> Result<Constraint, ModelError> {
    merge_wide(terms, rhs, true)
}

fn merge_wide(
    mut terms: Vec<(VarId, i128)>,
    rhs: i128,
    divide: bool,
) -> Result<Constraint, ModelError> {
    terms.sort_by_key(|t| t.0);
    let mut merged: Vec<(VarId, i128)> = Vec::with_capacity(terms.len());
    for (v, a) in terms {
        match merged.last_mut() {
            Some(last) if last.0 == v => last.1 += a,
            _ => merged.push((v, a)),
        }
    }
    merged.retain(|t| t.1 != 0);
    if merged.is_empty() {
        let rhs = i64::try_from(rhs).map_err(|_| ModelError::RhsOverflow)?;
        return Ok(Constraint { monomials: Vec::new(), rhs });
    }
    let d = if divide { merged.iter().fold(0, |g, t| gcd(g, t.1)) } else { 1 };
    let mut monomials = Vec::with_capacity(merged.len());
    for (var, a) in merged {
        let a = a / d;
        if a.abs() > COEFF_CAP as i128 {
            return Err(ModelError::CoefficientOverflow);
        }
        monomials.push(Monomial { var, coeff: a as i64 });
    }
    let rhs = i64::try_from(rhs.div_euclid(d)).map_err(|_| ModelError::RhsOverflow)?;
    Ok(Constraint { monomials, rhs })
}

/// Cut rule eliminating `var` between two constraints in which it has
/// coefficients of opposite sign, using the minimal multipliers.
///
/// Returns `None` when the signs do not oppose, when `var` is missing from
/// either premise, or when any combined coefficient or the normalised
/// right-hand side would exceed the coefficient cap.
pub fn cut(c1: &Constraint, c2: &Constraint, var: VarId) -> Option<Constraint> {
    let a = c1.coeff_of(var)? as i128;
    let b = c2.coeff_of(var)? as i128;
    if (a > 0) == (b > 0) {
        return None;
    }
    let g = gcd(a, b);
    let m1 = b.abs() / g;
    let m2 = a.abs() / g;

    let mut out: Vec<(VarId, i128)> = Vec::with_capacity(c1.len() + c2.len());
    let (mut i, mut j) = (0, 0);
    let (p, q) = (&c1.monomials, &c2.monomials);
    while i < p.len() || j < q.len() {
        let (v, coeff) = match (p.get(i), q.get(j)) {
            (Some(x), Some(y)) if x.var == y.var => {
                i += 1;
                j += 1;
                (x.var, m1 * x.coeff as i128 + m2 * y.coeff as i128)
            }
            (Some(x), Some(y)) if x.var < y.var => {
                i += 1;
                (x.var, m1 * x.coeff as i128)
            }
            (Some(x), None) => {
                i += 1;
                (x.var, m1 * x.coeff as i128)
            }
            (_, Some(y)) => {
                j += 1;
                (y.var, m2 * y.coeff as i128)
            }
            (None, None) => unreachable!(),
        };
        if coeff == 0 {
            continue;
        }
        if coeff.abs() > COEFF_CAP as i128 {
            return None;
        }
        out.push((v, coeff));
    }
    let rhs = m1 * c1.rhs as i128 + m2 * c2.rhs as i128;
    let c = normalize_wide(out, rhs).ok()?;
    if c.rhs.abs() > LEARNED_RHS_CAP {
        return None;
    }
    Some(c)
}

/// Linear objective to be minimised. `offset` is a constant added to the
/// reported value; `decimals` records a power-of-ten scaling applied at parse
/// time so that values can be reported in the original units.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Objective {
    terms: Vec<Monomial>,
    pub offset: i64,
    pub decimals: u32,
}

impl Objective {
    pub fn new(terms: impl IntoIterator<Item = (VarId, i64)>) -> Result<Objective, ModelError> {
        let mut t: Vec<(VarId, i64)> = terms.into_iter().collect();
        t.sort_by_key(|x| x.0);
        let mut merged: Vec<Monomial> = Vec::new();
        for (var, coeff) in t {
            match merged.last_mut() {
                Some(m) if m.var == var => m.coeff += coeff,
                _ => merged.push(Monomial { var, coeff }),
            }
        }
        merged.retain(|m| m.coeff != 0);
        if merged.iter().any(|m| m.coeff.abs() > COEFF_CAP) {
            return Err(ModelError::CoefficientOverflow);
        }
        Ok(Objective { terms: merged, offset: 0, decimals: 0 })
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn coeff_of(&self, var: VarId) -> i64 {
        self.terms
            .binary_search_by_key(&var, |m| m.var)
            .map(|i| self.terms[i].coeff)
            .unwrap_or(0)
    }

    /// `sum c_i x_i` without the offset.
    pub fn raw_value(&self, values: &[i64]) -> i64 {
        let v: i128 = self
            .terms
            .iter()
            .map(|m| m.coeff as i128 * values[m.var.index()] as i128)
            .sum();
        v as i64
    }

    pub fn value(&self, values: &[i64]) -> i64 {
        self.raw_value(values) + self.offset
    }

    /// The strengthening constraint `sum c_i x_i <= raw - 1`.
    pub fn improvement_constraint(&self, raw: i64) -> Result<Constraint, ModelError> {
        Constraint::new(self.terms.iter().map(|m| (m.var, m.coeff)), raw - 1)
    }

    /// Formats an objective value in the original (unscaled) units.
    pub fn format_value(&self, value: i64) -> String {
        format_scaled(value, self.decimals)
    }
}

pub(crate) fn format_scaled(value: i64, decimals: u32) -> String {
    if decimals == 0 {
        return value.to_string();
    }
    let scale = 10i128.pow(decimals);
    let v = value as i128;
    let sign = if v < 0 { "-" } else { "" };
    let a = v.abs();
    let frac = format!("{:0width$}", a % scale, width = decimals as usize);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{}{}", sign, a / scale)
    } else {
        format!("{}{}.{}", sign, a / scale, frac)
    }
}

/// Full assignment of values to variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub values: Vec<i64>,
}

impl Solution {
    pub fn value(&self, var: VarId) -> i64 {
        self.values[var.index()]
    }
}

/// An integer linear program: bounded variables, `<=` constraints and an
/// optional objective to minimise.
#[derive(Debug, Clone, Default)]
pub struct Problem {
    names: Vec<String>,
    lower: Vec<Option<i64>>,
    upper: Vec<Option<i64>>,
    constraints: Vec<Constraint>,
    objective: Option<Objective>,
}

impl Problem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: i64, ub: i64) -> Result<VarId, ModelError> {
        self.add_var_with(name, Some(lb), Some(ub))
    }

    /// Adds a variable whose initial bounds may be missing. The solver
    /// requires every variable to be bounded once root-level propagation is
    /// done; missing bounds are only useful when other constraints imply them.
    pub fn add_var_with(
        &mut self,
        name: impl Into<String>,
        lb: Option<i64>,
        ub: Option<i64>,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        for b in lb.iter().chain(ub.iter()) {
            if b.abs() > BOUND_CAP {
                return Err(ModelError::BoundOverflow(*b));
            }
        }
        if let (Some(l), Some(u)) = (lb, ub) {
            if l > u {
                return Err(ModelError::EmptyDomain { name, lb: l, ub: u });
            }
        }
        if self.names.contains(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        self.names.push(name);
        self.lower.push(lb);
        self.upper.push(ub);
        Ok(VarId::new(self.names.len() - 1))
    }

    pub fn add_constraint(&mut self, c: Constraint) -> Result<(), ModelError> {
        if let Some(m) = c.monomials().iter().find(|m| m.var.index() >= self.num_vars()) {
            return Err(ModelError::UnknownVar(m.var.index()));
        }
        self.constraints.push(c);
        Ok(())
    }

    pub fn set_objective(&mut self, objective: Objective) -> Result<(), ModelError> {
        if let Some(m) = objective.terms().iter().find(|m| m.var.index() >= self.num_vars()) {
            return Err(ModelError::UnknownVar(m.var.index()));
        }
        self.objective = Some(objective);
        Ok(())
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, var: VarId) -> &str {
        &self.names[var.index()]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(VarId::new)
    }

    #[inline]
    pub fn lower(&self, var: VarId) -> Option<i64> {
        self.lower[var.index()]
    }

    #[inline]
    pub fn upper(&self, var: VarId) -> Option<i64> {
        self.upper[var.index()]
    }

    pub fn is_binary(&self, var: VarId) -> bool {
        self.lower(var) == Some(0) && self.upper(var) == Some(1)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> Option<&Objective> {
        self.objective.as_ref()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> {
        (0..self.num_vars()).map(VarId::new)
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().all(Option::is_some) && self.upper.iter().all(Option::is_some)
    }

    /// Number of points in the initial box, if every variable is bounded.
    pub fn box_size(&self) -> Option<u128> {
        let mut size: u128 = 1;
        for v in self.vars() {
            let w = (self.upper(v)? - self.lower(v)?) as u128 + 1;
            size = size.checked_mul(w)?;
        }
        Some(size)
    }

    /// True iff `values` lies in the box and satisfies every constraint.
    pub fn is_solution(&self, values: &[i64]) -> bool {
        values.len() == self.num_vars()
            && self.vars().all(|v| {
                let x = values[v.index()];
                self.lower(v).is_none_or(|l| l <= x) && self.upper(v).is_none_or(|u| x <= u)
            })
            && self.constraints.iter().all(|c| c.evaluate(values))
    }
}
