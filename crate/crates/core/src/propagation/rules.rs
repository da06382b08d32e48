//! Bound reasoning on a single constraint, evaluated against any view of
//! current bounds. These are the reference definitions: the engine's
//! incremental machinery must agree with them.

use crate::assignment::BoundsView;
use crate::model::{Bound, Constraint, VarId};

/// `min(a * x)` under the view: `a * lb` for `a > 0`, `a * ub` for `a < 0`.
/// `None` stands for minus infinity (the relevant bound is missing).
#[inline]
pub fn min_contribution<V: BoundsView + ?Sized>(a: i64, var: VarId, view: &V) -> Option<i128> {
    debug_assert!(a != 0);
    view.min_side_entry(var, a).map(|(v, _)| a as i128 * v as i128)
}

/// Heights of the bounds realising the minimum of every monomial, if all exist.
pub fn min_side_heights<V: BoundsView + ?Sized>(c: &Constraint, view: &V) -> Option<Vec<usize>> {
    c.monomials()
        .iter()
        .map(|m| view.min_side_entry(m.var, m.coeff).map(|e| e.1))
        .collect()
}

/// Sum of the minima of all monomials, `None` if some minimum is unbounded.
pub fn min_lhs<V: BoundsView + ?Sized>(c: &Constraint, view: &V) -> Option<i128> {
    c.monomials().iter().map(|m| min_contribution(m.coeff, m.var, view)).sum()
}

/// `c` is false under the view iff the minimum of its left-hand side exceeds
/// the right-hand side. Returns the heights of the falsifying bounds.
pub fn is_conflict<V: BoundsView + ?Sized>(c: &Constraint, view: &V) -> Option<Vec<usize>> {
    let mut sum: i128 = 0;
    let mut heights = Vec::with_capacity(c.len());
    for m in c.monomials() {
        let (v, h) = view.min_side_entry(m.var, m.coeff)?;
        sum += m.coeff as i128 * v as i128;
        heights.push(h);
    }
    (sum > c.rhs() as i128).then_some(heights)
}

/// The bound `c` implies on `var` given the minima of the other monomials:
/// `x <= floor(e)` for a positive coefficient, `ceil(e) <= x` for a negative
/// one, with `e = (a_0 - others) / a`.
fn implied_bound(var: VarId, a: i64, rhs: i64, others: i128) -> Option<Bound> {
    let r = rhs as i128 - others;
    let a = a as i128;
    let value = if a > 0 { r.div_euclid(a) } else { -r.div_euclid(-a) };
    let value = i64::try_from(value).ok()?;
    Some(if a > 0 { Bound::upper(var, value) } else { Bound::lower(var, value) })
}

/// Every fresh bound `c` propagates under the view, in monomial order, each
/// with the heights of the bounds of the other monomials it relies on.
pub fn propagations<V: BoundsView + ?Sized>(c: &Constraint, view: &V) -> Vec<(Bound, Vec<usize>)> {
    let mins: Vec<Option<(i128, usize)>> = c
        .monomials()
        .iter()
        .map(|m| view.min_side_entry(m.var, m.coeff).map(|(v, h)| (m.coeff as i128 * v as i128, h)))
        .collect();
    let infinite = mins.iter().filter(|m| m.is_none()).count();
    if infinite > 1 {
        return Vec::new();
    }
    let finite: i128 = mins.iter().flatten().map(|m| m.0).sum();
    let mut out = Vec::new();
    for (j, m) in c.monomials().iter().enumerate() {
        let others = match (mins[j], infinite) {
            (Some((own, _)), 0) => finite - own,
            (None, 1) => finite,
            _ => continue,
        };
        let Some(b) = implied_bound(m.var, m.coeff, c.rhs(), others) else { continue };
        if view.is_fresh(b) {
            let reason = mins
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, e)| e.expect("finite minimum").1)
                .collect();
            out.push((b, reason));
        }
    }
    out
}

/// Exact propagation indicator
/// `-a_0 + max_j |a_j| (ub_j - lb_j) + sum_i min(a_i x_i)`, defined when
/// every variable of `c` has both bounds.
pub fn filter_value<V: BoundsView + ?Sized>(c: &Constraint, view: &V) -> Option<i128> {
    let mut sum: i128 = 0;
    let mut widest: i128 = 0;
    for m in c.monomials() {
        let lb = view.lower(m.var)? as i128;
        let ub = view.upper(m.var)? as i128;
        let a = m.coeff as i128;
        sum += if a > 0 { a * lb } else { a * ub };
        widest = widest.max(a.abs() * (ub - lb));
    }
    Some(sum + widest - c.rhs() as i128)
}

/// True iff `c` is not false and propagates at least one fresh bound.
pub fn would_propagate<V: BoundsView + ?Sized>(c: &Constraint, view: &V) -> bool {
    match filter_value(c, view) {
        Some(f) => f > 0 && is_conflict(c, view).is_none(),
        None => !propagations(c, view).is_empty(),
    }
}
