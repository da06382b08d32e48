use crate::model::{normalize_wide, Bound, BoundKind, Constraint, Problem, VarId, LEARNED_RHS_CAP};

/// Converts the disjunction of `lits` into one linear constraint over the
/// initial box of `problem`.
///
/// Applies when every literal is on a binary variable (`1 <= x` or `y <= 0`)
/// except at most one literal on a general variable `z`:
///
/// * `k <= z` becomes `k - (k - lb)(sum x + sum (1 - y)) <= z`
/// * `z <= k` becomes `z <= k + (ub - k)(sum x + sum (1 - y))`
/// * with no general literal: `sum x + sum (1 - y) >= 1`
///
/// Returns `None` for any other shape, for a literal that is trivially true
/// or false over the box, or when the result leaves the representable range.
pub fn clause_to_constraint(lits: &[Bound], problem: &Problem) -> Option<Constraint> {
    let mut xs: Vec<VarId> = Vec::new();
    let mut ys: Vec<VarId> = Vec::new();
    let mut general: Option<Bound> = None;
    let mut vars: Vec<VarId> = lits.iter().map(|b| b.var).collect();
    vars.sort();
    if vars.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    for &b in lits {
        if problem.is_binary(b.var) {
            match (b.kind, b.value) {
                (BoundKind::Lower, 1) => xs.push(b.var),
                (BoundKind::Upper, 0) => ys.push(b.var),
                _ => return None,
            }
        } else if general.replace(b).is_some() {
            return None;
        }
    }
    let n = ys.len() as i128;
    let mut terms: Vec<(VarId, i128)> = Vec::with_capacity(lits.len());
    let rhs: i128 = match general {
        None => {
            terms.extend(xs.iter().map(|&x| (x, -1)));
            terms.extend(ys.iter().map(|&y| (y, 1)));
            n - 1
        }
        Some(g) => {
            let lb = problem.lower(g.var).map(i128::from);
            let ub = problem.upper(g.var).map(i128::from);
            let k = g.value as i128;
            match g.kind {
                BoundKind::Lower => {
                    let lb = lb?;
                    if !(lb < k && ub.is_none_or(|u| k <= u)) {
                        return None;
                    }
                    let w = k - lb;
                    terms.push((g.var, -1));
                    terms.extend(xs.iter().map(|&x| (x, -w)));
                    terms.extend(ys.iter().map(|&y| (y, w)));
                    -k + w * n
                }
                BoundKind::Upper => {
                    let ub = ub?;
                    if !(lb.is_none_or(|l| l <= k) && k < ub) {
                        return None;
                    }
                    let w = ub - k;
                    terms.push((g.var, 1));
                    terms.extend(xs.iter().map(|&x| (x, -w)));
                    terms.extend(ys.iter().map(|&y| (y, w)));
                    k + w * n
                }
            }
        }
    };
    let c = normalize_wide(terms, rhs).ok()?;
    (c.rhs().abs() <= LEARNED_RHS_CAP).then_some(c)
}
