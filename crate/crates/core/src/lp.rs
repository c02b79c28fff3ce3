//! Linear-programming feasibility checks for polyhedral cones.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use nalgebra::{DMatrix, DVector};

/// Tolerance used to decide that a region has an empty interior.
pub const LP_TOL: f64 = 1e-9;

/// Free variables as `x = x+ - x-` with both parts non-negative; minilp does
/// not handle unbounded variable ranges reliably.
fn free_vars(p: &mut Problem, n: usize, obj: &[f64]) -> Vec<(Variable, Variable)> {
    (0..n)
        .map(|i| {
            let c = obj.get(i).copied().unwrap_or(0.0);
            (p.add_var(c, (0.0, f64::INFINITY)), p.add_var(-c, (0.0, f64::INFINITY)))
        })
        .collect()
}

fn add_rows(
    p: &mut Problem,
    vars: &[(Variable, Variable)],
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    op: ComparisonOp,
    slack: Option<Variable>,
) {
    for i in 0..a.nrows() {
        let norm = a.row(i).norm();
        if norm == 0.0 {
            continue;
        }
        let mut terms: Vec<(Variable, f64)> = Vec::new();
        for (j, (pos, neg)) in vars.iter().enumerate() {
            let c = a[(i, j)] / norm;
            if c != 0.0 {
                terms.push((*pos, c));
                terms.push((*neg, -c));
            }
        }
        let mut rhs = b[i] / norm;
        if let Some(t) = slack {
            // a x - (1 - t') >= b  <=>  a x + t' >= b + 1
            terms.push((t, 1.0));
            rhs += 1.0;
        }
        p.add_constraint(terms.as_slice(), op, rhs);
    }
}

/// Largest `t <= 1` such that some `x` satisfies `a x - t >= b` (rows scaled to
/// unit norm) and `e x = f`. `None` when the equalities alone are infeasible.
pub fn interior_margin(a: &DMatrix<f64>, b: &DVector<f64>, e: &DMatrix<f64>, f: &DVector<f64>) -> Option<f64> {
    let n = a.ncols().max(e.ncols());
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars = free_vars(&mut p, n, &[]);
    // t is shifted by one so it stays non-negative: t' = 1 - t in [0, inf)
    let t = p.add_var(-1.0, (0.0, f64::INFINITY));
    add_rows(&mut p, &vars, a, b, ComparisonOp::Ge, Some(t));
    add_rows(&mut p, &vars, e, f, ComparisonOp::Eq, None);
    match p.solve() {
        Ok(sol) => Some(1.0 + sol.objective()),
        Err(_) => None,
    }
}

/// True when `{x : a x > b, e x = f}` has a (relative) interior point.
pub fn has_interior(a: &DMatrix<f64>, b: &DVector<f64>, e: &DMatrix<f64>, f: &DVector<f64>) -> bool {
    if a.nrows() == 0 {
        return interior_margin(a, b, e, f).is_some();
    }
    matches!(interior_margin(a, b, e, f), Some(t) if t > LP_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpMin {
    Infeasible,
    Unbounded,
    Value(f64),
}

/// Minimises `c . x` over `{x : a x >= b, e x = f}`.
pub fn minimize(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, e: &DMatrix<f64>, f: &DVector<f64>) -> LpMin {
    let n = c.len();
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars = free_vars(&mut p, n, c.as_slice());
    add_rows(&mut p, &vars, a, b, ComparisonOp::Ge, None);
    add_rows(&mut p, &vars, e, f, ComparisonOp::Eq, None);
    match p.solve() {
        Ok(sol) => LpMin::Value(sol.objective()),
        Err(minilp::Error::Unbounded) => LpMin::Unbounded,
        Err(minilp::Error::Infeasible) => LpMin::Infeasible,
    }
}

/// Whether the closed cone `{a_in x >= b_in}` lies inside `{a_out x >= b_out}`.
pub fn cone_contained(a_in: &DMatrix<f64>, b_in: &DVector<f64>, a_out: &DMatrix<f64>, b_out: &DVector<f64>) -> bool {
    let e = DMatrix::zeros(0, a_in.ncols());
    let f = DVector::zeros(0);
    (0..a_out.nrows()).all(|r| {
        let row = a_out.row(r).transpose();
        let norm = row.norm();
        match minimize(&row, a_in, b_in, &e, &f) {
            LpMin::Value(v) => (v - b_out[r]) / norm >= -LP_TOL,
            LpMin::Infeasible => true,
            LpMin::Unbounded => false,
        }
    })
}

/// Whether two open cones have no interior point in common.
pub fn cones_disjoint(a1: &DMatrix<f64>, b1: &DVector<f64>, a2: &DMatrix<f64>, b2: &DVector<f64>) -> bool {
    let n = a1.ncols();
    let a = crate::linalg::vstack(&[a1, a2], n);
    let b = crate::linalg::vstack_vec(&[b1, b2]);
    let e = DMatrix::zeros(0, n);
    let f = DVector::zeros(0);
    !has_interior(&a, &b, &e, &f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn interior_of_simple_cone() {
        let a = m(2, 2, &[1.0, -1.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![0.0, 0.0]);
        let e = DMatrix::zeros(0, 2);
        let f = DVector::zeros(0);
        assert!(has_interior(&a, &b, &e, &f));
    }

    #[test]
    fn contradictory_half_spaces() {
        let a = m(2, 1, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let e = DMatrix::zeros(0, 1);
        let f = DVector::zeros(0);
        assert!(!has_interior(&a, &b, &e, &f));
    }

    #[test]
    fn equality_pins_order_boundary() {
        // a = b & a > b
        let a = m(1, 2, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![0.0]);
        let e = m(1, 2, &[1.0, -1.0]);
        let f = DVector::from_vec(vec![0.0]);
        assert!(!has_interior(&a, &b, &e, &f));
    }

    #[test]
    fn one_dimensional_nesting() {
        let a = m(1, 1, &[1.0]);
        let zero = DVector::from_vec(vec![0.0]);
        let one = DVector::from_vec(vec![1.0]);
        assert!(cone_contained(&a, &one, &a, &zero));
        assert!(!cone_contained(&a, &zero, &a, &one));
    }

    #[test]
    fn opposite_half_spaces_are_disjoint() {
        let a = m(1, 2, &[1.0, -1.0]);
        let na = m(1, 2, &[-1.0, 1.0]);
        let z = DVector::from_vec(vec![0.0]);
        assert!(cones_disjoint(&a, &z, &na, &z));
        assert!(!cones_disjoint(&a, &z, &a, &z));
    }
}
