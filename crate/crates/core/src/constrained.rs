//! Change of coordinates that separates equality-restricted, order-restricted
//! and free parameters, and the boundary point default priors are centred on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hypothesis::ConstraintMatrices;
use crate::linalg;

/// Order constraints rewritten on the free coordinates after fixing the
/// equality-restricted ones, used when `[RE; RO]` is rank deficient.
#[derive(Debug, Clone)]
pub struct ReducedOrder {
    pub ro_tilde: DMatrix<f64>,
    pub r_o_tilde: DVector<f64>,
}

/// `η = T θ` where the first `n_equalities` coordinates are `RE θ`.
///
/// With full-rank constraints `T = [RE; RO; D]` and the order region is
/// `η_O > rO` on the first free coordinates. Otherwise `T = [RE; D̃]` with `D̃`
/// spanning the complement of `RE`'s row space and the order region becomes
/// `RÕ η_free > rÕ`. Either way [`Transformation::region`] describes the
/// order region on the free coordinates.
#[derive(Debug, Clone)]
pub struct Transformation {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub n_equalities: usize,
    /// Completion rows (`D`, or `D̃` in the reduced case).
    pub d: DMatrix<f64>,
    pub reduced: Option<ReducedOrder>,
    region_a: DMatrix<f64>,
    region_b: DVector<f64>,
}

impl Transformation {
    pub fn n_params(&self) -> usize {
        self.t.ncols()
    }

    pub fn n_free(&self) -> usize {
        self.n_params() - self.n_equalities
    }

    /// Rows of `T` defining the equality-restricted coordinates.
    pub fn equality_rows(&self) -> DMatrix<f64> {
        self.t.rows(0, self.n_equalities).into_owned()
    }

    /// Rows of `T` defining the free coordinates.
    pub fn free_rows(&self) -> DMatrix<f64> {
        self.t.rows(self.n_equalities, self.n_free()).into_owned()
    }

    /// Order region `A η_free > b` on the free coordinates.
    pub fn region(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.region_a, &self.region_b)
    }

    pub fn transform(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.t * theta
    }

    pub fn invert(&self, eta: &DVector<f64>) -> DVector<f64> {
        &self.t_inv * eta
    }

    /// Membership test in transformed coordinates; equalities within `tol`.
    pub fn contains(&self, eta: &DVector<f64>, r_e: &DVector<f64>, tol: f64) -> bool {
        let q = self.n_equalities;
        let eq_ok = (0..q).all(|i| (eta[i] - r_e[i]).abs() <= tol);
        let free = eta.rows(q, self.n_free());
        eq_ok && (&self.region_a * free - &self.region_b).iter().all(|v| *v > 0.0)
    }
}

fn check_equalities(cm: &ConstraintMatrices) -> Result<()> {
    let q_e = cm.n_equalities();
    if q_e == 0 {
        return Ok(());
    }
    let rank = linalg::rank(&cm.re);
    if rank == q_e {
        return Ok(());
    }
    let p = cm.n_params();
    let mut aug = DMatrix::zeros(q_e, p + 1);
    aug.columns_mut(0, p).copy_from(&cm.re);
    aug.set_column(p, &cm.r_e);
    if linalg::rank(&aug) > rank {
        Err(Error::Infeasible(format!("equality constraints in `{}` are inconsistent", cm.source)))
    } else {
        Err(Error::RedundantEqualities(cm.source.clone()))
    }
}

pub fn build_transformation(cm: &ConstraintMatrices) -> Result<Transformation> {
    check_equalities(cm)?;
    let p = cm.n_params();
    let q_e = cm.n_equalities();
    let q_o = cm.n_orders();
    let (stacked, _) = cm.stacked();

    if linalg::rank(&stacked) == q_e + q_o {
        let d = linalg::complement_rows(&stacked, p);
        let t = linalg::vstack(&[&stacked, &d], p);
        let t_inv = t.clone().try_inverse().ok_or_else(|| Error::numerical("constraint transformation is singular"))?;
        let mut region_a = DMatrix::zeros(q_o, p - q_e);
        region_a.view_mut((0, 0), (q_o, q_o)).fill_with_identity();
        return Ok(Transformation {
            t,
            t_inv,
            n_equalities: q_e,
            d,
            reduced: None,
            region_a,
            region_b: cm.r_o.clone(),
        });
    }

    // rank-deficient order rows: fix θ^E and express RO θ on the free part
    let re_pinv = linalg::pinv(&cm.re);
    let projector = DMatrix::identity(p, p) - &re_pinv * &cm.re;
    let d_tilde = linalg::select_rows(&projector, &linalg::independent_rows(&projector));
    let d_pinv = linalg::pinv(&d_tilde);
    let ro_full = &cm.ro * &d_pinv;
    let ro_rhs = &cm.r_o - &cm.ro * &re_pinv * &cm.r_e;

    // rows fixed by the equalities are either always or never satisfied
    let mut keep = Vec::new();
    for i in 0..q_o {
        let norm = ro_full.row(i).norm();
        if norm > linalg::RANK_TOL * cm.ro.row(i).norm() {
            keep.push(i);
        } else if ro_rhs[i] >= 0.0 {
            return Err(Error::Infeasible(format!("`{}` admits no parameter values", cm.source)));
        }
    }
    let ro_tilde = linalg::select_rows(&ro_full, &keep);
    let r_o_tilde = linalg::subvector(&ro_rhs, &keep);

    let t = linalg::vstack(&[&cm.re, &d_tilde], p);
    let t_inv = t.clone().try_inverse().ok_or_else(|| Error::numerical("constraint transformation is singular"))?;
    Ok(Transformation {
        t,
        t_inv,
        n_equalities: q_e,
        d: d_tilde,
        reduced: Some(ReducedOrder { ro_tilde: ro_tilde.clone(), r_o_tilde: r_o_tilde.clone() }),
        region_a: ro_tilde,
        region_b: r_o_tilde,
    })
}

/// Point on the boundary of a hypothesis where default priors are centred.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub theta0: DVector<f64>,
    /// False when `[RE; RO] θ = [rE; rO]` has no solution; `theta0` then
    /// satisfies the equalities and fits the order bounds by least squares.
    pub consistent: bool,
}

pub fn boundary_point(cm: &ConstraintMatrices) -> BoundaryPoint {
    let (s, r) = cm.stacked();
    if s.nrows() == 0 {
        return BoundaryPoint { theta0: DVector::zeros(cm.n_params()), consistent: true };
    }
    let theta0 = linalg::pinv(&s) * &r;
    let resid = (&s * &theta0 - &r).amax();
    let scale = r.amax().max(1.0);
    if resid <= 1e-10 * scale {
        return BoundaryPoint { theta0, consistent: true };
    }
    let re_pinv = linalg::pinv(&cm.re);
    let base = &re_pinv * &cm.r_e;
    let null = DMatrix::identity(cm.n_params(), cm.n_params()) - &re_pinv * &cm.re;
    let ro_null = &cm.ro * &null;
    let shift = &null * linalg::pinv(&ro_null) * (&cm.r_o - &cm.ro * &base);
    BoundaryPoint { theta0: base + shift, consistent: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{parse_one, ParameterSpace};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cm(names: &[&str], h: &str) -> ConstraintMatrices {
        parse_one(h, &ParameterSpace::new(names.iter().copied()).unwrap()).unwrap()
    }

    fn membership_agrees(c: &ConstraintMatrices, n: usize, eq_tol: f64) {
        let tr = build_transformation(c).unwrap();
        let bp = boundary_point(c);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = c.n_params();
        let mut inside = 0;
        for _ in 0..n {
            // sample around the boundary; project onto the equalities so
            // equality-satisfying points are common
            let mut theta = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0)) + &bp.theta0;
            if c.n_equalities() > 0 {
                let eta = tr.transform(&theta);
                let mut fixed = eta.clone();
                fixed.rows_mut(0, c.n_equalities()).copy_from(&c.r_e);
                theta = tr.invert(&fixed);
            }
            let direct = c.contains(&theta, eq_tol);
            let eta = tr.transform(&theta);
            assert_eq!(direct, tr.contains(&eta, &c.r_e, eq_tol), "{theta}");
            inside += usize::from(direct);
        }
        assert!(inside > 0 && inside < n, "degenerate sample: {inside}/{n}");
    }

    #[test]
    fn ordered_triple_completion() {
        let c = cm(&["t1", "t2", "t3"], "t1 > t2 > t3");
        let tr = build_transformation(&c).unwrap();
        assert!(tr.reduced.is_none());
        assert_eq!(tr.d.nrows(), 1);
        let s = 1.0 / 3f64.sqrt();
        for j in 0..3 {
            assert_relative_eq!(tr.d[(0, j)].abs(), s, epsilon = 1e-12);
        }
        let id = &tr.t * &tr.t_inv;
        assert!((id - DMatrix::<f64>::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn fully_equality_constrained() {
        let c = cm(&["a", "b"], "a = 1 & b = 2");
        let tr = build_transformation(&c).unwrap();
        assert_eq!(tr.d.nrows(), 0);
        assert_eq!(tr.t, DMatrix::<f64>::identity(2, 2));
        assert_eq!(tr.n_free(), 0);
    }

    #[test]
    fn rank_deficient_orders_use_reduced_form() {
        let c = ConstraintMatrices::from_rows(
            4,
            &[],
            &[(vec![1.0, 0.0, -1.0, 0.0], 0.0), (vec![0.0, 1.0, 0.0, -1.0], 0.0), (vec![1.0, 1.0, -1.0, -1.0], 0.0)],
        );
        let tr = build_transformation(&c).unwrap();
        assert!(tr.reduced.is_some());
        membership_agrees(&c, 1000, 1e-9);
    }

    #[test]
    fn membership_equivalence_randomized() {
        let names = ["a", "b", "c", "d"];
        for h in ["a > b > c", "a = b & c > d", "a - b = 1 & a > 2", "(a,b) > (c,d)", "a = 0 & a + b > -1 & b < c"] {
            membership_agrees(&cm(&names, h), 10_000, 1e-9);
        }
    }

    #[test]
    fn redundant_and_inconsistent_equalities() {
        let bad = ConstraintMatrices::from_rows(2, &[(vec![1.0, 0.0], 0.0), (vec![2.0, 0.0], 0.0)], &[]);
        assert!(matches!(build_transformation(&bad), Err(Error::RedundantEqualities(_))));
        let bad = ConstraintMatrices::from_rows(2, &[(vec![1.0, 0.0], 0.0), (vec![2.0, 0.0], 1.0)], &[]);
        assert!(matches!(build_transformation(&bad), Err(Error::Infeasible(_))));
    }

    #[test]
    fn boundary_points() {
        let bp = boundary_point(&cm(&["mu"], "mu > 5"));
        assert_relative_eq!(bp.theta0[0], 5.0, epsilon = 1e-12);
        assert!(bp.consistent);

        let bp = boundary_point(&cm(&["a", "b", "c"], "a > b > c"));
        assert!(bp.theta0.amax() < 1e-12);

        let c = cm(&["a", "b"], "a - b = 1 & a > 2");
        let bp = boundary_point(&c);
        assert_relative_eq!(bp.theta0[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(bp.theta0[1], 1.0, epsilon = 1e-10);
        let (s, r) = c.stacked();
        assert!((s * &bp.theta0 - r).amax() < 1e-10);
    }

    #[test]
    fn inconsistent_boundary_falls_back() {
        // a > 0 & a > 1 cannot both hold with equality
        let c = cm(&["a", "b"], "a = b & a > 0 & b > 1");
        let bp = boundary_point(&c);
        assert!(!bp.consistent);
        assert_relative_eq!(bp.theta0[0], bp.theta0[1], epsilon = 1e-12);
        assert_relative_eq!(bp.theta0[0], 0.5, epsilon = 1e-10);
    }
}
