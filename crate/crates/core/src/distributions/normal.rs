use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use super::region::{location_scale_region_prob, Region, RegionProb};
use super::rng::RandomStream;
use crate::error::{Error, Result};
use crate::linalg;

/// Multivariate normal distribution.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GaussianSpec {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::invalid("mean and covariance dimensions differ"));
        }
        if !linalg::is_symmetric(&cov, 1e-12) {
            return Err(Error::numerical("covariance matrix is not symmetric"));
        }
        let cov = linalg::symmetrize(&cov);
        let chol = linalg::cholesky(&cov)?;
        Ok(GaussianSpec { mean, cov, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower Cholesky factor of the covariance.
    pub fn chol_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let z = self.chol.l().solve_lower_triangular(&(x - &self.mean)).expect("SPD factor");
        -0.5 * d * (2.0 * PI).ln() - 0.5 * linalg::log_det(&self.chol) - 0.5 * z.norm_squared()
    }

    pub fn pdf(&self, x: &DVector<f64>) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Distribution of `a X + c`.
    pub fn affine(&self, a: &DMatrix<f64>, c: &DVector<f64>) -> Result<GaussianSpec> {
        GaussianSpec::new(a * &self.mean + c, linalg::symmetrize(&(a * &self.cov * a.transpose())))
    }

    /// Conditions on the first `values.len()` coordinates. Returns the log
    /// marginal density of those coordinates at `values` and the conditional
    /// distribution of the rest (`None` when nothing is left).
    pub fn condition_on_leading(&self, values: &DVector<f64>) -> Result<(f64, Option<GaussianSpec>)> {
        let q = values.len();
        let d = self.dim();
        let idx1: Vec<usize> = (0..q).collect();
        let idx2: Vec<usize> = (q..d).collect();
        let log_density = if q == 0 {
            0.0
        } else {
            let marg =
                GaussianSpec::new(linalg::subvector(&self.mean, &idx1), linalg::submatrix(&self.cov, &idx1, &idx1))?;
            marg.log_pdf(values)
        };
        if q == d {
            return Ok((log_density, None));
        }
        if q == 0 {
            return Ok((0.0, Some(self.clone())));
        }
        let s11 = linalg::submatrix(&self.cov, &idx1, &idx1);
        let s21 = linalg::submatrix(&self.cov, &idx2, &idx1);
        let s22 = linalg::submatrix(&self.cov, &idx2, &idx2);
        let c11 = linalg::cholesky(&s11)?;
        let gain = c11.solve(&s21.transpose()).transpose();
        let mean = linalg::subvector(&self.mean, &idx2) + &gain * (values - linalg::subvector(&self.mean, &idx1));
        let cov = linalg::symmetrize(&(s22 - &gain * s21.transpose()));
        Ok((log_density, Some(GaussianSpec::new(mean, cov)?)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + self.chol.l() * z
    }
}

pub fn mvn_log_pdf(x: &DVector<f64>, g: &GaussianSpec) -> f64 {
    g.log_pdf(x)
}

pub fn mvn_pdf(x: &DVector<f64>, g: &GaussianSpec) -> f64 {
    g.pdf(x)
}

/// `P(A X > b)` for `X ~ g`.
pub fn mvn_region_prob(r: &Region, g: &GaussianSpec, stream: RandomStream, n_draws: usize) -> Result<RegionProb> {
    location_scale_region_prob(r, &g.mean, &g.cov, None, stream, n_draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g(mean: &[f64], cov: &[f64]) -> GaussianSpec {
        let d = mean.len();
        GaussianSpec::new(DVector::from_column_slice(mean), DMatrix::from_row_slice(d, d, cov)).unwrap()
    }

    #[test]
    fn standard_normal_mode() {
        assert_relative_eq!(g(&[0.0], &[1.0]).pdf(&DVector::from_vec(vec![0.0])), 0.398942280401433, epsilon = 1e-14);
    }

    #[test]
    fn correlated_bivariate_at_origin() {
        let d = g(&[0.0, 0.0], &[1.0, 0.5, 0.5, 1.0]).pdf(&DVector::zeros(2));
        assert_relative_eq!(d, 1.0 / (2.0 * PI * 0.75f64.sqrt()), epsilon = 1e-14);
        assert_relative_eq!(d, 0.183776, epsilon = 1e-6);
    }

    #[test]
    fn shift_invariance() {
        let cov = [2.0, 0.3, 0.3, 0.5];
        let a = g(&[1.0, -2.0], &cov);
        let b = g(&[0.0, 0.0], &cov);
        let x = DVector::from_vec(vec![0.4, 0.7]);
        let shifted = &x - &a.mean;
        assert_relative_eq!(a.pdf(&x), b.pdf(&shifted), epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_spd() {
        let bad = GaussianSpec::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(bad, Err(Error::Numerical(_))));
        let asym = GaussianSpec::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]));
        assert!(asym.is_err());
    }

    #[test]
    fn density_integrates_to_one_on_grid() {
        let d = g(&[0.3, -0.2], &[1.0, 0.6, 0.6, 2.0]);
        let n = 400;
        let (lo, hi) = (-9.0, 9.0);
        let h = (hi - lo) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = DVector::from_vec(vec![lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h]);
                s += d.pdf(&x);
            }
        }
        assert!((s * h * h - 1.0).abs() < 1e-3);
    }

    #[test]
    fn conditioning_matches_bivariate_formula() {
        let d = g(&[1.0, 2.0], &[4.0, 1.2, 1.2, 1.0]);
        let (logm, cond) = d.condition_on_leading(&DVector::from_vec(vec![3.0])).unwrap();
        let cond = cond.unwrap();
        assert_relative_eq!(cond.mean[0], 2.0 + 1.2 / 4.0 * 2.0, epsilon = 1e-14);
        assert_relative_eq!(cond.cov[(0, 0)], 1.0 - 1.2 * 1.2 / 4.0, epsilon = 1e-14);
        let marg = g(&[1.0], &[4.0]).log_pdf(&DVector::from_vec(vec![3.0]));
        assert_relative_eq!(logm, marg, epsilon = 1e-14);
    }

    #[test]
    fn orthant_probabilities() {
        let s = RandomStream::new(5, 0);
        let orth = Region::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let p = mvn_region_prob(&orth, &g(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]), s, 1000).unwrap();
        assert_relative_eq!(p.p, 0.25, epsilon = 1e-15);
        let p = mvn_region_prob(&orth, &g(&[0.0, 0.0], &[1.0, 0.5, 0.5, 1.0]), s, 1000).unwrap();
        assert_relative_eq!(p.p, 1.0 / 3.0, epsilon = 1e-14);
        let half = Region::new(DMatrix::identity(1, 1), DVector::from_vec(vec![1.9318])).unwrap();
        let p = mvn_region_prob(&half, &g(&[0.0], &[1.0]), s, 1000).unwrap();
        assert_relative_eq!(p.p, 0.0266, epsilon = 1e-4);
    }

    #[test]
    fn complementary_half_spaces() {
        let d = g(&[0.2, -0.1, 0.4], &[1.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8]);
        let a = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
        let up = Region::new(a.clone(), DVector::from_vec(vec![0.3])).unwrap();
        let down = Region::new(-a, DVector::from_vec(vec![-0.3])).unwrap();
        let s = RandomStream::new(1, 1);
        let p = mvn_region_prob(&up, &d, s, 1000).unwrap().p + mvn_region_prob(&down, &d, s, 1000).unwrap().p;
        assert_relative_eq!(p, 1.0, epsilon = 1e-14);
    }
}
