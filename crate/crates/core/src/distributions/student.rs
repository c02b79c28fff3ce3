use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::gamma::ln_gamma;

use super::region::{location_scale_region_prob, Region, RegionProb};
use super::rng::RandomStream;
use crate::error::{Error, Result};
use crate::linalg;

/// Multivariate Student t distribution with location, scale matrix and
/// degrees of freedom.
#[derive(Debug, Clone)]
pub struct StudentTSpec {
    pub location: DVector<f64>,
    pub scale: DMatrix<f64>,
    pub df: f64,
    chol: Cholesky<f64, Dyn>,
}

impl StudentTSpec {
    pub fn new(location: DVector<f64>, scale: DMatrix<f64>, df: f64) -> Result<Self> {
        if !(df > 0.0) || !df.is_finite() {
            return Err(Error::numerical(format!("degrees of freedom must be positive, got {df}")));
        }
        if scale.nrows() != location.len() {
            return Err(Error::invalid("location and scale dimensions differ"));
        }
        if !linalg::is_symmetric(&scale, 1e-12) {
            return Err(Error::numerical("scale matrix is not symmetric"));
        }
        let scale = linalg::symmetrize(&scale);
        let chol = linalg::cholesky(&scale)?;
        Ok(StudentTSpec { location, scale, df, chol })
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    fn mahalanobis(&self, x: &DVector<f64>) -> f64 {
        self.chol.l().solve_lower_triangular(&(x - &self.location)).expect("SPD factor").norm_squared()
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let v = self.df;
        ln_gamma((v + d) / 2.0)
            - ln_gamma(v / 2.0)
            - 0.5 * d * (v * PI).ln()
            - 0.5 * linalg::log_det(&self.chol)
            - 0.5 * (v + d) * (self.mahalanobis(x) / v).ln_1p()
    }

    pub fn pdf(&self, x: &DVector<f64>) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Distribution of `a X + c`.
    pub fn affine(&self, a: &DMatrix<f64>, c: &DVector<f64>) -> Result<StudentTSpec> {
        StudentTSpec::new(a * &self.location + c, linalg::symmetrize(&(a * &self.scale * a.transpose())), self.df)
    }

    /// Conditions on the first `values.len()` coordinates; see
    /// [`super::GaussianSpec::condition_on_leading`]. The conditional law is t
    /// with `df + q` degrees of freedom and a scale inflated by the
    /// Mahalanobis distance of `values`.
    pub fn condition_on_leading(&self, values: &DVector<f64>) -> Result<(f64, Option<StudentTSpec>)> {
        let q = values.len();
        let d = self.dim();
        if q == 0 {
            return Ok((0.0, Some(self.clone())));
        }
        let idx1: Vec<usize> = (0..q).collect();
        let idx2: Vec<usize> = (q..d).collect();
        let marg = StudentTSpec::new(
            linalg::subvector(&self.location, &idx1),
            linalg::submatrix(&self.scale, &idx1, &idx1),
            self.df,
        )?;
        let log_density = marg.log_pdf(values);
        if q == d {
            return Ok((log_density, None));
        }
        let delta = marg.mahalanobis(values);
        let s21 = linalg::submatrix(&self.scale, &idx2, &idx1);
        let s22 = linalg::submatrix(&self.scale, &idx2, &idx2);
        let gain = marg.chol.solve(&s21.transpose()).transpose();
        let loc = linalg::subvector(&self.location, &idx2) + &gain * (values - &marg.location);
        let factor = (self.df + delta) / (self.df + q as f64);
        let scale = linalg::symmetrize(&((s22 - &gain * s21.transpose()) * factor));
        Ok((log_density, Some(StudentTSpec::new(loc, scale, self.df + q as f64)?)))
    }
}

pub fn mvt_log_pdf(x: &DVector<f64>, t: &StudentTSpec) -> f64 {
    t.log_pdf(x)
}

pub fn mvt_pdf(x: &DVector<f64>, t: &StudentTSpec) -> f64 {
    t.pdf(x)
}

/// `P(A X > b)` for `X ~ t`: exact for one constraint, otherwise a scale
/// mixture of Gaussian region probabilities over `w ~ χ²_df / df`.
pub fn mvt_region_prob(r: &Region, t: &StudentTSpec, stream: RandomStream, n_draws: usize) -> Result<RegionProb> {
    location_scale_region_prob(r, &t.location, &t.scale, Some(t.df), stream, n_draws)
}
