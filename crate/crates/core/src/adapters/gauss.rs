//! Large-sample normal approximation from estimates, their covariance
//! matrix and the sample size.

use nalgebra::{DMatrix, DVector};

use crate::distributions::GaussianSpec;
use crate::engine::GaussianFamily;
use crate::error::{Error, Result};
use crate::hypothesis::ParameterSpace;

pub fn gaussian_family(names: &[String], estimates: &[f64], cov: DMatrix<f64>, n: f64) -> Result<GaussianFamily> {
    if names.len() != estimates.len() || cov.nrows() != names.len() || cov.ncols() != names.len() {
        return Err(Error::data("names, estimates and covariance dimensions differ"));
    }
    if estimates.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::data("estimates and covariance must be finite"));
    }
    let space = ParameterSpace::new(names.iter().cloned())?;
    let post = GaussianSpec::new(DVector::from_column_slice(estimates), cov)?;
    GaussianFamily::new(space, post, n)
}
