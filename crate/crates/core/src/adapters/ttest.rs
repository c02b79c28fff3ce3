//! One- and two-sample t tests on means.

use nalgebra::{DMatrix, DVector};

use crate::distributions::StudentTSpec;
use crate::engine::StudentFamily;
use crate::error::{Error, Result};
use crate::hypothesis::ParameterSpace;

/// Summary of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats {
    pub n: f64,
    pub mean: f64,
    pub sd: f64,
}

impl SampleStats {
    /// Recovers the standard deviation from a reported one-sample t
    /// statistic against `null`.
    pub fn from_t(n: f64, mean: f64, t: f64, null: f64) -> Result<Self> {
        if t == 0.0 || !t.is_finite() {
            return Err(Error::data("a nonzero finite t statistic is needed to recover the standard deviation"));
        }
        Ok(SampleStats { n, mean, sd: (mean - null).abs() * n.sqrt() / t.abs() })
    }

    fn ss(&self) -> f64 {
        (self.n - 1.0) * self.sd * self.sd
    }

    fn check(&self) -> Result<()> {
        if !(self.n >= 3.0) {
            return Err(Error::data(format!("a t test needs at least 3 observations per sample, got {}", self.n)));
        }
        if !(self.sd > 0.0) || !self.sd.is_finite() {
            return Err(Error::data("sample variance must be positive"));
        }
        if !self.mean.is_finite() {
            return Err(Error::data("sample mean must be finite"));
        }
        Ok(())
    }
}

/// Posterior and default prior for the mean (one sample, parameter `mu`) or
/// for the difference of two means with a common variance (parameter
/// `difference`, first minus second). `null` is the value used in the
/// exploratory test.
///
/// The prior uses group fractions `b_j = 2 / n_j`, which makes it a Cauchy
/// distribution for one sample and a t with 2 degrees of freedom for two.
pub fn ttest_family(samples: &[SampleStats], null: f64) -> Result<StudentFamily> {
    for s in samples {
        s.check()?;
    }
    let (name, location, inv_n, inv_bn) = match samples {
        [a] => ("mu", a.mean, 1.0 / a.n, 1.0 / 2.0),
        [a, b] => ("difference", a.mean - b.mean, 1.0 / a.n + 1.0 / b.n, 1.0),
        _ => return Err(Error::invalid("a t test takes one or two samples")),
    };
    let j = samples.len() as f64;
    let n_total: f64 = samples.iter().map(|s| s.n).sum();
    let ss: f64 = samples.iter().map(|s| s.ss()).sum();
    let df = n_total - j;
    let post_scale = ss / df * inv_n;

    let b: Vec<f64> = samples.iter().map(|s| 2.0 / s.n).collect();
    let prior_df = samples.iter().zip(&b).map(|(s, b)| b * s.n).sum::<f64>() - j;
    let prior_ss: f64 = samples.iter().zip(&b).map(|(s, b)| b * s.ss()).sum();
    let prior_scale = prior_ss / prior_df * inv_bn;

    let space = ParameterSpace::new([name])?;
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    Ok(StudentFamily {
        space,
        posterior: StudentTSpec::new(DVector::from_element(1, location), m(post_scale), df)?,
        prior_scale: m(prior_scale),
        prior_df,
        nulls: vec![null],
    })
}
