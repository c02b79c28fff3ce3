//! Inverse-gamma distribution and the univariate F and χ² densities.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Inverse-gamma distribution with shape `a` and scale `b`:
/// density `b^a / Γ(a) x^(-a-1) exp(-b/x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::numerical(format!("invalid inverse-gamma parameters ({shape}, {scale})")));
        }
        Ok(InverseGamma { shape, scale })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.shape, self.scale);
        a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        gamma_ur(self.shape, self.scale / x)
    }

    /// `P(X > x)`.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        gamma_lr(self.shape, self.scale / x)
    }

    /// Solves `cdf(x) = p` by bisection on `log x` followed by Newton steps.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        let centre = (self.scale / self.shape).ln();
        while self.cdf((centre + lo).exp()) > p {
            lo *= 2.0;
        }
        while self.cdf((centre + hi).exp()) < p {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf((centre + mid).exp()) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-9 {
                break;
            }
        }
        let mut x = (centre + 0.5 * (lo + hi)).exp();
        for _ in 0..5 {
            let f = if p < 0.5 { self.cdf(x) - p } else { (1.0 - p) - self.sf(x) };
            let d = self.pdf(x);
            if d <= 0.0 || !d.is_finite() {
                break;
            }
            let step = f / d;
            if !(step.is_finite()) || (x - step) <= 0.0 {
                break;
            }
            x -= step;
            if step.abs() <= 1e-15 * x {
                break;
            }
        }
        x
    }

    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0).expect("validated shape");
        self.scale / g.sample(rng)
    }
}

pub fn invgamma_pdf(x: f64, shape: f64, scale: f64) -> Result<f64> {
    Ok(InverseGamma::new(shape, scale)?.pdf(x))
}

/// `P(lower < X < upper)`; either bound may be infinite.
pub fn invgamma_region_prob(lower: f64, upper: f64, shape: f64, scale: f64) -> Result<f64> {
    let d = InverseGamma::new(shape, scale)?;
    if upper <= lower {
        return Ok(0.0);
    }
    let hi = if upper.is_finite() { d.cdf(upper) } else { 1.0 };
    Ok((hi - d.cdf(lower.max(0.0))).max(0.0))
}

pub fn chi_squared_log_pdf(x: f64, k: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (k / 2.0 - 1.0) * x.ln() - x / 2.0 - (k / 2.0) * 2f64.ln() - ln_gamma(k / 2.0)
}

pub fn chi_squared_pdf(x: f64, k: f64) -> f64 {
    chi_squared_log_pdf(x, k).exp()
}

pub fn f_log_pdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    0.5 * (d1 * (d1 * x).ln() + d2 * d2.ln() - (d1 + d2) * (d1 * x + d2).ln()) - x.ln() - ln_beta(d1 / 2.0, d2 / 2.0)
}

pub fn f_pdf(x: f64, d1: f64, d2: f64) -> f64 {
    f_log_pdf(x, d1, d2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{ChiSquared, Continuous, FisherSnedecor};

    #[test]
    fn density_at_one() {
        assert_relative_eq!(invgamma_pdf(1.0, 1.0, 1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn mean_by_quadrature() {
        let d = InverseGamma::new(3.0, 4.0).unwrap();
        // ∫ x f(x) dx with x = e^u
        let (lo, hi, n) = (-12.0, 16.0, 200_000);
        let h = (hi - lo) / n as f64;
        let m: f64 = (0..n)
            .map(|i| {
                let x = (lo + (i as f64 + 0.5) * h).exp();
                x * d.pdf(x) * x
            })
            .sum::<f64>()
            * h;
        assert_relative_eq!(m, 2.0, epsilon = 1e-6);
        assert_eq!(d.mean(), Some(2.0));
    }

    #[test]
    fn median_round_trip() {
        for (a, b) in [(1.0, 1.0), (3.0, 4.0), (8.0, 120.0), (0.6, 0.02)] {
            let d = InverseGamma::new(a, b).unwrap();
            let med = d.quantile(0.5);
            assert!((d.sf(med) - 0.5).abs() < 1e-10, "a={a} b={b}");
        }
    }

    #[test]
    fn region_probability() {
        let p = invgamma_region_prob(1.0, f64::INFINITY, 2.0, 3.0).unwrap();
        assert_relative_eq!(p, InverseGamma::new(2.0, 3.0).unwrap().sf(1.0), epsilon = 1e-15);
        assert_eq!(invgamma_region_prob(2.0, 1.0, 2.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn f_and_chi_squared_match_reference() {
        for x in [0.1, 0.9, 2.5, 7.0] {
            assert_relative_eq!(chi_squared_pdf(x, 3.5), ChiSquared::new(3.5).unwrap().pdf(x), epsilon = 1e-12);
            assert_relative_eq!(f_pdf(x, 4.0, 11.0), FisherSnedecor::new(4.0, 11.0).unwrap().pdf(x), epsilon = 1e-12);
        }
    }
}
