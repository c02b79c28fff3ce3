use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::rng::RandomStream;
use crate::error::{Error, Result};
use crate::linalg;

/// Sampler for the inverse-Wishart distribution `IW(scale, df)` with mean
/// `scale / (df - dim - 1)`.
#[derive(Debug, Clone)]
pub struct InverseWishart {
    /// Lower Cholesky factor of the scale matrix.
    c: DMatrix<f64>,
    chi: Vec<ChiSquared<f64>>,
    df: f64,
}

impl InverseWishart {
    pub fn new(scale: &DMatrix<f64>, df: f64) -> Result<Self> {
        let p = scale.nrows();
        if !(df > p as f64 - 1.0) {
            return Err(Error::numerical(format!(
                "inverse-Wishart needs more than {} degrees of freedom, got {df}",
                p as f64 - 1.0
            )));
        }
        let c = linalg::cholesky(scale)?.l();
        let chi = (0..p)
            .map(|i| ChiSquared::new(df - i as f64).map_err(|e| Error::numerical(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(InverseWishart { c, chi, df })
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    /// A factor `F` of one draw, `Σ = F Fᵀ`.
    ///
    /// Bartlett decomposition: `Σ⁻¹ = C⁻ᵀ A Aᵀ C⁻¹` is Wishart(`Ψ⁻¹`, df) when
    /// `A` is lower triangular with `A_ii² ~ χ²(df - i)` and standard normal
    /// entries below the diagonal, so `F = C A⁻ᵀ`.
    pub fn sample_factor<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let p = self.dim();
        let mut a = DMatrix::zeros(p, p);
        for i in 0..p {
            a[(i, i)] = self.chi[i].sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        // A⁻ᵀ is upper triangular: solve Aᵀ X = I
        let at = a.transpose();
        let ainv_t = at.solve_upper_triangular(&DMatrix::identity(p, p)).expect("positive diagonal");
        &self.c * ainv_t
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let f = self.sample_factor(rng);
        linalg::symmetrize(&(&f * f.transpose()))
    }
}

/// One inverse-Wishart draw from `stream`.
pub fn sample_inverse_wishart(scale: &DMatrix<f64>, df: f64, stream: RandomStream) -> Result<DMatrix<f64>> {
    let iw = InverseWishart::new(scale, df)?;
    Ok(iw.sample(&mut stream.rng()))
}

#[cfg(test)]
mod tests {
    use super::super::rng::chunked;
    use super::*;

    fn moments(scale: &DMatrix<f64>, df: f64, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let iw = InverseWishart::new(scale, df).unwrap();
        let p = scale.nrows();
        let parts = chunked(RandomStream::new(2024, 7), n, |rng, len| {
            let mut s = DMatrix::zeros(p, p);
            let mut s2 = DMatrix::zeros(p, p);
            for _ in 0..len {
                let d = iw.sample(rng);
                assert!(linalg::cholesky(&d).is_ok());
                s += &d;
                s2 += d.component_mul(&d);
            }
            (s, s2)
        });
        let mut s = DMatrix::zeros(p, p);
        let mut s2 = DMatrix::zeros(p, p);
        for (a, b) in parts {
            s += a;
            s2 += b;
        }
        let nf = n as f64;
        let mean = &s / nf;
        let var = (&s2 / nf - mean.component_mul(&mean)) * (nf / (nf - 1.0));
        let se = var.map(|v| (v / nf).sqrt());
        (mean, se)
    }

    #[test]
    fn one_dimensional_matches_inverse_gamma_mean() {
        let scale = DMatrix::from_element(1, 1, 3.0);
        let df = 9.0;
        let (mean, se) = moments(&scale, df, 100_000);
        let want = 3.0 / (df - 2.0);
        assert!((mean[(0, 0)] - want).abs() < 3.0 * se[(0, 0)], "{} vs {want}", mean[(0, 0)]);
    }

    #[test]
    fn identity_scale_mean() {
        let (mean, se) = moments(&DMatrix::identity(2, 2), 10.0, 100_000);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 / 7.0 } else { 0.0 };
                assert!((mean[(i, j)] - want).abs() < 3.0 * se[(i, j)], "({i},{j}) {} vs {want}", mean[(i, j)]);
            }
        }
    }

    #[test]
    fn general_scale_mean() {
        let scale = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 1.5]);
        let df = 12.0;
        let (mean, se) = moments(&scale, df, 100_000);
        let want = &scale / (df - 4.0);
        for i in 0..3 {
            for j in 0..3 {
                assert!((mean[(i, j)] - want[(i, j)]).abs() < 3.5 * se[(i, j)], "({i},{j})");
            }
        }
    }

    #[test]
    fn too_few_degrees_of_freedom() {
        assert!(InverseWishart::new(&DMatrix::identity(3, 3), 1.5).is_err());
    }
}
