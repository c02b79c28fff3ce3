//! Uniform sampling over positive-definite correlation matrices (onion method).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::rng::RandomStream;
use crate::error::{Error, Result};

/// Onion-method sampler for correlation matrices uniform on the
/// positive-definite body, built row by row in Cholesky form.
#[derive(Debug, Clone)]
pub struct UniformCorrelation {
    dim: usize,
    first: Beta<f64>,
    /// `Beta(k/2, β_k)` radius laws for rows `k = 2 .. dim-1`.
    radii: Vec<Beta<f64>>,
}

impl UniformCorrelation {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("correlation matrices need dimension at least 2"));
        }
        let mut beta = 1.0 + (dim as f64 - 2.0) / 2.0;
        let first = Beta::new(beta, beta).map_err(|e| Error::numerical(e.to_string()))?;
        let mut radii = Vec::new();
        for k in 2..dim {
            beta -= 0.5;
            radii.push(Beta::new(k as f64 / 2.0, beta).map_err(|e| Error::numerical(e.to_string()))?);
        }
        Ok(UniformCorrelation { dim, first, radii })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lower Cholesky factor `L` of a draw `R = L Lᵀ`.
    pub fn sample_factor<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let d = self.dim;
        let mut l = DMatrix::zeros(d, d);
        let r12 = 2.0 * self.first.sample(rng) - 1.0;
        l[(0, 0)] = 1.0;
        l[(1, 0)] = r12;
        l[(1, 1)] = (1.0 - r12 * r12).sqrt();
        let mut u = Vec::with_capacity(d);
        for (step, radius) in self.radii.iter().enumerate() {
            let k = step + 2;
            let y = radius.sample(rng);
            u.clear();
            u.extend((0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = y.sqrt() / norm;
            for (j, uj) in u.iter().enumerate() {
                l[(k, j)] = uj * scale;
            }
            l[(k, k)] = (1.0 - y).sqrt();
        }
        l
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let l = self.sample_factor(rng);
        let mut r = &l * l.transpose();
        for i in 0..self.dim {
            r[(i, i)] = 1.0;
        }
        r
    }
}

/// One uniform correlation matrix from `stream`.
pub fn sample_uniform_corr(dim: usize, stream: RandomStream) -> Result<DMatrix<f64>> {
    Ok(UniformCorrelation::new(dim)?.sample(&mut stream.rng()))
}
