//! Probabilities of polyhedral regions `{x : A x > b}` under Gaussian and
//! Student-t distributions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::bvn::{bvn_upper, norm_cdf, norm_quantile, norm_sf};
use super::rng::{mc_mean, RandomStream};
use crate::error::{Error, Result};
use crate::{linalg, lp};

/// The open polyhedron `{x : a x > b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Region {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::invalid("region matrix and bound lengths differ"));
        }
        if (0..a.nrows()).any(|i| a.row(i).iter().all(|v| *v == 0.0)) {
            return Err(Error::invalid("region has an all-zero row"));
        }
        Ok(Region { a, b })
    }

    /// The whole of `R^dim`.
    pub fn everything(dim: usize) -> Self {
        Region { a: DMatrix::zeros(0, dim), b: DVector::zeros(0) }
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.a.nrows()).all(|i| {
            let mut s = 0.0;
            for (j, xj) in x.iter().enumerate() {
                s += self.a[(i, j)] * xj;
            }
            s > self.b[i]
        })
    }

    /// Whether the region has interior points at all.
    pub fn is_empty(&self) -> bool {
        if self.n_rows() == 0 {
            return false;
        }
        let e = DMatrix::zeros(0, self.dim());
        let f = DVector::zeros(0);
        !lp::has_interior(&self.a, &self.b, &e, &f)
    }
}

/// A probability estimate with its Monte Carlo standard error (zero when the
/// value is computed exactly).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionProb {
    pub p: f64,
    pub se: f64,
}

impl RegionProb {
    pub fn exact(p: f64) -> Self {
        RegionProb { p, se: 0.0 }
    }
}

/// A group of mutually correlated standardized constraints.
#[derive(Debug, Clone)]
struct Block {
    idx: Vec<usize>,
    corr: DMatrix<f64>,
    /// Lower Cholesky factor of `corr`.
    l: DMatrix<f64>,
}

/// `P(Y > h)` for `Y ~ N(0, R)` with `R` split into independent blocks.
#[derive(Debug, Clone)]
struct Orthant {
    h: Vec<f64>,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
enum Reduced {
    Trivial(f64),
    Orthant(Orthant),
    /// Constraint rows are linearly dependent: sample `x` directly.
    Direct {
        l: DMatrix<f64>,
    },
}

fn correlation_blocks(corr: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let m = corr.nrows();
    let mut comp = vec![usize::MAX; m];
    let mut out = Vec::new();
    for s in 0..m {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![s];
        let mut members = Vec::new();
        comp[s] = id;
        while let Some(i) = stack.pop() {
            members.push(i);
            for j in 0..m {
                if comp[j] == usize::MAX && corr[(i, j)].abs() > 1e-14 {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// A region with its emptiness and row-rank checks done once, for repeated
/// probability evaluations under different distributions.
#[derive(Debug, Clone)]
pub struct PreparedRegion {
    region: Region,
    trivial: Option<f64>,
    full_rank: bool,
}

impl PreparedRegion {
    pub fn new(region: Region) -> Self {
        let trivial = if region.n_rows() == 0 {
            Some(1.0)
        } else if region.is_empty() {
            Some(0.0)
        } else {
            None
        };
        let full_rank = linalg::rank(&region.a) == region.n_rows();
        PreparedRegion { region, trivial, full_rank }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    /// `Some(p)` when the probability is 0 or 1 whatever the distribution.
    pub fn trivial(&self) -> Option<f64> {
        self.trivial
    }

    /// `P(A X > b)` for `X ~ N(mean, cov)`, or a multivariate t with `df`
    /// degrees of freedom and scale matrix `cov` when `df` is given.
    pub fn prob(
        &self,
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
        df: Option<f64>,
        stream: RandomStream,
        n_draws: usize,
    ) -> Result<RegionProb> {
        if self.region.dim() != mean.len() {
            return Err(Error::invalid("region and distribution dimensions differ"));
        }
        match self.reduce(mean, cov)? {
            Reduced::Trivial(p) => Ok(RegionProb::exact(p)),
            Reduced::Orthant(o) => match df {
                None => Ok(orthant_normal(&o, stream, n_draws)),
                Some(v) => orthant_student(&o, v, stream, n_draws),
            },
            Reduced::Direct { l } => direct(&self.region, mean, &l, df, stream, n_draws),
        }
    }

    fn reduce(&self, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Reduced> {
        if let Some(p) = self.trivial {
            return Ok(Reduced::Trivial(p));
        }
        let region = &self.region;
        let m = region.n_rows();
        if !self.full_rank {
            let chol = linalg::cholesky(cov)?;
            return Ok(Reduced::Direct { l: chol.l() });
        }
        let mu = &region.a * mean;
        let s = linalg::symmetrize(&(&region.a * cov * region.a.transpose()));
        let sd: Vec<f64> = (0..m).map(|i| s[(i, i)].sqrt()).collect();
        if sd.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::numerical("degenerate variance along a constraint"));
        }
        let h: Vec<f64> = (0..m).map(|i| (region.b[i] - mu[i]) / sd[i]).collect();
        let corr = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { s[(i, j)] / (sd[i] * sd[j]) });
        let mut blocks = Vec::new();
        for idx in correlation_blocks(&corr) {
            let sub = linalg::submatrix(&corr, &idx, &idx);
            let l = if idx.len() >= 3 { linalg::cholesky(&sub)?.l() } else { DMatrix::zeros(0, 0) };
            blocks.push(Block { idx, corr: sub, l });
        }
        Ok(Reduced::Orthant(Orthant { h, blocks }))
    }
}

fn clamp_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// One separation-of-variables sample of `P(Y > h)` for `Y ~ N(0, L Lᵀ)`,
/// driven by uniforms `u` (length `m - 1`), antithetic partner included.
fn sov_pair(h: &[f64], l: &DMatrix<f64>, u: &[f64], y: &mut [f64]) -> f64 {
    let m = h.len();
    let mut total = 0.0;
    for flip in [false, true] {
        let mut f = 1.0;
        for i in 0..m {
            let mut s = 0.0;
            for j in 0..i {
                s += l[(i, j)] * y[j];
            }
            // P(Y_i > h_i) = P(-Y_i < -h_i) with -Y = L e
            let e = norm_cdf((-h[i] - s) / l[(i, i)]);
            f *= e;
            if f == 0.0 {
                break;
            }
            if i + 1 < m {
                let ui = if flip { 1.0 - u[i] } else { u[i] };
                y[i] = norm_quantile(clamp_unit(ui * e));
            }
        }
        total += f;
    }
    total / 2.0
}

fn block_exact(h: &[f64], b: &Block, scale: f64) -> Option<f64> {
    match b.idx.len() {
        1 => Some(norm_sf(h[b.idx[0]] * scale)),
        2 => Some(bvn_upper(h[b.idx[0]] * scale, h[b.idx[1]] * scale, b.corr[(0, 1)])),
        _ => None,
    }
}

fn orthant_normal(o: &Orthant, stream: RandomStream, n_draws: usize) -> RegionProb {
    let mut p = 1.0;
    let mut parts = Vec::new();
    for (k, b) in o.blocks.iter().enumerate() {
        let est = match block_exact(&o.h, b, 1.0) {
            Some(v) => RegionProb::exact(v),
            None => {
                let hb: Vec<f64> = b.idx.iter().map(|&i| o.h[i]).collect();
                let m = hb.len();
                let acc = mc_mean(stream.child(k as u64), n_draws.div_ceil(2), |rng| {
                    let u: Vec<f64> = (0..m - 1).map(|_| rng.random::<f64>()).collect();
                    let mut y = vec![0.0; m];
                    sov_pair(&hb, &b.l, &u, &mut y)
                });
                RegionProb { p: acc.mean(), se: acc.se() }
            }
        };
        p *= est.p;
        parts.push(est);
    }
    // delta-method error of a product of independent estimates
    let var: f64 = parts
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let others: f64 = parts.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| x.p).product();
            (others * e.se).powi(2)
        })
        .sum();
    RegionProb { p, se: var.sqrt() }
}

fn orthant_student(o: &Orthant, df: f64, stream: RandomStream, n_draws: usize) -> Result<RegionProb> {
    if o.h.len() == 1 {
        let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::numerical(e.to_string()))?;
        return Ok(RegionProb::exact(t.sf(o.h[0])));
    }
    let chi = ChiSquared::new(df).map_err(|e| Error::numerical(e.to_string()))?;
    let acc = mc_mean(stream, n_draws.div_ceil(2), |rng| {
        let w: f64 = chi.sample(rng) / df;
        let scale = w.sqrt();
        let mut val = 1.0;
        for b in &o.blocks {
            let v = match block_exact(&o.h, b, scale) {
                Some(v) => v,
                None => {
                    let hb: Vec<f64> = b.idx.iter().map(|&i| o.h[i] * scale).collect();
                    let u: Vec<f64> = (0..hb.len() - 1).map(|_| rng.random::<f64>()).collect();
                    let mut y = vec![0.0; hb.len()];
                    sov_pair(&hb, &b.l, &u, &mut y)
                }
            };
            val *= v;
            if val == 0.0 {
                break;
            }
        }
        val
    });
    Ok(RegionProb { p: acc.mean(), se: acc.se() })
}

fn direct(
    region: &Region,
    mean: &DVector<f64>,
    l: &DMatrix<f64>,
    df: Option<f64>,
    stream: RandomStream,
    n_draws: usize,
) -> Result<RegionProb> {
    let d = mean.len();
    let chi = match df {
        Some(v) => Some(ChiSquared::new(v).map_err(|e| Error::numerical(e.to_string()))?),
        None => None,
    };
    let acc = mc_mean(stream, n_draws.div_ceil(2), |rng| {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let scale = match (&chi, df) {
            (Some(c), Some(v)) => 1.0 / (c.sample(rng) / v).sqrt(),
            _ => 1.0,
        };
        let mut hits = 0.0;
        for sgn in [1.0, -1.0] {
            let x: Vec<f64> = (0..d)
                .map(|i| {
                    let mut s = 0.0;
                    for j in 0..=i {
                        s += l[(i, j)] * z[j];
                    }
                    mean[i] + sgn * scale * s
                })
                .collect();
            if region.contains(&x) {
                hits += 0.5;
            }
        }
        hits
    });
    Ok(RegionProb { p: acc.mean(), se: acc.se() })
}

pub(crate) fn location_scale_region_prob(
    region: &Region,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    df: Option<f64>,
    stream: RandomStream,
    n_draws: usize,
) -> Result<RegionProb> {
    PreparedRegion::new(region.clone()).prob(mean, cov, df, stream, n_draws)
}
