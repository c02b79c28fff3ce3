//! Univariate and multivariate normal linear models.
//!
//! With `Y = X B + E` and rows of `E` normal with covariance `Σ`, the
//! posterior under a noninformative prior is `Σ ~ IW(S, n - k)` and
//! `vec(B) | Σ ~ N(vec(B̂), Σ ⊗ (X'X)⁻¹)`, a matrix t. The default prior is
//! the same construction on a fraction `b_j` of each group's data, moved to
//! the boundary of the hypothesis; its degrees of freedom make it a matrix
//! Cauchy. Parameters are ordered outcome by outcome.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::constrained::boundary_point;
use crate::distributions::rng::chunked;
use crate::distributions::{InverseWishart, RandomStream};
use crate::engine::{log_mean_exp, Family, Frame, McContext, Measures, Sampler};
use crate::error::{Error, Result};
use crate::hypothesis::{ConstraintMatrices, ParameterSpace};
use crate::linalg;

/// Draws used for the region probability inside each covariance draw.
const INNER_DRAWS: usize = 64;

/// Cross products of one group of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LmGroup {
    pub name: String,
    pub n: f64,
    /// `X'X`, k×k.
    pub xtx: DMatrix<f64>,
    /// `X'Y`, k×p.
    pub xty: DMatrix<f64>,
    /// `Y'Y`, p×p.
    pub yty: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmSummary {
    pub predictors: Vec<String>,
    pub outcomes: Vec<String>,
    /// Groups defining the prior fractions; one group when there is no
    /// grouping.
    pub groups: Vec<LmGroup>,
    /// Named sets of predictor indices tested jointly in the exploratory
    /// output (factor main effects and interactions).
    pub terms: Vec<(String, Vec<usize>)>,
}

/// The matrix-t pieces: `Σ ~ IW(scale, df)`, `B | Σ ~ MN(·, u, Σ)`.
#[derive(Debug, Clone)]
struct MatrixT {
    scale: DMatrix<f64>,
    df: f64,
    u: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LmFamily {
    space: ParameterSpace,
    k: usize,
    p: usize,
    bhat: DMatrix<f64>,
    posterior: MatrixT,
    prior: MatrixT,
    terms: Vec<(String, Vec<usize>)>,
}

enum Layout {
    /// All constraints on the coefficients of one outcome.
    Column(usize),
    /// All constraints on one predictor across outcomes.
    Row(usize),
}

fn invert_spd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    linalg::cholesky(m)
        .map(|c| c.inverse())
        .map_err(|_| Error::data(format!("{what} is singular; the design matrix is not of full column rank")))
}

pub fn lm_family(s: &LmSummary) -> Result<LmFamily> {
    let k = s.predictors.len();
    let p = s.outcomes.len();
    if k == 0 || p == 0 {
        return Err(Error::data("a linear model needs at least one predictor and one outcome"));
    }
    if s.groups.is_empty() {
        return Err(Error::data("no observations"));
    }
    for g in &s.groups {
        if g.xtx.shape() != (k, k) || g.xty.shape() != (k, p) || g.yty.shape() != (p, p) {
            return Err(Error::data(format!("cross products of group {} have the wrong dimensions", g.name)));
        }
    }
    let n: f64 = s.groups.iter().map(|g| g.n).sum();
    let nu = n - k as f64;
    if nu < p as f64 {
        return Err(Error::data(format!("{n} observations are too few for {k} predictors and {p} outcomes")));
    }
    let sum = |f: &dyn Fn(&LmGroup) -> DMatrix<f64>, w: &[f64]| {
        s.groups
            .iter()
            .zip(w)
            .fold(None, |acc: Option<DMatrix<f64>>, (g, w)| {
                let m = f(g) * *w;
                Some(match acc {
                    Some(a) => a + m,
                    None => m,
                })
            })
            .unwrap()
    };
    let ones = vec![1.0; s.groups.len()];
    let j = s.groups.len() as f64;
    let b: Vec<f64> = s.groups.iter().map(|g| (k + p) as f64 / (j * g.n)).collect();
    if let Some((g, _)) = s.groups.iter().zip(&b).find(|(_, b)| **b > 1.0) {
        return Err(Error::data(format!("group {} has too few observations for the default prior", g.name)));
    }

    let fit = |w: &[f64], what: &str| -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let xtx = sum(&|g| g.xtx.clone(), w);
        let xty = sum(&|g| g.xty.clone(), w);
        let yty = sum(&|g| g.yty.clone(), w);
        let u = invert_spd(&linalg::symmetrize(&xtx), what)?;
        let bhat = &u * &xty;
        let resid = linalg::symmetrize(&(yty - bhat.transpose() * &xty));
        Ok((bhat, resid, u))
    };
    let (bhat, s_post, u) = fit(&ones, "X'X")?;
    let (_, s_prior, u_prior) = fit(&b, "the weighted X'X")?;
    for (what, m) in [("residual", &s_post), ("fractional residual", &s_prior)] {
        if linalg::cholesky(m).is_err() {
            return Err(Error::data(format!("{what} cross-product matrix is singular")));
        }
    }
    let nu_prior = b.iter().zip(&s.groups).map(|(b, g)| b * g.n).sum::<f64>() - k as f64;

    let names: Vec<String> = (0..p)
        .flat_map(|jj| {
            s.predictors.iter().map(move |x| if p == 1 { x.clone() } else { format!("{x}_on_{}", s.outcomes[jj]) })
        })
        .collect();
    let space = ParameterSpace::new(names)?;
    Ok(LmFamily {
        space,
        k,
        p,
        bhat,
        posterior: MatrixT { scale: s_post, df: nu, u },
        prior: MatrixT { scale: s_prior, df: nu_prior, u: u_prior },
        terms: s.terms.clone(),
    })
}

impl LmFamily {
    fn index(&self, predictor: usize, outcome: usize) -> usize {
        outcome * self.k + predictor
    }

    fn vec_bhat(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.k * self.p,
            (0..self.p).flat_map(|j| (0..self.k).map(move |i| (i, j))).map(|(i, j)| self.bhat[(i, j)]),
        )
    }

    /// Joint tests of model terms: every coefficient of the term, across all
    /// outcomes.
    pub fn grouped_terms(&self) -> Vec<(String, Vec<usize>)> {
        self.terms
            .iter()
            .map(|(name, preds)| {
                let idx = (0..self.p)
                    .flat_map(|j| preds.iter().map(move |&i| (i, j)))
                    .map(|(i, j)| self.index(i, j))
                    .collect();
                (name.clone(), idx)
            })
            .collect()
    }

    fn layout(&self, params: &[usize]) -> Option<Layout> {
        if self.p == 1 {
            return Some(Layout::Column(0));
        }
        let outcome = |t: usize| t / self.k;
        let predictor = |t: usize| t % self.k;
        let first = *params.first()?;
        if params.iter().all(|&t| outcome(t) == outcome(first)) {
            Some(Layout::Column(outcome(first)))
        } else if params.iter().all(|&t| predictor(t) == predictor(first)) {
            Some(Layout::Row(predictor(first)))
        } else {
            None
        }
    }

    /// Columns of θ covered by a layout and the matching Student-t marginal
    /// scale for `m`.
    fn marginal(&self, layout: &Layout, m: &MatrixT) -> (Vec<usize>, DMatrix<f64>, f64) {
        let df = m.df - self.p as f64 + 1.0;
        match *layout {
            Layout::Column(j) => {
                let cols = (0..self.k).map(|i| self.index(i, j)).collect();
                (cols, &m.u * (m.scale[(j, j)] / df), df)
            }
            Layout::Row(i) => {
                let cols = (0..self.p).map(|j| self.index(i, j)).collect();
                (cols, &m.scale * (m.u[(i, i)] / df), df)
            }
        }
    }

    fn analytic(
        &self,
        layout: Layout,
        h: &ConstraintMatrices,
        anchor: &ConstraintMatrices,
        ctx: &McContext,
    ) -> Result<Measures> {
        let (cols, post_scale, post_df) = self.marginal(&layout, &self.posterior);
        let (_, prior_scale, prior_df) = self.marginal(&layout, &self.prior);
        let hr = h.restrict(&cols);
        let center = boundary_point(&anchor.restrict(&cols)).theta0;
        let frame = Frame::new(&hr)?;
        let post_loc = linalg::subvector(&self.vec_bhat(), &cols);
        let (log_fit_e, fit) =
            frame.evaluate(&post_loc, &post_scale, Some(post_df), ctx.stream.child(0), ctx.n_draws)?;
        let (log_comp_e, comp) =
            frame.evaluate(&center, &prior_scale, Some(prior_df), ctx.stream.child(1), ctx.n_draws)?;
        Ok(Measures { log_comp_e, log_fit_e, comp_o: comp.p, fit_o: fit.p, comp_o_se: comp.se, fit_o_se: fit.se })
    }

    /// Mixture over covariance draws: log of the average density at the
    /// equality point and the density-weighted average order probability.
    fn mixture(
        &self,
        frame: &Frame,
        mean: &DVector<f64>,
        m: &MatrixT,
        stream: RandomStream,
        n_cov: usize,
    ) -> Result<(f64, f64, f64)> {
        let iw = InverseWishart::new(&m.scale, m.df)?;
        let parts = chunked(stream, n_cov, |rng, len| {
            (0..len)
                .map(|_| {
                    let sigma = iw.sample(rng);
                    let cov = linalg::kron(&sigma, &m.u);
                    let inner = RandomStream::new(rng.next_u64(), 0);
                    frame.evaluate(mean, &cov, None, inner, INNER_DRAWS).map(|(ld, pr)| (ld, pr.p, pr.se))
                })
                .collect::<Result<Vec<_>>>()
        });
        let draws: Vec<(f64, f64, f64)> =
            parts.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
        let lds: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let log_e = log_mean_exp(&lds);
        let max = lds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lds.iter().map(|l| (l - max).exp()).collect();
        let wsum: f64 = w.iter().sum();
        let prob = draws.iter().zip(&w).map(|(d, w)| w * d.1).sum::<f64>() / wsum;
        let var =
            draws.iter().zip(&w).map(|(d, w)| w * w * ((d.1 - prob).powi(2) + d.2 * d.2)).sum::<f64>() / (wsum * wsum);
        if !log_e.is_finite() || !prob.is_finite() {
            return Err(Error::numerical("matrix-t mixture estimate is not finite"));
        }
        Ok((log_e, prob, var.sqrt()))
    }

    fn monte_carlo(&self, h: &ConstraintMatrices, anchor: &ConstraintMatrices, ctx: &McContext) -> Result<Measures> {
        let frame = Frame::new(h)?;
        let n_cov = (ctx.n_draws / 10).max(100);
        let center = boundary_point(anchor).theta0;
        let (log_fit_e, fit_o, fit_o_se) =
            self.mixture(&frame, &self.vec_bhat(), &self.posterior, ctx.stream.child(0), n_cov)?;
        let (log_comp_e, comp_o, comp_o_se) = self.mixture(&frame, &center, &self.prior, ctx.stream.child(1), n_cov)?;
        Ok(Measures { log_comp_e, log_fit_e, comp_o, fit_o, comp_o_se, fit_o_se })
    }

    /// Measures by covariance-draw mixture regardless of the layout.
    pub fn measures_by_mixture(&self, h: &ConstraintMatrices, ctx: &McContext) -> Result<Measures> {
        self.monte_carlo(h, h, ctx)
    }
}

impl Family for LmFamily {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn measures(&self, h: &ConstraintMatrices, anchor: &ConstraintMatrices, ctx: &McContext) -> Result<Measures> {
        let mut params = h.involved_params();
        params.extend(anchor.involved_params());
        params.sort_unstable();
        params.dedup();
        match self.layout(&params) {
            Some(layout) => self.analytic(layout, h, anchor, ctx),
            None => self.monte_carlo(h, anchor, ctx),
        }
    }

    fn sampler(&self, anchor: &ConstraintMatrices, posterior: bool, _ctx: &McContext) -> Result<Sampler<'_>> {
        let (m, center) = if posterior {
            (&self.posterior, self.bhat.clone())
        } else {
            let c = boundary_point(anchor).theta0;
            (&self.prior, DMatrix::from_fn(self.k, self.p, |i, j| c[self.index(i, j)]))
        };
        let iw = InverseWishart::new(&m.scale, m.df)?;
        let lu = linalg::cholesky(&m.u)?.l();
        let (k, p) = (self.k, self.p);
        Ok(Box::new(move |rng: &mut ChaCha20Rng| {
            let sigma = iw.sample(rng);
            let ls = linalg::cholesky(&sigma)
                .map(|c| c.l())
                .unwrap_or_else(|_| DMatrix::from_diagonal(&sigma.diagonal().map(f64::sqrt)));
            let z = DMatrix::from_fn(k, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = &center + &lu * z * ls.transpose();
            DVector::from_iterator(k * p, (0..p).flat_map(|j| (0..k).map(move |i| (i, j))).map(|(i, j)| b[(i, j)]))
        }))
    }
}
