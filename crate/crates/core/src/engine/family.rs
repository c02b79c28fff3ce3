use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::Measures;
use crate::constrained::{boundary_point, build_transformation, Transformation};
use crate::distributions::{GaussianSpec, PreparedRegion, RandomStream, Region, RegionProb, StudentTSpec};
use crate::error::{Error, Result};
use crate::hypothesis::{ConstraintMatrices, ParameterSpace};
use crate::linalg;

/// Monte Carlo settings for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct McContext {
    /// Run-wide seed, for draws that must be shared across hypotheses.
    pub seed: u64,
    /// Stream private to this evaluation.
    pub stream: RandomStream,
    pub n_draws: usize,
}

/// Draws parameter vectors from a posterior or prior.
pub type Sampler<'a> = Box<dyn Fn(&mut ChaCha20Rng) -> DVector<f64> + Send + Sync + 'a>;

/// A statistical model reduced to what the Bayes factor needs: the four
/// measures for a hypothesis and samplers for union probabilities.
pub trait Family: Send + Sync {
    fn space(&self) -> &ParameterSpace;

    /// Rejects hypotheses this family cannot evaluate.
    fn check(&self, _h: &ConstraintMatrices) -> Result<()> {
        Ok(())
    }

    /// Measures of `h`, with the default prior centred on and scaled for
    /// `anchor` (normally `h` itself).
    fn measures(&self, h: &ConstraintMatrices, anchor: &ConstraintMatrices, ctx: &McContext) -> Result<Measures>;

    /// Sampler for the posterior (`posterior = true`) or for the prior centred
    /// on `anchor`.
    fn sampler(&self, anchor: &ConstraintMatrices, posterior: bool, ctx: &McContext) -> Result<Sampler<'_>>;

    /// Value each parameter is compared with in the exploratory tests.
    fn exploratory_null(&self, _k: usize) -> f64 {
        0.0
    }

    /// Exploratory tests replacing the per-parameter triads, if any.
    fn exploratory_sets(&self) -> Option<Vec<super::ExploratorySet>> {
        None
    }
}

/// The transformation of one hypothesis together with its order region on
/// the free coordinates.
#[derive(Debug, Clone)]
pub struct Frame {
    pub tr: Transformation,
    pub r_e: DVector<f64>,
    pub region: PreparedRegion,
}

impl Frame {
    pub fn new(h: &ConstraintMatrices) -> Result<Frame> {
        let tr = build_transformation(h)?;
        let (a, b) = tr.region();
        let region = PreparedRegion::new(Region::new(a.clone(), b.clone())?);
        Ok(Frame { tr, r_e: h.r_e.clone(), region })
    }

    /// For `θ` normal (or t with `df`) with location `mean` and scale `cov`:
    /// the log density of `RE θ` at `rE` and the probability of the order
    /// region given `RE θ = rE`.
    pub fn evaluate(
        &self,
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
        df: Option<f64>,
        stream: RandomStream,
        n_draws: usize,
    ) -> Result<(f64, RegionProb)> {
        let q = self.tr.n_equalities;
        if q == 0 {
            if let Some(p) = self.region.trivial() {
                return Ok((0.0, RegionProb::exact(p)));
            }
        }
        let t = &self.tr.t;
        let eta_mean = t * mean;
        let eta_cov = linalg::symmetrize(&(t * cov * t.transpose()));
        let (log_d, cond_mean, cond_cov, cond_df) = match df {
            None => {
                let g = GaussianSpec::new(eta_mean, eta_cov)?;
                let (ld, c) = g.condition_on_leading(&self.r_e)?;
                match c {
                    Some(c) => (ld, Some(c.mean.clone()), Some(c.cov.clone()), None),
                    None => (ld, None, None, None),
                }
            }
            Some(v) => {
                let s = StudentTSpec::new(eta_mean, eta_cov, v)?;
                let (ld, c) = s.condition_on_leading(&self.r_e)?;
                match c {
                    Some(c) => (ld, Some(c.location.clone()), Some(c.scale.clone()), Some(c.df)),
                    None => (ld, None, None, None),
                }
            }
        };
        let prob = match (self.region.trivial(), cond_mean, cond_cov) {
            (Some(p), _, _) => RegionProb::exact(p),
            (None, Some(m), Some(c)) => self.region.prob(&m, &c, cond_df, stream, n_draws)?,
            _ => RegionProb::exact(1.0),
        };
        Ok((log_d, prob))
    }
}

/// Rank of the stacked constraints of `anchor`, used as the number of
/// constraints tested when scaling default priors.
pub fn constraint_count(anchor: &ConstraintMatrices) -> usize {
    anchor.rank().max(1)
}

/// Normal posterior with a normal default prior `N(θ0, Σ n / q)`, where `q`
/// is the number of independent constraints tested.
#[derive(Debug, Clone)]
pub struct GaussianFamily {
    pub space: ParameterSpace,
    pub posterior: GaussianSpec,
    pub n: f64,
}

impl GaussianFamily {
    pub fn new(space: ParameterSpace, posterior: GaussianSpec, n: f64) -> Result<Self> {
        if posterior.dim() != space.len() {
            return Err(Error::invalid("estimate and parameter counts differ"));
        }
        if !(n > 1.0) {
            return Err(Error::data(format!("sample size must exceed 1, got {n}")));
        }
        Ok(GaussianFamily { space, posterior, n })
    }

    fn prior_cov(&self, anchor: &ConstraintMatrices) -> Result<DMatrix<f64>> {
        let q = constraint_count(anchor) as f64;
        if self.n <= q {
            return Err(Error::data(format!(
                "sample size {} must exceed the number of constraints tested ({q})",
                self.n
            )));
        }
        Ok(&self.posterior.cov * (self.n / q))
    }
}

impl Family for GaussianFamily {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn measures(&self, h: &ConstraintMatrices, anchor: &ConstraintMatrices, ctx: &McContext) -> Result<Measures> {
        let frame = Frame::new(h)?;
        let (log_fit_e, fit) =
            frame.evaluate(&self.posterior.mean, &self.posterior.cov, None, ctx.stream.child(0), ctx.n_draws)?;
        let center = boundary_point(anchor).theta0;
        let (log_comp_e, comp) =
            frame.evaluate(&center, &self.prior_cov(anchor)?, None, ctx.stream.child(1), ctx.n_draws)?;
        Ok(Measures { log_comp_e, log_fit_e, comp_o: comp.p, fit_o: fit.p, comp_o_se: comp.se, fit_o_se: fit.se })
    }

    fn sampler(&self, anchor: &ConstraintMatrices, posterior: bool, _ctx: &McContext) -> Result<Sampler<'_>> {
        let g = if posterior {
            self.posterior.clone()
        } else {
            GaussianSpec::new(boundary_point(anchor).theta0, self.prior_cov(anchor)?)?
        };
        Ok(Box::new(move |rng| g.sample(rng)))
    }
}

/// Student-t posterior with a Student-t default prior of fixed scale and
/// degrees of freedom, centred on the boundary of the hypothesis.
#[derive(Debug, Clone)]
pub struct StudentFamily {
    pub space: ParameterSpace,
    pub posterior: StudentTSpec,
    pub prior_scale: DMatrix<f64>,
    pub prior_df: f64,
    pub nulls: Vec<f64>,
}

impl StudentFamily {
    fn prior(&self, anchor: &ConstraintMatrices) -> Result<StudentTSpec> {
        StudentTSpec::new(boundary_point(anchor).theta0, self.prior_scale.clone(), self.prior_df)
    }
}

fn t_sampler(t: StudentTSpec) -> Sampler<'static> {
    let l = linalg::cholesky(&t.scale).expect("validated scale").l();
    let chi = ChiSquared::new(t.df).expect("validated df");
    Box::new(move |rng| {
        let w: f64 = chi.sample(rng) / t.df;
        let z = DVector::from_fn(t.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &t.location + (&l * z) / w.sqrt()
    })
}

impl Family for StudentFamily {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn measures(&self, h: &ConstraintMatrices, anchor: &ConstraintMatrices, ctx: &McContext) -> Result<Measures> {
        let frame = Frame::new(h)?;
        let post = &self.posterior;
        let (log_fit_e, fit) =
            frame.evaluate(&post.location, &post.scale, Some(post.df), ctx.stream.child(0), ctx.n_draws)?;
        let prior = self.prior(anchor)?;
        let (log_comp_e, comp) =
            frame.evaluate(&prior.location, &prior.scale, Some(prior.df), ctx.stream.child(1), ctx.n_draws)?;
        Ok(Measures { log_comp_e, log_fit_e, comp_o: comp.p, fit_o: fit.p, comp_o_se: comp.se, fit_o_se: fit.se })
    }

    fn sampler(&self, anchor: &ConstraintMatrices, posterior: bool, _ctx: &McContext) -> Result<Sampler<'_>> {
        let t = if posterior { self.posterior.clone() } else { self.prior(anchor)? };
        Ok(t_sampler(t))
    }

    fn exploratory_null(&self, k: usize) -> f64 {
        self.nulls.get(k).copied().unwrap_or(0.0)
    }
}
