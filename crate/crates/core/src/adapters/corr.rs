//! Hypotheses on correlations, within and across independent groups.
//!
//! The posterior is approximated by a normal distribution of the Fisher
//! transformed correlations. The prior is uniform over correlation matrices
//! in each group; order probabilities under it are the fraction of prior
//! draws satisfying the constraints, and for equality constraints a normal
//! distribution matched to the moments of the transformed prior draws is
//! used.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use statrs::function::beta::beta_reg;

use crate::distributions::rng::{chunked, mc_mean};
use crate::distributions::{GaussianSpec, RandomStream, UniformCorrelation};
use crate::engine::{Family, Frame, McContext, Measures, Sampler};
use crate::error::{Error, Result};
use crate::hypothesis::{ConstraintMatrices, ParameterSpace};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrGroup {
    pub name: String,
    pub n: f64,
    /// Full correlation matrix over the shared variables.
    pub correlations: DMatrix<f64>,
    /// Optional standard errors of the correlations, same layout.
    pub se: Option<DMatrix<f64>>,
}

#[derive(Debug)]
pub struct CorrFamily {
    space: ParameterSpace,
    n_vars: usize,
    n_groups: usize,
    posterior: GaussianSpec,
    /// Moment-matched normal of the transformed prior, keyed by seed and
    /// draw count.
    prior_moments: Mutex<Option<(u64, usize, GaussianSpec)>>,
}

/// Lower-triangle pairs `(row, col)` in column order.
fn pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|c| (c + 1..d).map(move |r| (r, c))).collect()
}

/// Stream shared by every hypothesis for prior draws, so their prior
/// probabilities come from the same sample.
fn prior_stream(seed: u64) -> RandomStream {
    RandomStream::new(seed, u64::MAX)
}

impl CorrFamily {
    pub fn new(variables: &[String], groups: &[CorrGroup]) -> Result<Self> {
        let d = variables.len();
        if d < 2 {
            return Err(Error::data("correlations need at least two variables"));
        }
        if groups.is_empty() {
            return Err(Error::data("no groups"));
        }
        let pp = pairs(d);
        let multi = groups.len() > 1;
        let mut names = Vec::new();
        let mut aliases = Vec::new();
        let mut mean = Vec::new();
        let mut var = Vec::new();
        for g in groups {
            if g.correlations.shape() != (d, d) {
                return Err(Error::data(format!("correlation matrix of group {} is not {d}×{d}", g.name)));
            }
            if g.se.is_none() && !(g.n > 4.0) {
                return Err(Error::data(format!("group {} needs more than 4 observations", g.name)));
            }
            let suffix = if multi { format!("_in_{}", g.name) } else { String::new() };
            for &(r, c) in &pp {
                let rho = g.correlations[(r, c)];
                if !(rho.abs() < 1.0) {
                    return Err(Error::data(format!(
                        "correlation between {} and {} in group {} must lie strictly between -1 and 1",
                        variables[r], variables[c], g.name
                    )));
                }
                names.push(format!("{}_with_{}{suffix}", variables[r], variables[c]));
                aliases.push(format!("{}_with_{}{suffix}", variables[c], variables[r]));
                mean.push(rho.atanh());
                var.push(match &g.se {
                    Some(se) => {
                        let s = se[(r, c)] / (1.0 - rho * rho);
                        if !(s > 0.0) || !s.is_finite() {
                            return Err(Error::data("standard errors must be positive"));
                        }
                        s * s
                    }
                    None => 1.0 / (g.n - 3.0),
                });
            }
        }
        let mut space = ParameterSpace::new(names)?;
        for (i, a) in aliases.into_iter().enumerate() {
            space = space.with_alias(a, i)?;
        }
        let posterior = GaussianSpec::new(DVector::from_vec(mean), DMatrix::from_diagonal(&DVector::from_vec(var)))?;
        Ok(CorrFamily { space, n_vars: d, n_groups: groups.len(), posterior, prior_moments: Mutex::new(None) })
    }

    /// Posterior mean on the Fisher scale.
    pub fn fisher_mean(&self) -> &DVector<f64> {
        &self.posterior.mean
    }

    /// The hypothesis on the Fisher scale. Only rows comparing one
    /// correlation with a constant or two correlations with each other keep
    /// their linear form there.
    pub fn to_fisher(&self, h: &ConstraintMatrices) -> Result<ConstraintMatrices> {
        let p = self.space.len();
        let convert = |m: &DMatrix<f64>, rhs: &DVector<f64>| -> Result<Vec<(Vec<f64>, f64)>> {
            (0..m.nrows())
                .map(|i| {
                    let row: Vec<f64> = m.row(i).iter().copied().collect();
                    let nz: Vec<usize> = (0..p).filter(|&j| row[j] != 0.0).collect();
                    match nz.as_slice() {
                        [a] => {
                            let value = rhs[i] / row[*a];
                            if !(value.abs() < 1.0) {
                                return Err(Error::Unsupported(format!(
                                    "`{}` compares a correlation with {value}, outside (-1, 1)",
                                    h.source
                                )));
                            }
                            let s = row[*a].signum();
                            let mut out = vec![0.0; p];
                            out[*a] = s;
                            Ok((out, s * value.atanh()))
                        }
                        [a, b] if rhs[i] == 0.0 && row[*a] == -row[*b] => Ok((row, 0.0)),
                        _ => Err(Error::Unsupported(format!(
                            "`{}`: correlation constraints must compare one correlation with a constant or two correlations with each other",
                            h.source
                        ))),
                    }
                })
                .collect()
        };
        let eq = convert(&h.re, &h.r_e)?;
        let ord = convert(&h.ro, &h.r_o)?;
        Ok(ConstraintMatrices::from_rows(p, &eq, &ord).with_source(h.source.clone()))
    }

    fn sample_prior(&self, dists: &[UniformCorrelation], rng: &mut ChaCha20Rng) -> DVector<f64> {
        let pp = pairs(self.n_vars);
        let mut out = Vec::with_capacity(self.space.len());
        for d in dists {
            let c = d.sample(rng);
            out.extend(pp.iter().map(|&(r, cc)| c[(r, cc)]));
        }
        DVector::from_vec(out)
    }

    /// Prior probability of a single order row, which has a closed form:
    /// each correlation is marginally `2 B - 1` with `B ~ Beta(d/2, d/2)`,
    /// and any two correlations are exchangeable.
    fn exact_single_row(&self, h: &ConstraintMatrices) -> Option<f64> {
        if h.n_equalities() != 0 || h.n_orders() != 1 {
            return None;
        }
        let row = h.ro.row(0);
        let nz: Vec<usize> = (0..row.len()).filter(|&j| row[j] != 0.0).collect();
        match nz.as_slice() {
            [a] => {
                let v = h.r_o[0] / row[*a];
                let half = self.n_vars as f64 / 2.0;
                let below = beta_reg(half, half, ((v + 1.0) / 2.0).clamp(0.0, 1.0));
                Some(if row[*a] > 0.0 { 1.0 - below } else { below })
            }
            [_, _] => Some(0.5),
            _ => None,
        }
    }

    fn prior_dists(&self) -> Result<Vec<UniformCorrelation>> {
        (0..self.n_groups).map(|_| UniformCorrelation::new(self.n_vars)).collect()
    }

    /// Normal distribution with the mean and covariance of the Fisher
    /// transformed prior draws.
    fn prior_gaussian(&self, seed: u64, n: usize) -> Result<GaussianSpec> {
        let mut cache = self.prior_moments.lock().expect("cache lock");
        if let Some((s, m, g)) = cache.as_ref() {
            if *s == seed && *m == n {
                return Ok(g.clone());
            }
        }
        let dists = self.prior_dists()?;
        let dim = self.space.len();
        let parts = chunked(prior_stream(seed), n, |rng, len| {
            let mut sum = DVector::zeros(dim);
            let mut sq = DMatrix::zeros(dim, dim);
            for _ in 0..len {
                let z = self.sample_prior(&dists, rng).map(f64::atanh);
                sum += &z;
                sq += &z * z.transpose();
            }
            (sum, sq)
        });
        let mut sum = DVector::zeros(dim);
        let mut sq = DMatrix::zeros(dim, dim);
        for (s, q) in parts {
            sum += s;
            sq += q;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let cov = linalg::symmetrize(&((sq - &mean * mean.transpose() * nf) / (nf - 1.0)));
        let g = GaussianSpec::new(mean, cov)?;
        *cache = Some((seed, n, g.clone()));
        Ok(g)
    }
}

impl Family for CorrFamily {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn check(&self, h: &ConstraintMatrices) -> Result<()> {
        self.to_fisher(h).map(|_| ())
    }

    fn measures(&self, h: &ConstraintMatrices, _anchor: &ConstraintMatrices, ctx: &McContext) -> Result<Measures> {
        let zh = self.to_fisher(h)?;
        let frame = Frame::new(&zh)?;
        let (log_fit_e, fit) =
            frame.evaluate(&self.posterior.mean, &self.posterior.cov, None, ctx.stream.child(0), ctx.n_draws)?;
        let (log_comp_e, comp_o, comp_o_se) = if h.n_equalities() > 0 {
            let g = self.prior_gaussian(ctx.seed, ctx.n_draws)?;
            let (ld, pr) = frame.evaluate(&g.mean, &g.cov, None, ctx.stream.child(1), ctx.n_draws)?;
            (ld, pr.p, pr.se)
        } else if let Some(p) = frame.region.trivial() {
            (0.0, p, 0.0)
        } else if let Some(p) = self.exact_single_row(h) {
            (0.0, p, 0.0)
        } else {
            let dists = self.prior_dists()?;
            let acc = mc_mean(prior_stream(ctx.seed), ctx.n_draws, |rng| {
                let rho = self.sample_prior(&dists, rng);
                let v = &h.ro * rho - &h.r_o;
                if v.iter().all(|x| *x > 0.0) {
                    1.0
                } else {
                    0.0
                }
            });
            (0.0, acc.mean(), acc.se())
        };
        Ok(Measures { log_comp_e, log_fit_e, comp_o, fit_o: fit.p, comp_o_se, fit_o_se: fit.se })
    }

    fn sampler(&self, _anchor: &ConstraintMatrices, posterior: bool, _ctx: &McContext) -> Result<Sampler<'_>> {
        if posterior {
            let l = self.posterior.chol_l();
            let mean = self.posterior.mean.clone();
            Ok(Box::new(move |rng: &mut ChaCha20Rng| {
                let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                (&mean + &l * z).map(f64::tanh)
            }))
        } else {
            let dists = self.prior_dists()?;
            Ok(Box::new(move |rng: &mut ChaCha20Rng| self.sample_prior(&dists, rng)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::parse_one;
    use approx::assert_relative_eq;

    fn single(r: f64, n: f64) -> CorrFamily {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]);
        CorrFamily::new(&["a".into(), "b".into()], &[CorrGroup { name: "g".into(), n, correlations: c, se: None }])
            .unwrap()
    }

    fn ctx() -> McContext {
        McContext { seed: 5, stream: RandomStream::new(5, 1), n_draws: 100_000 }
    }

    #[test]
    fn names_and_aliases() {
        let f = single(0.3, 30.0);
        assert_eq!(f.space().names(), ["b_with_a"]);
        assert_eq!(f.space().index_of("a_with_b"), Some(0));
    }

    #[test]
    fn fisher_mean_round_trips() {
        let f = single(0.37, 30.0);
        assert_relative_eq!(f.fisher_mean()[0].tanh(), 0.37, epsilon = 1e-12);
    }

    #[test]
    fn uniform_marginal_gives_half() {
        let f = single(0.0, 30.0);
        let pos = parse_one("a_with_b > 0", f.space()).unwrap();
        let neg = parse_one("a_with_b < 0", f.space()).unwrap();
        let mp = f.measures(&pos, &pos, &ctx()).unwrap();
        let mn = f.measures(&neg, &neg, &ctx()).unwrap();
        assert_relative_eq!(mp.comp_o, 0.5, epsilon = 1e-12);
        assert_relative_eq!(mp.fit_o, 0.5, epsilon = 1e-12);
        assert_relative_eq!(mp.bf() / mn.bf(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_bounds_map_through_atanh() {
        let f = single(0.5, 40.0);
        let h = parse_one("a_with_b > 0.3", f.space()).unwrap();
        let z = f.to_fisher(&h).unwrap();
        assert_relative_eq!(z.r_o[0], 0.3f64.atanh(), epsilon = 1e-15);
        let m = f.measures(&h, &h, &ctx()).unwrap();
        // uniform prior: P(ρ > 0.3) = 0.35
        assert_relative_eq!(m.comp_o, 0.35, epsilon = 1e-12);
    }

    #[test]
    fn single_row_prior_matches_onion_draws() {
        let vars: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let g = |name: &str| CorrGroup { name: name.into(), n: 30.0, correlations: DMatrix::identity(4, 4), se: None };
        let f = CorrFamily::new(&vars, &[g("g1"), g("g2")]).unwrap();
        let dists = f.prior_dists().unwrap();
        for text in [
            "b_with_a_in_g1 > 0.4",
            "d_with_c_in_g2 < -0.2",
            "b_with_a_in_g1 > c_with_a_in_g1",
            "d_with_b_in_g1 < d_with_b_in_g2",
        ] {
            let h = parse_one(text, f.space()).unwrap();
            let exact = f.exact_single_row(&h).unwrap();
            let acc = mc_mean(RandomStream::new(9, 3), 200_000, |rng| {
                let rho = f.sample_prior(&dists, rng);
                f64::from(u8::from((&h.ro * rho - &h.r_o)[0] > 0.0))
            });
            assert!((acc.mean() - exact).abs() < 4.0 * acc.se(), "{text}: {} vs {exact}", acc.mean());
        }
    }

    #[test]
    fn equality_density_uses_matched_normal() {
        let f = single(0.1, 50.0);
        let h = parse_one("a_with_b = 0", f.space()).unwrap();
        let m = f.measures(&h, &h, &ctx()).unwrap();
        // z = atanh(ρ), ρ uniform: variance π²/12
        let sd = (std::f64::consts::PI.powi(2) / 12.0).sqrt();
        let want = -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln();
        assert_relative_eq!(m.log_comp_e, want, epsilon = 0.01);
        assert!(m.bf() > 1.0);
    }

    #[test]
    fn rejects_nonlinear_rows() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.1, 0.2, 1.0, 0.3, 0.1, 0.3, 1.0]);
        let f = CorrFamily::new(
            &["a".into(), "b".into(), "c".into()],
            &[CorrGroup { name: "g".into(), n: 30.0, correlations: c, se: None }],
        )
        .unwrap();
        let h = parse_one("a_with_b + a_with_c > 0", f.space()).unwrap();
        assert!(matches!(f.check(&h), Err(Error::Unsupported(_))));
        let h = parse_one("a_with_b > a_with_c", f.space()).unwrap();
        assert!(f.check(&h).is_ok());
    }
}
