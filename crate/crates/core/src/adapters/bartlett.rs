//! Equality and order hypotheses on group variances.
//!
//! Equalities merge groups into clusters with a common variance. The
//! equality part of the Bayes factor is a ratio of fractional marginal
//! likelihoods; the order part compares inverse-gamma distributed cluster
//! variances.

use nalgebra::DVector;
use rand_chacha::ChaCha20Rng;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::distributions::rng::mc_mean;
use crate::distributions::InverseGamma;
use crate::engine::{ExploratorySet, Family, McContext, Measures, Sampler};
use crate::error::{Error, Result};
use crate::hypothesis::{ConstraintMatrices, ParameterSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceGroup {
    pub name: String,
    pub n: f64,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct BartlettFamily {
    space: ParameterSpace,
    n: Vec<f64>,
    ss: Vec<f64>,
    /// Group fractions `2 / n_j`.
    b: Vec<f64>,
    pooled: f64,
}

impl BartlettFamily {
    pub fn new(groups: &[VarianceGroup]) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::data("comparing variances needs at least two groups"));
        }
        for g in groups {
            if !(g.n >= 3.0) {
                return Err(Error::data(format!("group {} has {} observations; at least 3 are needed", g.name, g.n)));
            }
            if !(g.variance > 0.0) || !g.variance.is_finite() {
                return Err(Error::data(format!("group {} has a non-positive variance", g.name)));
            }
        }
        let space = ParameterSpace::new(groups.iter().map(|g| g.name.clone()))?;
        let n: Vec<f64> = groups.iter().map(|g| g.n).collect();
        let ss: Vec<f64> = groups.iter().map(|g| (g.n - 1.0) * g.variance).collect();
        let b = n.iter().map(|n| 2.0 / n).collect();
        let pooled = ss.iter().sum::<f64>() / n.iter().map(|n| n - 1.0).sum::<f64>();
        Ok(BartlettFamily { space, n, ss, b, pooled })
    }

    fn n_groups(&self) -> usize {
        self.n.len()
    }

    /// Log marginal likelihood of the groups in `clusters`, each cluster
    /// sharing one variance, with group sizes and sums of squares scaled by
    /// `frac`.
    fn log_marginal(&self, clusters: &[Vec<usize>], frac: &[f64]) -> f64 {
        clusters
            .iter()
            .map(|c| {
                let n: Vec<f64> = c.iter().map(|&j| frac[j] * self.n[j]).collect();
                let ss: f64 = c.iter().map(|&j| frac[j] * self.ss[j]).sum();
                let df = n.iter().sum::<f64>() - c.len() as f64;
                -0.5 * df * std::f64::consts::PI.ln() - 0.5 * n.iter().map(|v| v.ln()).sum::<f64>() + ln_gamma(df / 2.0)
                    - 0.5 * df * ss.ln()
            })
            .sum()
    }

    fn singletons(&self) -> Vec<Vec<usize>> {
        (0..self.n_groups()).map(|j| vec![j]).collect()
    }

    /// Posterior (or prior) distribution of a cluster's common variance.
    fn cluster_dist(&self, c: &[usize], posterior: bool) -> Result<InverseGamma> {
        let k = c.len() as f64;
        if posterior {
            let n: f64 = c.iter().map(|&j| self.n[j]).sum();
            let ss: f64 = c.iter().map(|&j| self.ss[j]).sum();
            InverseGamma::new((n - k) / 2.0, ss / 2.0)
        } else {
            let bn: f64 = c.iter().map(|&j| self.b[j] * self.n[j]).sum();
            let scale: f64 = c.iter().map(|&j| self.b[j] * (self.n[j] - 1.0) * self.pooled).sum();
            InverseGamma::new((bn - k) / 2.0, scale / 2.0)
        }
    }

    /// Probability that the cluster variances satisfy `orders` (pairs
    /// `(larger, smaller)`).
    fn order_prob(
        &self,
        clusters: &[Vec<usize>],
        orders: &[(usize, usize)],
        posterior: bool,
        ctx: &McContext,
        tag: u64,
    ) -> Result<(f64, f64)> {
        if orders.is_empty() {
            return Ok((1.0, 0.0));
        }
        let dists: Vec<InverseGamma> =
            clusters.iter().map(|c| self.cluster_dist(c, posterior)).collect::<Result<_>>()?;
        if let [(hi, lo)] = orders {
            // 1/X ~ Gamma(shape, rate = scale); X_hi > X_lo iff a Beta variate
            // falls below scale_hi / (scale_hi + scale_lo)
            let (a, b) = (&dists[*hi], &dists[*lo]);
            let x = a.scale / (a.scale + b.scale);
            return Ok((beta_reg(a.shape, b.shape, x), 0.0));
        }
        let acc = mc_mean(ctx.stream.child(tag), ctx.n_draws, |rng| {
            let v: Vec<f64> = dists.iter().map(|d| d.sample(rng)).collect();
            if orders.iter().all(|&(hi, lo)| v[hi] > v[lo]) {
                1.0
            } else {
                0.0
            }
        });
        Ok((acc.mean(), acc.se()))
    }
}

/// The pair of groups a row compares, as `(plus, minus)`, if the row has the
/// form `σ²_a - σ²_b` with right-hand side zero.
fn pair(row: &[f64], rhs: f64) -> Option<(usize, usize)> {
    let nz: Vec<usize> = (0..row.len()).filter(|&j| row[j] != 0.0).collect();
    match nz.as_slice() {
        [a, b] if rhs == 0.0 && row[*a] == -row[*b] => {
            if row[*a] > 0.0 {
                Some((*a, *b))
            } else {
                Some((*b, *a))
            }
        }
        _ => None,
    }
}

fn rows(m: &nalgebra::DMatrix<f64>) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..m.nrows()).map(move |i| m.row(i).iter().copied().collect())
}

struct Structure {
    clusters: Vec<Vec<usize>>,
    /// Order constraints between clusters as `(larger, smaller)`.
    orders: Vec<(usize, usize)>,
}

impl BartlettFamily {
    fn structure(&self, h: &ConstraintMatrices) -> Result<Structure> {
        let p = self.n_groups();
        let unsupported = || {
            Error::Unsupported(
                "variance hypotheses may only equate or order two group variances, e.g. `A = B` or `A < B`".into(),
            )
        };
        let mut parent: Vec<usize> = (0..p).collect();
        fn find(parent: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while parent[r] != r {
                r = parent[r];
            }
            parent[i] = r;
            r
        }
        for (row, rhs) in rows(&h.re).zip(h.r_e.iter()) {
            let (a, b) = pair(&row, *rhs).ok_or_else(unsupported)?;
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        let roots: Vec<usize> = (0..p).map(|j| find(&mut parent, j)).collect();
        let mut ids: Vec<usize> = roots.clone();
        ids.sort_unstable();
        ids.dedup();
        let cluster_of: Vec<usize> = roots.iter().map(|r| ids.binary_search(r).unwrap()).collect();
        let mut clusters = vec![Vec::new(); ids.len()];
        for (j, &c) in cluster_of.iter().enumerate() {
            clusters[c].push(j);
        }
        let mut orders = Vec::new();
        for (row, rhs) in rows(&h.ro).zip(h.r_o.iter()) {
            let (a, b) = pair(&row, *rhs).ok_or_else(unsupported)?;
            let o = (cluster_of[a], cluster_of[b]);
            if o.0 == o.1 {
                return Err(Error::Infeasible(format!("`{}` orders two variances it also sets equal", h.source)));
            }
            if !orders.contains(&o) {
                orders.push(o);
            }
        }
        Ok(Structure { clusters, orders })
    }
}

impl Family for BartlettFamily {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn check(&self, h: &ConstraintMatrices) -> Result<()> {
        self.structure(h).map(|_| ())
    }

    fn measures(&self, h: &ConstraintMatrices, _anchor: &ConstraintMatrices, ctx: &McContext) -> Result<Measures> {
        let s = self.structure(h)?;
        let ones = vec![1.0; self.n_groups()];
        let (log_fit_e, log_comp_e) = if h.n_equalities() == 0 {
            (0.0, 0.0)
        } else {
            let single = self.singletons();
            (
                self.log_marginal(&s.clusters, &ones) - self.log_marginal(&single, &ones),
                self.log_marginal(&s.clusters, &self.b) - self.log_marginal(&single, &self.b),
            )
        };
        let (fit_o, fit_o_se) = self.order_prob(&s.clusters, &s.orders, true, ctx, 0)?;
        let (comp_o, comp_o_se) = self.order_prob(&s.clusters, &s.orders, false, ctx, 1)?;
        Ok(Measures { log_comp_e, log_fit_e, comp_o, fit_o, comp_o_se, fit_o_se })
    }

    fn sampler(&self, _anchor: &ConstraintMatrices, posterior: bool, _ctx: &McContext) -> Result<Sampler<'_>> {
        let dists: Vec<InverseGamma> =
            (0..self.n_groups()).map(|j| self.cluster_dist(&[j], posterior)).collect::<Result<_>>()?;
        Ok(Box::new(move |rng: &mut ChaCha20Rng| {
            DVector::from_iterator(dists.len(), dists.iter().map(|d| d.sample(rng)))
        }))
    }

    fn exploratory_sets(&self) -> Option<Vec<ExploratorySet>> {
        let p = self.n_groups();
        let eq: Vec<(Vec<f64>, f64)> = (1..p)
            .map(|j| {
                let mut row = vec![0.0; p];
                row[j - 1] = 1.0;
                row[j] = -1.0;
                (row, 0.0)
            })
            .collect();
        let source = self.space.names().join(" = ");
        Some(vec![ExploratorySet {
            name: "variances".into(),
            labels: vec!["homogeneity".into(), "no homogeneity".into()],
            hypotheses: vec![
                ConstraintMatrices::from_rows(p, &eq, &[]).with_source(source),
                ConstraintMatrices::unconstrained(p).with_source("unconstrained"),
            ],
        }])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RandomStream;
    use crate::hypothesis::parse_one;
    use approx::assert_relative_eq;

    fn app() -> BartlettFamily {
        let g = |name: &str, v: f64| VarianceGroup { name: name.into(), n: 17.0, variance: v };
        BartlettFamily::new(&[g("Controls", 15.52), g("TS", 20.07), g("ADHD", 38.81)]).unwrap()
    }

    fn ctx() -> McContext {
        McContext { seed: 3, stream: RandomStream::new(3, 1), n_draws: 100_000 }
    }

    #[test]
    fn homogeneity_bayes_factor() {
        let f = app();
        let h = parse_one("Controls = TS = ADHD", f.space()).unwrap();
        let m = f.measures(&h, &h, &ctx()).unwrap();
        assert_relative_eq!(m.bf(), 4.0819, max_relative = 1e-3);
        assert_relative_eq!(m.bf() / (m.bf() + 1.0), 0.803, epsilon = 5e-4);
    }

    #[test]
    fn marginal_matches_direct_integration() {
        // one cluster, flat prior on the mean and 1/σ² on the variance:
        // ∫ (2πσ²)^{-n/2} exp(-(SS + n(x̄-μ)²)/2σ²) dμ σ^{-2} dσ², integrated
        // numerically over log σ²
        let f = BartlettFamily::new(&[
            VarianceGroup { name: "a".into(), n: 6.0, variance: 2.0 },
            VarianceGroup { name: "b".into(), n: 5.0, variance: 3.0 },
        ])
        .unwrap();
        let (n, ss) = (6.0, 10.0);
        let mut acc = 0.0;
        let h = 1e-4;
        let mut t = -20.0;
        while t < 20.0 {
            let s2 = f64::exp(t);
            let log_int = -(n - 1.0) / 2.0 * (2.0 * std::f64::consts::PI * s2).ln() - 0.5 * n.ln() - ss / (2.0 * s2);
            acc += log_int.exp() * h;
            t += h;
        }
        assert_relative_eq!(f.log_marginal(&[vec![0]], &[1.0, 1.0]), acc.ln(), epsilon = 1e-6);
    }

    #[test]
    fn single_order_is_exact_and_symmetric() {
        let g = |name: &str| VarianceGroup { name: name.into(), n: 12.0, variance: 4.0 };
        let f = BartlettFamily::new(&[g("a"), g("b")]).unwrap();
        let h = parse_one("a > b", f.space()).unwrap();
        let m = f.measures(&h, &h, &ctx()).unwrap();
        assert_relative_eq!(m.fit_o, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.comp_o, 0.5, epsilon = 1e-12);
        let eq = parse_one("a = b", f.space()).unwrap();
        assert!(f.measures(&eq, &eq, &ctx()).unwrap().bf() > 1.0);
    }

    #[test]
    fn exact_order_matches_sampling() {
        let f = app();
        let h = parse_one("Controls = TS < ADHD", f.space()).unwrap();
        let s = f.structure(&h).unwrap();
        let exact = f.order_prob(&s.clusters, &s.orders, true, &ctx(), 0).unwrap().0;
        let dists: Vec<InverseGamma> = s.clusters.iter().map(|c| f.cluster_dist(c, true).unwrap()).collect();
        let (hi, lo) = s.orders[0];
        let acc = mc_mean(RandomStream::new(9, 9), 200_000, |rng| {
            if dists[hi].sample(rng) > dists[lo].sample(rng) {
                1.0
            } else {
                0.0
            }
        });
        assert!((exact - acc.mean()).abs() < 4.0 * acc.se());
    }

    #[test]
    fn rejects_general_rows() {
        let f = app();
        let h = parse_one("Controls > 2*TS", f.space()).unwrap();
        assert!(matches!(f.check(&h), Err(Error::Unsupported(_))));
        let h = parse_one("Controls > 1", f.space()).unwrap();
        assert!(f.check(&h).is_err());
    }
}
