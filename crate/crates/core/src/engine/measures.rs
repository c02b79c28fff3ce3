use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative fit and complexity of one hypothesis against the unconstrained
/// model. Densities are kept on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measures {
    /// Log prior density of the equality-restricted parameters at `rE`.
    pub log_comp_e: f64,
    /// Log posterior density of the equality-restricted parameters at `rE`.
    pub log_fit_e: f64,
    /// Prior probability of the order region given the equalities.
    pub comp_o: f64,
    /// Posterior probability of the order region given the equalities.
    pub fit_o: f64,
    pub comp_o_se: f64,
    pub fit_o_se: f64,
}

impl Measures {
    /// The unconstrained hypothesis: every measure equals one.
    pub fn unit() -> Self {
        Measures { log_comp_e: 0.0, log_fit_e: 0.0, comp_o: 1.0, fit_o: 1.0, comp_o_se: 0.0, fit_o_se: 0.0 }
    }

    /// Copy with the equality part reset to one.
    pub fn with_unit_equalities(&self) -> Self {
        Measures { log_comp_e: 0.0, log_fit_e: 0.0, ..*self }
    }

    pub fn comp_e(&self) -> f64 {
        self.log_comp_e.exp()
    }

    pub fn fit_e(&self) -> f64 {
        self.log_fit_e.exp()
    }

    pub fn log_bf_e(&self) -> f64 {
        self.log_fit_e - self.log_comp_e
    }

    pub fn log_bf_o(&self) -> f64 {
        if self.fit_o == self.comp_o {
            return 0.0;
        }
        self.fit_o.ln() - self.comp_o.ln()
    }

    /// Log Bayes factor against the unconstrained model.
    pub fn log_bf(&self) -> f64 {
        self.log_bf_e() + self.log_bf_o()
    }

    pub fn bf_e(&self) -> f64 {
        self.log_bf_e().exp()
    }

    pub fn bf_o(&self) -> f64 {
        self.log_bf_o().exp()
    }

    pub fn bf(&self) -> f64 {
        self.log_bf().exp()
    }

    /// Largest Monte Carlo standard error among the probabilities.
    pub fn max_se(&self) -> f64 {
        self.comp_o_se.max(self.fit_o_se)
    }
}

/// Posterior hypothesis probabilities `w_i BF_i / Σ_j w_j BF_j`, computed in
/// the log domain. Hypotheses with zero weight get exactly zero.
pub fn posterior_probs(log_bfs: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if log_bfs.len() != weights.len() {
        return Err(Error::invalid("one prior weight per hypothesis is required"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("prior weights must be finite and non-negative"));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::invalid("prior weights are all zero"));
    }
    let terms: Vec<f64> =
        log_bfs.iter().zip(weights).map(|(lb, w)| if *w == 0.0 { f64::NEG_INFINITY } else { w.ln() + lb }).collect();
    if terms.iter().any(|t| t.is_nan() || *t == f64::INFINITY) {
        return Err(Error::numerical("Bayes factors are not finite"));
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::numerical("all weighted Bayes factors are zero"));
    }
    let total: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    Ok(terms.iter().map(|t| if *t == f64::NEG_INFINITY { 0.0 } else { (t - max).exp() / total }).collect())
}

/// Pairwise Bayes factors `B_ij = BF_i / BF_j`.
pub fn evidence_matrix(log_bfs: &[f64]) -> DMatrix<f64> {
    let k = log_bfs.len();
    DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { (log_bfs[i] - log_bfs[j]).exp() })
}

/// Log of the arithmetic mean of `exp(xs)`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + (s / xs.len() as f64).ln()
}
