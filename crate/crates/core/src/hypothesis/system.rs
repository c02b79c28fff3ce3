use serde::Serialize;

use super::{ConstraintMatrices, ParameterSpace};
use crate::error::{Error, Result};
use crate::lp;

/// The hypotheses under comparison, optionally followed by a complement.
#[derive(Debug, Clone)]
pub struct HypothesisSystem {
    pub hypotheses: Vec<ConstraintMatrices>,
    pub labels: Vec<String>,
    /// When set, the last label names the complement, which has no matrices.
    pub complement_included: bool,
    pub prior_weights: Vec<f64>,
}

impl HypothesisSystem {
    /// Number of hypotheses including the complement.
    pub fn len(&self) -> usize {
        self.hypotheses.len() + usize::from(self.complement_included)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replaces the prior weights; they are rescaled to sum to one.
    pub fn with_prior_weights(mut self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} prior weights given for {} hypotheses{}",
                weights.len(),
                self.len(),
                if self.complement_included { " (including the complement)" } else { "" }
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("prior weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("prior weights are all zero"));
        }
        self.prior_weights = weights.iter().map(|w| w / total).collect();
        Ok(self)
    }

    /// Human-readable description of hypothesis `i`.
    pub fn description(&self, i: usize) -> &str {
        if i < self.hypotheses.len() {
            &self.hypotheses[i].source
        } else {
            "complement"
        }
    }
}

/// Whether two single-row order hypotheses are opposite half-spaces with a
/// common boundary, so that together with that boundary they exhaust the space.
fn opposite_half_spaces(a: &ConstraintMatrices, b: &ConstraintMatrices) -> bool {
    if !(a.is_order_only() && b.is_order_only() && a.n_orders() == 1 && b.n_orders() == 1) {
        return false;
    }
    let (ra, rb) = (a.ro.row(0), b.ro.row(0));
    let scale = ra.amax().max(rb.amax()).max(1.0);
    // rows are normalized to a unit lead, so opposite rows are exact negatives
    (ra + rb).amax() <= 1e-12 * scale && (a.r_o[0] + b.r_o[0]).abs() <= 1e-12 * a.r_o[0].abs().max(1.0)
}

/// Whether the hypotheses jointly cover the parameter space, detected exactly
/// for the `θ < c; θ > c` pattern (with or without `θ = c`).
pub fn covers_space(hyps: &[ConstraintMatrices]) -> bool {
    hyps.iter().enumerate().any(|(i, a)| hyps[i + 1..].iter().any(|b| opposite_half_spaces(a, b)))
}

/// Builds the hypothesis system, appending a complement unless the hypotheses
/// already cover the space. Weights default to equal.
pub fn add_complement(hyps: Vec<ConstraintMatrices>, _space: &ParameterSpace) -> HypothesisSystem {
    let complement = !hyps.is_empty() && !covers_space(&hyps);
    let k = hyps.len() + usize::from(complement);
    let labels = (1..=k).map(|i| format!("H{i}")).collect();
    HypothesisSystem {
        hypotheses: hyps,
        labels,
        complement_included: complement,
        prior_weights: vec![1.0 / k.max(1) as f64; k],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestingWarning {
    /// Index of the hypothesis whose order region lies inside the other's.
    pub inner: usize,
    pub outer: usize,
}

impl std::fmt::Display for NestingWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "order hypothesis H{} is nested in H{}; nested order hypotheses make the comparison hard to interpret",
            self.inner + 1,
            self.outer + 1
        )
    }
}

/// Pairs of order-only hypotheses where one cone is contained in the other.
pub fn warn_nested_orders(hyps: &[ConstraintMatrices]) -> Vec<NestingWarning> {
    let mut out = Vec::new();
    for (i, a) in hyps.iter().enumerate() {
        if !a.is_order_only() {
            continue;
        }
        for (j, b) in hyps.iter().enumerate() {
            if i == j || !b.is_order_only() {
                continue;
            }
            if lp::cone_contained(&a.ro, &a.r_o, &b.ro, &b.r_o) {
                out.push(NestingWarning { inner: i, outer: j });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn space(names: &[&str]) -> ParameterSpace {
        ParameterSpace::new(names.iter().copied()).unwrap()
    }

    #[test]
    fn complement_added_for_partial_cover() {
        let s = space(&["mu"]);
        let sys = add_complement(parse("mu = 5; mu > 5", &s).unwrap(), &s);
        assert!(sys.complement_included);
        assert_eq!(sys.len(), 3);
        assert_eq!(sys.labels, vec!["H1", "H2", "H3"]);
        assert_eq!(sys.description(2), "complement");
    }

    #[test]
    fn exhaustive_triad_has_no_complement() {
        let s = space(&["mu"]);
        let sys = add_complement(parse("mu=0; mu<0; mu>0", &s).unwrap(), &s);
        assert!(!sys.complement_included);
        assert_eq!(sys.len(), 3);
    }

    #[test]
    fn no_hypotheses_is_exploratory_only() {
        let s = space(&["mu"]);
        let sys = add_complement(Vec::new(), &s);
        assert!(sys.is_empty());
    }

    #[test]
    fn weights_validated_and_normalized() {
        let s = space(&["mu"]);
        let sys = add_complement(parse("mu = 5; mu > 5", &s).unwrap(), &s);
        assert!(sys.clone().with_prior_weights(&[0.5, 0.5]).is_err());
        assert!(sys.clone().with_prior_weights(&[0.0, 0.0, 0.0]).is_err());
        assert!(sys.clone().with_prior_weights(&[1.0, -1.0, 1.0]).is_err());
        let w = sys.with_prior_weights(&[1.0, 1.0, 2.0]).unwrap().prior_weights;
        assert_eq!(w, vec![0.25, 0.25, 0.5]);
    }

    #[test]
    fn nested_orders() {
        let s = space(&["a", "b", "c"]);
        let h = parse("a>b>c; a>b & a>c", &s).unwrap();
        assert_eq!(warn_nested_orders(&h), vec![NestingWarning { inner: 0, outer: 1 }]);
        let h = parse("a>b; b>a", &s).unwrap();
        assert!(warn_nested_orders(&h).is_empty());
        let h = parse("a>0; a>1", &s).unwrap();
        assert_eq!(warn_nested_orders(&h), vec![NestingWarning { inner: 1, outer: 0 }]);
    }
}
