//! Bayes factors, posterior hypothesis probabilities and the exploratory
//! tests, for any model that implements [`Family`].

pub mod complement;
pub mod family;
mod measures;

use nalgebra::DMatrix;
use serde::Serialize;

pub use complement::{complement_anchor, complement_measures};
pub use family::{constraint_count, Family, Frame, GaussianFamily, McContext, Sampler, StudentFamily};
pub use measures::{evidence_matrix, log_mean_exp, posterior_probs, Measures};

use crate::distributions::RandomStream;
use crate::error::{Error, Result};
use crate::hypothesis::{warn_nested_orders, ConstraintMatrices, HypothesisSystem};

pub const DEFAULT_SEED: u64 = 20191116;
pub const DEFAULT_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub seed: u64,
    pub n_draws: usize,
    /// Largest acceptable Monte Carlo standard error on a probability.
    pub se_target: f64,
    /// Rerun once with ten times the draws when the target is missed.
    pub escalate: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { seed: DEFAULT_SEED, n_draws: DEFAULT_DRAWS, se_target: 0.002, escalate: true }
    }
}

/// Stream of confirmatory hypothesis `i` (the complement is `len`).
fn hypothesis_stream(seed: u64, i: usize) -> RandomStream {
    RandomStream::new(seed, i as u64 + 1)
}

fn exploratory_stream(seed: u64, set: usize, j: usize) -> RandomStream {
    RandomStream::new(seed, 1000 + set as u64 * 3 + j as u64)
}

/// Measures together with the draw count that produced them.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Evaluated {
    pub measures: Measures,
    pub n_draws: usize,
}

/// Runs `f`, repeating once with ten times the draws if the standard error
/// target is missed. Returns a warning when it is still missed.
fn with_escalation(
    cfg: &EngineConfig,
    stream: RandomStream,
    label: &str,
    f: impl Fn(&McContext) -> Result<Measures>,
) -> Result<(Evaluated, Option<String>)> {
    let mut ctx = McContext { seed: cfg.seed, stream, n_draws: cfg.n_draws };
    let mut m = f(&ctx)?;
    if m.max_se() > cfg.se_target && cfg.escalate {
        ctx.n_draws = cfg.n_draws.saturating_mul(10);
        m = f(&ctx)?;
    }
    let warning = (m.max_se() > cfg.se_target).then(|| {
        format!(
            "{label}: Monte Carlo standard error {:.4} exceeds {} after {} draws",
            m.max_se(),
            cfg.se_target,
            ctx.n_draws
        )
    });
    if m.comp_o <= 0.0 {
        return Err(Error::numerical(format!(
            "{label}: prior probability of the order constraints estimated as 0 with {} draws; increase the draw count",
            ctx.n_draws
        )));
    }
    Ok((Evaluated { measures: m, n_draws: ctx.n_draws }, warning))
}

fn hypothesis_measures(family: &dyn Family, h: &ConstraintMatrices, ctx: &McContext) -> Result<Measures> {
    if h.n_equalities() == 0 && h.n_orders() == 0 {
        return Ok(Measures::unit());
    }
    family.measures(h, h, ctx)
}

/// Measures of every hypothesis in a system, before weighting.
#[derive(Debug, Clone)]
pub struct MeasureRun {
    pub evaluated: Vec<Evaluated>,
    pub warnings: Vec<String>,
}

impl MeasureRun {
    pub fn measures(&self) -> Vec<Measures> {
        self.evaluated.iter().map(|e| e.measures).collect()
    }
}

pub fn compute_measures(family: &dyn Family, system: &HypothesisSystem, cfg: &EngineConfig) -> Result<MeasureRun> {
    if system.is_empty() {
        return Err(Error::invalid("no hypotheses to evaluate"));
    }
    for h in &system.hypotheses {
        if h.n_params() != family.space().len() {
            return Err(Error::invalid("hypothesis and model parameter counts differ"));
        }
        family.check(h)?;
    }
    let mut evaluated = Vec::with_capacity(system.len());
    let mut warnings: Vec<String> = warn_nested_orders(&system.hypotheses).iter().map(|w| w.to_string()).collect();
    for (i, h) in system.hypotheses.iter().enumerate() {
        let (e, w) = with_escalation(cfg, hypothesis_stream(cfg.seed, i), &system.labels[i], |ctx| {
            hypothesis_measures(family, h, ctx)
        })?;
        evaluated.push(e);
        warnings.extend(w);
    }
    if system.complement_included {
        let own: Vec<Measures> = evaluated.iter().map(|e| e.measures).collect();
        let k = system.hypotheses.len();
        let label = &system.labels[k];
        let (e, w) = with_escalation(cfg, hypothesis_stream(cfg.seed, k), label, |ctx| {
            complement_measures(family, &system.hypotheses, &own, ctx)
        })?;
        evaluated.push(e);
        warnings.extend(w);
    }
    Ok(MeasureRun { evaluated, warnings })
}

/// Result of a confirmatory test.
#[derive(Debug, Clone)]
pub struct Confirmatory {
    pub labels: Vec<String>,
    pub descriptions: Vec<String>,
    pub prior_weights: Vec<f64>,
    pub evaluated: Vec<Evaluated>,
    pub php: Vec<f64>,
    pub evidence: DMatrix<f64>,
    pub warnings: Vec<String>,
}

/// Bayes factors and posterior probabilities from already computed measures.
pub fn summarize(system: &HypothesisSystem, run: MeasureRun) -> Result<Confirmatory> {
    let log_bfs: Vec<f64> = run.evaluated.iter().map(|e| e.measures.log_bf()).collect();
    let php = posterior_probs(&log_bfs, &system.prior_weights)?;
    Ok(Confirmatory {
        labels: system.labels.clone(),
        descriptions: (0..system.len()).map(|i| system.description(i).to_string()).collect(),
        prior_weights: system.prior_weights.clone(),
        evaluated: run.evaluated,
        php,
        evidence: evidence_matrix(&log_bfs),
        warnings: run.warnings,
    })
}

pub fn evaluate(family: &dyn Family, system: &HypothesisSystem, cfg: &EngineConfig) -> Result<Confirmatory> {
    summarize(system, compute_measures(family, system, cfg)?)
}

/// Hypotheses tested together in one exploratory row, with equal weights.
#[derive(Debug, Clone)]
pub struct ExploratorySet {
    pub name: String,
    pub labels: Vec<String>,
    pub hypotheses: Vec<ConstraintMatrices>,
}

/// The exploratory tests of a model: its own sets if it defines them,
/// otherwise the parameter triads.
pub fn exploratory_sets(family: &dyn Family) -> Vec<ExploratorySet> {
    family.exploratory_sets().unwrap_or_else(|| parameter_triads(family))
}

/// The default exploratory sets: for each parameter, equal to, below and
/// above its null value.
pub fn parameter_triads(family: &dyn Family) -> Vec<ExploratorySet> {
    let space = family.space();
    let p = space.len();
    (0..p)
        .map(|k| {
            let c = family.exploratory_null(k);
            let mut unit = vec![0.0; p];
            unit[k] = 1.0;
            let neg: Vec<f64> = unit.iter().map(|v| -v).collect();
            let name = space.name(k).to_string();
            ExploratorySet {
                name: name.clone(),
                labels: vec![format!("={c}"), format!("<{c}"), format!(">{c}")],
                hypotheses: vec![
                    ConstraintMatrices::from_rows(p, &[(unit.clone(), c)], &[]).with_source(format!("{name} = {c}")),
                    ConstraintMatrices::from_rows(p, &[], &[(neg, -c)]).with_source(format!("{name} < {c}")),
                    ConstraintMatrices::from_rows(p, &[], &[(unit, c)]).with_source(format!("{name} > {c}")),
                ],
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploratoryRow {
    pub name: String,
    pub labels: Vec<String>,
    pub evaluated: Vec<Evaluated>,
    pub php: Vec<f64>,
}

/// Measures of every hypothesis in every exploratory set.
pub fn exploratory_measures(
    family: &dyn Family,
    sets: &[ExploratorySet],
    cfg: &EngineConfig,
) -> Result<(Vec<Vec<Evaluated>>, Vec<String>)> {
    let mut out = Vec::with_capacity(sets.len());
    let mut warnings = Vec::new();
    for (s, set) in sets.iter().enumerate() {
        let mut row = Vec::with_capacity(set.hypotheses.len());
        for (j, h) in set.hypotheses.iter().enumerate() {
            family.check(h)?;
            let label = format!("{} {}", set.name, set.labels[j]);
            let (e, w) = with_escalation(cfg, exploratory_stream(cfg.seed, s, j), &label, |ctx| {
                hypothesis_measures(family, h, ctx)
            })?;
            row.push(e);
            warnings.extend(w);
        }
        out.push(row);
    }
    Ok((out, warnings))
}

pub fn summarize_exploratory(sets: &[ExploratorySet], measures: Vec<Vec<Evaluated>>) -> Result<Vec<ExploratoryRow>> {
    sets.iter()
        .zip(measures)
        .map(|(set, evaluated)| {
            let log_bfs: Vec<f64> = evaluated.iter().map(|e| e.measures.log_bf()).collect();
            let w = vec![1.0; log_bfs.len()];
            Ok(ExploratoryRow {
                name: set.name.clone(),
                labels: set.labels.clone(),
                php: posterior_probs(&log_bfs, &w)?,
                evaluated,
            })
        })
        .collect()
}

pub fn exploratory(
    family: &dyn Family,
    sets: &[ExploratorySet],
    cfg: &EngineConfig,
) -> Result<(Vec<ExploratoryRow>, Vec<String>)> {
    let (m, w) = exploratory_measures(family, sets, cfg)?;
    Ok((summarize_exploratory(sets, m)?, w))
}

/// Measures of "all coefficients in `subset` equal their null values".
pub fn grouped_effect_measures(
    family: &dyn Family,
    subset: &[usize],
    cfg: &EngineConfig,
) -> Result<(Evaluated, Option<String>)> {
    if subset.is_empty() {
        return Err(Error::invalid("coefficient subset is empty"));
    }
    let p = family.space().len();
    let mut rows = Vec::with_capacity(subset.len());
    for &k in subset {
        if k >= p {
            return Err(Error::invalid(format!("coefficient index {k} out of range")));
        }
        let mut row = vec![0.0; p];
        row[k] = 1.0;
        rows.push((row, family.exploratory_null(k)));
    }
    let h = ConstraintMatrices::from_rows(p, &rows, &[]);
    family.check(&h)?;
    with_escalation(cfg, RandomStream::new(cfg.seed, 999), "grouped effect", |ctx| hypothesis_measures(family, &h, ctx))
}

/// Posterior probabilities of the grouped null against the unconstrained
/// model, with equal prior weights.
pub fn grouped_effect_probs(m: &Measures) -> Result<(f64, f64)> {
    let php = posterior_probs(&[m.log_bf(), 0.0], &[1.0, 1.0])?;
    Ok((php[0], php[1]))
}

/// Posterior probabilities of "all coefficients in `subset` equal their null
/// values" against the unconstrained model, with equal prior weights.
pub fn grouped_effect_test(family: &dyn Family, subset: &[usize], cfg: &EngineConfig) -> Result<(f64, f64)> {
    let (e, _) = grouped_effect_measures(family, subset, cfg)?;
    grouped_effect_probs(&e.measures)
}

/// Averages each of the four measures over imputed datasets. Densities are
/// averaged on the natural scale.
pub fn aggregate_imputations(tables: &[Vec<Measures>]) -> Result<Vec<Measures>> {
    let first = tables.first().ok_or_else(|| Error::invalid("no imputed datasets"))?;
    if tables.iter().any(|t| t.len() != first.len()) {
        return Err(Error::invalid("imputed datasets produced different hypothesis systems"));
    }
    let m = tables.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            let col: Vec<&Measures> = tables.iter().map(|t| &t[i]).collect();
            let mean = |f: &dyn Fn(&Measures) -> f64| col.iter().map(|x| f(x)).sum::<f64>() / m;
            let rms = |f: &dyn Fn(&Measures) -> f64| (col.iter().map(|x| f(x).powi(2)).sum::<f64>()).sqrt() / m;
            Measures {
                log_comp_e: log_mean_exp(&col.iter().map(|x| x.log_comp_e).collect::<Vec<_>>()),
                log_fit_e: log_mean_exp(&col.iter().map(|x| x.log_fit_e).collect::<Vec<_>>()),
                comp_o: mean(&|x| x.comp_o),
                fit_o: mean(&|x| x.fit_o),
                comp_o_se: rms(&|x| x.comp_o_se),
                fit_o_se: rms(&|x| x.fit_o_se),
            }
        })
        .collect())
}
