//! Running a full analysis and rendering the result as text or JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::{
    aggregate_imputations, compute_measures, exploratory_measures, exploratory_sets, grouped_effect_measures,
    grouped_effect_probs, summarize, summarize_exploratory, EngineConfig, Evaluated, MeasureRun, Measures,
};
use crate::error::{Error, Result};
use crate::hypothesis::{add_complement, parse};
use crate::input::{build_from_data, read_stats, Dataset, Model, ModelSpec};

pub const SCHEMA: &str = "bf-result/1";

/// A float that survives JSON even when infinite or NaN; those are written
/// as the strings "inf", "-inf" and "nan".
#[derive(Debug, Clone, Copy)]
pub struct Real(pub f64);

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 || (self.0.is_nan() && other.0.is_nan())
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real(v)
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Real(v)),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(Real(f64::INFINITY)),
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "nan" => Ok(Real(f64::NAN)),
                _ => Err(serde::de::Error::custom(format!("not a number: {s}"))),
            },
        }
    }
}

fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

/// One row of a specification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub label: String,
    pub description: String,
    pub prior_weight: Real,
    pub comp_e: Real,
    pub comp_o: Real,
    pub fit_e: Real,
    pub fit_o: Real,
    pub bf_e: Real,
    pub bf_o: Real,
    pub bf: Real,
    pub php: Real,
    pub comp_o_se: Real,
    pub fit_o_se: Real,
    pub n_draws: usize,
}

impl HypothesisEntry {
    fn new(label: &str, description: &str, weight: f64, e: &Evaluated, php: f64) -> Self {
        let m = &e.measures;
        HypothesisEntry {
            label: label.to_string(),
            description: description.to_string(),
            prior_weight: Real(weight),
            comp_e: Real(m.comp_e()),
            comp_o: Real(m.comp_o),
            fit_e: Real(m.fit_e()),
            fit_o: Real(m.fit_o),
            bf_e: Real(m.bf_e()),
            bf_o: Real(m.bf_o()),
            bf: Real(m.bf()),
            php: Real(php),
            comp_o_se: Real(m.comp_o_se),
            fit_o_se: Real(m.fit_o_se),
            n_draws: e.n_draws,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploratoryEntry {
    pub name: String,
    pub hypotheses: Vec<HypothesisEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEntry {
    pub term: String,
    pub php_null: Real,
    pub php_alternative: Real,
    pub bf_null: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmatoryEntry {
    pub hypotheses: Vec<HypothesisEntry>,
    /// `evidence[i][j]` is the Bayes factor of hypothesis i against j.
    pub evidence: Vec<Vec<Real>>,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema: String,
    pub test: String,
    pub seed: u64,
    pub n_draws: usize,
    pub imputations: usize,
    pub parameters: Vec<String>,
    pub exploratory: Vec<ExploratoryEntry>,
    pub effects: Vec<EffectEntry>,
    pub confirmatory: Option<ConfirmatoryEntry>,
    pub warnings: Vec<String>,
}

/// Where the model comes from.
#[derive(Debug, Clone)]
pub enum Source {
    Stats(PathBuf),
    Data(PathBuf, ModelSpec),
    /// A directory of imputed CSV files, all analysed with the same spec.
    Imputations(PathBuf, ModelSpec),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub hypothesis: Option<String>,
    pub prior: Option<Vec<f64>>,
    /// Overrides the null value of a t test read from a statistics file.
    pub null: Option<f64>,
    pub engine: EngineConfig,
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!("no CSV files in {}", dir.display())));
    }
    Ok(files)
}

pub fn load_models(source: &Source, null: Option<f64>) -> Result<Vec<Model>> {
    match source {
        Source::Stats(path) => Ok(vec![read_stats(path)?.build(null)?]),
        Source::Data(path, spec) => Ok(vec![build_from_data(&Dataset::read(path)?, spec)?]),
        Source::Imputations(dir, spec) => {
            csv_files(dir)?.iter().map(|p| build_from_data(&Dataset::read(p)?, spec)).collect()
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<ResultDocument> {
    let models = load_models(&cfg.source, cfg.null)?;
    analyze(&models, cfg.hypothesis.as_deref(), cfg.prior.as_deref(), &cfg.engine)
}

/// Averages per-dataset results, keeping the largest draw count.
fn pool(runs: &[Vec<Evaluated>]) -> Result<Vec<Evaluated>> {
    if runs.len() == 1 {
        return Ok(runs[0].clone());
    }
    let tables: Vec<Vec<Measures>> = runs.iter().map(|r| r.iter().map(|e| e.measures).collect()).collect();
    let pooled = aggregate_imputations(&tables)?;
    Ok(pooled
        .into_iter()
        .enumerate()
        .map(|(i, measures)| Evaluated { measures, n_draws: runs.iter().map(|r| r[i].n_draws).max().unwrap_or(0) })
        .collect())
}

/// Runs the exploratory tests, grouped effect tests and, when a hypothesis
/// string is given, the confirmatory test. Several models are treated as
/// imputed copies of one dataset and their measures are averaged.
pub fn analyze(
    models: &[Model],
    hypothesis: Option<&str>,
    prior: Option<&[f64]>,
    cfg: &EngineConfig,
) -> Result<ResultDocument> {
    let first = models.first().ok_or_else(|| Error::invalid("no model to analyse"))?;
    let space = first.family().space();
    if models.iter().any(|m| m.family().space() != space) {
        return Err(Error::Data("imputed datasets produce different parameters".into()));
    }
    let mut warnings = Vec::new();

    let sets = exploratory_sets(first.family());
    let mut per_model = Vec::with_capacity(models.len());
    for m in models {
        let (ev, w) = exploratory_measures(m.family(), &sets, cfg)?;
        per_model.push(ev);
        warnings.extend(w);
    }
    let pooled = (0..sets.len())
        .map(|s| pool(&per_model.iter().map(|pm| pm[s].clone()).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let rows = summarize_exploratory(&sets, pooled)?;
    let exploratory = rows
        .iter()
        .map(|r| {
            let w = 1.0 / r.labels.len() as f64;
            ExploratoryEntry {
                name: r.name.clone(),
                hypotheses: (0..r.labels.len())
                    .map(|j| {
                        HypothesisEntry::new(
                            &r.labels[j],
                            &sets_source(&sets, &r.name, j),
                            w,
                            &r.evaluated[j],
                            r.php[j],
                        )
                    })
                    .collect(),
            }
        })
        .collect();

    let mut effects = Vec::new();
    for (term, subset) in first.grouped_terms() {
        let mut runs = Vec::with_capacity(models.len());
        for m in models {
            let (e, w) = grouped_effect_measures(m.family(), &subset, cfg)?;
            runs.push(vec![e]);
            warnings.extend(w);
        }
        let e = pool(&runs)?.remove(0);
        let (null, alt) = grouped_effect_probs(&e.measures)?;
        effects.push(EffectEntry {
            term,
            php_null: Real(null),
            php_alternative: Real(alt),
            bf_null: Real(e.measures.bf()),
        });
    }

    let confirmatory = match hypothesis {
        None => {
            if prior.is_some() {
                return Err(Error::invalid("prior weights given without hypotheses"));
            }
            None
        }
        Some(text) => {
            let hyps = parse(text, space)?;
            let mut system = add_complement(hyps, space);
            if let Some(w) = prior {
                system = system.with_prior_weights(w)?;
            }
            let mut runs = Vec::with_capacity(models.len());
            for m in models {
                let run = compute_measures(m.family(), &system, cfg)?;
                warnings.extend(run.warnings);
                runs.push(run.evaluated);
            }
            let c = summarize(&system, MeasureRun { evaluated: pool(&runs)?, warnings: Vec::new() })?;
            let k = c.labels.len();
            Some(ConfirmatoryEntry {
                hypotheses: (0..k)
                    .map(|i| {
                        HypothesisEntry::new(
                            &c.labels[i],
                            &c.descriptions[i],
                            c.prior_weights[i],
                            &c.evaluated[i],
                            c.php[i],
                        )
                    })
                    .collect(),
                evidence: (0..k).map(|i| reals(&c.evidence.row(i).iter().copied().collect::<Vec<_>>())).collect(),
            })
        }
    };

    let mut seen = std::collections::HashSet::new();
    warnings.retain(|w| seen.insert(w.clone()));
    Ok(ResultDocument {
        schema: SCHEMA.to_string(),
        test: first.kind().name().to_string(),
        seed: cfg.seed,
        n_draws: cfg.n_draws,
        imputations: models.len(),
        parameters: space.names().to_vec(),
        exploratory,
        effects,
        confirmatory,
        warnings,
    })
}

fn sets_source(sets: &[crate::engine::ExploratorySet], name: &str, j: usize) -> String {
    sets.iter().find(|s| s.name == name).map(|s| s.hypotheses[j].source.clone()).unwrap_or_default()
}

pub fn render_json(doc: &ResultDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("result document serializes");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<ResultDocument> {
    serde_json::from_str(text).map_err(|e| Error::Data(format!("result document: {e}")))
}

fn num(v: Real) -> String {
    let v = v.0;
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.3}")
    }
}

/// Left-aligned first column, right-aligned numeric columns.
fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let ncol = header.len();
    let width: Vec<usize> =
        (0..ncol).map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0)).collect();
    let line = |cells: &[String]| {
        let mut l = String::new();
        for (c, cell) in cells.iter().enumerate() {
            if c == 0 {
                let _ = write!(l, "{cell:<w$}", w = width[0]);
            } else {
                let _ = write!(l, "  {cell:>w$}", w = width[c]);
            }
        }
        l.trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
}

fn spec_table(out: &mut String, hyps: &[HypothesisEntry]) {
    let header: Vec<String> =
        ["", "comp_E", "comp_O", "fit_E", "fit_O", "BF_E", "BF_O", "BF", "PHP"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = hyps
        .iter()
        .map(|h| {
            vec![
                h.label.clone(),
                num(h.comp_e),
                num(h.comp_o),
                num(h.fit_e),
                num(h.fit_o),
                num(h.bf_e),
                num(h.bf_o),
                num(h.bf),
                num(h.php),
            ]
        })
        .collect();
    table(out, &header, &rows);
}

pub fn render_text(doc: &ResultDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Bayesian hypothesis test");
    let _ = writeln!(out, "Type: {}", doc.test);
    let _ = write!(out, "Seed: {}  Draws: {}", doc.seed, doc.n_draws);
    if doc.imputations > 1 {
        let _ = write!(out, "  Imputed datasets: {}", doc.imputations);
    }
    let _ = writeln!(out, "\n");

    let _ = writeln!(out, "Posterior probabilities using equal prior weights:");
    let mut i = 0;
    while i < doc.exploratory.len() {
        // consecutive rows sharing the same hypothesis labels share a header
        let labels: Vec<&str> = doc.exploratory[i].hypotheses.iter().map(|h| h.label.as_str()).collect();
        let mut j = i;
        while j < doc.exploratory.len()
            && doc.exploratory[j].hypotheses.iter().map(|h| h.label.as_str()).eq(labels.iter().copied())
        {
            j += 1;
        }
        let header: Vec<String> =
            std::iter::once(String::new()).chain(labels.iter().map(|l| format!("Pr({l})"))).collect();
        let rows: Vec<Vec<String>> = doc.exploratory[i..j]
            .iter()
            .map(|e| std::iter::once(e.name.clone()).chain(e.hypotheses.iter().map(|h| num(h.php))).collect())
            .collect();
        table(&mut out, &header, &rows);
        i = j;
    }

    if !doc.effects.is_empty() {
        let _ = writeln!(out, "\nPosterior probabilities of grouped effects (equal prior weights):");
        let header = vec![String::new(), "Pr(null)".into(), "Pr(not null)".into()];
        let rows: Vec<Vec<String>> =
            doc.effects.iter().map(|e| vec![e.term.clone(), num(e.php_null), num(e.php_alternative)]).collect();
        table(&mut out, &header, &rows);
    }

    if let Some(c) = &doc.confirmatory {
        let _ = writeln!(out, "\nPosterior probabilities of the hypotheses:");
        let header = vec![String::new(), "Pr(hypothesis|data)".into()];
        let rows: Vec<Vec<String>> = c.hypotheses.iter().map(|h| vec![h.label.clone(), num(h.php)]).collect();
        table(&mut out, &header, &rows);

        let _ = writeln!(out, "\nEvidence matrix:");
        let header: Vec<String> =
            std::iter::once(String::new()).chain(c.hypotheses.iter().map(|h| h.label.clone())).collect();
        let rows: Vec<Vec<String>> = c
            .hypotheses
            .iter()
            .zip(&c.evidence)
            .map(|(h, row)| std::iter::once(h.label.clone()).chain(row.iter().map(|v| num(*v))).collect())
            .collect();
        table(&mut out, &header, &rows);

        let _ = writeln!(out, "\nSpecification table:");
        spec_table(&mut out, &c.hypotheses);

        let _ = writeln!(out, "\nHypotheses:");
        for h in &c.hypotheses {
            let _ = writeln!(out, "  {}: {}", h.label, h.description);
        }
        let weights: Vec<String> = c.hypotheses.iter().map(|h| num(h.prior_weight)).collect();
        let _ = writeln!(out, "Prior weights: {}", weights.join(", "));
        let max_se = c.hypotheses.iter().flat_map(|h| [h.comp_o_se.0, h.fit_o_se.0]).fold(0.0, f64::max);
        if max_se > 0.0 {
            let _ = writeln!(out, "Largest Monte Carlo standard error: {max_se:.4}");
        }
    }

    if !doc.warnings.is_empty() {
        let _ = writeln!(out, "\nWarnings:");
        for w in &doc.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    out
}
