//! Reading models from sufficient-statistics JSON or raw CSV data.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::adapters::{
    gaussian_family, lm_family, ttest_family, BartlettFamily, CorrFamily, CorrGroup, LmFamily, LmGroup, LmSummary,
    SampleStats, VarianceGroup,
};
use crate::engine::{Family, GaussianFamily, StudentFamily};
use crate::error::{Error, Result};
use crate::hypothesis::is_identifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Ttest,
    Lm,
    Bartlett,
    Corr,
    Gauss,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Ttest => "ttest",
            TestKind::Lm => "lm",
            TestKind::Bartlett => "bartlett",
            TestKind::Corr => "corr",
            TestKind::Gauss => "gauss",
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ttest" => TestKind::Ttest,
            "lm" => TestKind::Lm,
            "bartlett" => TestKind::Bartlett,
            "corr" => TestKind::Corr,
            "gauss" => TestKind::Gauss,
            other => return Err(Error::invalid(format!("unknown test `{other}`"))),
        })
    }
}

/// A model ready for testing.
#[derive(Debug)]
pub enum Model {
    Ttest(StudentFamily),
    Lm(LmFamily),
    Bartlett(BartlettFamily),
    Corr(CorrFamily),
    Gauss(GaussianFamily),
}

impl Model {
    pub fn family(&self) -> &dyn Family {
        match self {
            Model::Ttest(f) => f,
            Model::Lm(f) => f,
            Model::Bartlett(f) => f,
            Model::Corr(f) => f,
            Model::Gauss(f) => f,
        }
    }

    pub fn kind(&self) -> TestKind {
        match self {
            Model::Ttest(_) => TestKind::Ttest,
            Model::Lm(_) => TestKind::Lm,
            Model::Bartlett(_) => TestKind::Bartlett,
            Model::Corr(_) => TestKind::Corr,
            Model::Gauss(_) => TestKind::Gauss,
        }
    }

    /// Named coefficient sets tested jointly against zero.
    pub fn grouped_terms(&self) -> Vec<(String, Vec<usize>)> {
        match self {
            Model::Lm(f) => f.grouped_terms(),
            _ => Vec::new(),
        }
    }
}

// ---------------------------------------------------------------- JSON

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtestGroupJson {
    #[serde(default)]
    pub name: Option<String>,
    pub n: f64,
    pub mean: f64,
    #[serde(default)]
    pub sd: Option<f64>,
    /// One-sample t statistic against `null`, used when `sd` is absent.
    #[serde(default)]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmGroupJson {
    #[serde(default)]
    pub name: Option<String>,
    pub n: f64,
    pub xtx: Vec<Vec<f64>>,
    pub xty: Vec<Vec<f64>>,
    pub yty: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceGroupJson {
    pub name: String,
    pub n: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrGroupJson {
    #[serde(default)]
    pub name: Option<String>,
    pub n: f64,
    pub correlations: Vec<Vec<f64>>,
    #[serde(default)]
    pub se: Option<Vec<Vec<f64>>>,
}

/// Sufficient statistics, tagged by test.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "test", rename_all = "lowercase", deny_unknown_fields)]
pub enum StatsInput {
    Ttest {
        groups: Vec<TtestGroupJson>,
        #[serde(default)]
        null: f64,
    },
    Lm {
        predictors: Vec<String>,
        outcomes: Vec<String>,
        groups: Vec<LmGroupJson>,
    },
    Bartlett {
        groups: Vec<VarianceGroupJson>,
    },
    Corr {
        variables: Vec<String>,
        groups: Vec<CorrGroupJson>,
    },
    Gauss {
        names: Vec<String>,
        estimates: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        n: f64,
    },
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::data(format!("{what} is not rectangular")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl StatsInput {
    pub fn kind(&self) -> TestKind {
        match self {
            StatsInput::Ttest { .. } => TestKind::Ttest,
            StatsInput::Lm { .. } => TestKind::Lm,
            StatsInput::Bartlett { .. } => TestKind::Bartlett,
            StatsInput::Corr { .. } => TestKind::Corr,
            StatsInput::Gauss { .. } => TestKind::Gauss,
        }
    }

    /// Builds the model. `null` overrides the t-test null value in the file.
    pub fn build(&self, null: Option<f64>) -> Result<Model> {
        match self {
            StatsInput::Ttest { groups, null: file_null } => {
                let null = null.unwrap_or(*file_null);
                let samples = groups
                    .iter()
                    .map(|g| match (g.sd, g.t) {
                        (Some(sd), _) => Ok(SampleStats { n: g.n, mean: g.mean, sd }),
                        (None, Some(t)) => SampleStats::from_t(g.n, g.mean, t, null),
                        (None, None) => Err(Error::data("each t-test group needs `sd` or `t`")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Ttest(ttest_family(&samples, null)?))
            }
            StatsInput::Lm { predictors, outcomes, groups } => {
                let groups = groups
                    .iter()
                    .enumerate()
                    .map(|(i, g)| {
                        Ok(LmGroup {
                            name: g.name.clone().unwrap_or_else(|| format!("group{}", i + 1)),
                            n: g.n,
                            xtx: matrix(&g.xtx, "xtx")?,
                            xty: matrix(&g.xty, "xty")?,
                            yty: matrix(&g.yty, "yty")?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let s = LmSummary { predictors: predictors.clone(), outcomes: outcomes.clone(), groups, terms: vec![] };
                Ok(Model::Lm(lm_family(&s)?))
            }
            StatsInput::Bartlett { groups } => {
                let g: Vec<VarianceGroup> = groups
                    .iter()
                    .map(|g| VarianceGroup { name: g.name.clone(), n: g.n, variance: g.variance })
                    .collect();
                Ok(Model::Bartlett(BartlettFamily::new(&g)?))
            }
            StatsInput::Corr { variables, groups } => {
                let g = groups
                    .iter()
                    .enumerate()
                    .map(|(i, g)| {
                        Ok(CorrGroup {
                            name: g.name.clone().unwrap_or_else(|| format!("group{}", i + 1)),
                            n: g.n,
                            correlations: matrix(&g.correlations, "correlations")?,
                            se: g.se.as_ref().map(|s| matrix(s, "se")).transpose()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Corr(CorrFamily::new(variables, &g)?))
            }
            StatsInput::Gauss { names, estimates, covariance, n } => {
                Ok(Model::Gauss(gaussian_family(names, estimates, matrix(covariance, "covariance")?, *n)?))
            }
        }
    }
}

impl std::str::FromStr for StatsInput {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(e.to_string()))
    }
}

pub fn read_stats(path: &Path) -> Result<StatsInput> {
    let text = std::fs::read_to_string(path)?;
    text.parse().map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

// ----------------------------------------------------------------- CSV

/// A data column: numeric when every entry parses as a number.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    /// Sorted distinct values, as strings.
    fn levels(&self) -> Vec<String> {
        let set: BTreeSet<String> = match self {
            Column::Categorical(v) => v.iter().cloned().collect(),
            Column::Numeric(v) => {
                return {
                    let mut u: Vec<f64> = v.clone();
                    u.sort_by(f64::total_cmp);
                    u.dedup();
                    u.iter().map(|x| x.to_string()).collect()
                }
            }
        };
        set.into_iter().collect()
    }

    fn label(&self, i: usize) -> String {
        match self {
            Column::Categorical(v) => v[i].clone(),
            Column::Numeric(v) => v[i].to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub columns: Vec<Column>,
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s == "NA"
}

impl Dataset {
    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> =
            rdr.headers().map_err(|e| Error::data(e.to_string()))?.iter().map(str::to_string).collect();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::data(e.to_string()))?;
            for (c, v) in rec.iter().enumerate() {
                if is_missing(v) {
                    return Err(Error::data(format!(
                        "missing value in column `{}` on data row {}; impute the data (see --imputations) rather than dropping rows",
                        names[c],
                        r + 1
                    )));
                }
                raw[c].push(v.to_string());
            }
        }
        let columns = raw
            .into_iter()
            .map(|vals| {
                let nums: Option<Vec<f64>> = vals.iter().map(|v| v.parse::<f64>().ok()).collect();
                match nums {
                    Some(n) => Column::Numeric(n),
                    None => Column::Categorical(vals),
                }
            })
            .collect();
        Ok(Dataset { names, columns })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Dataset::from_reader(f).map_err(|e| match e {
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::data(format!("no column named `{name}`")))
    }

    fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Numeric(v) => Ok(v),
            Column::Categorical(_) => Err(Error::data(format!("column `{name}` is not numeric"))),
        }
    }

    /// Row indices of each level of `name`, in level order.
    fn split(&self, name: &str) -> Result<Vec<(String, Vec<usize>)>> {
        let col = self.column(name)?;
        Ok(col
            .levels()
            .into_iter()
            .map(|lv| {
                let rows = (0..col.len()).filter(|&i| col.label(i) == lv).collect();
                (lv, rows)
            })
            .collect())
    }
}

/// How to build a model from a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub test: TestKind,
    pub outcomes: Vec<String>,
    /// Terms: `x`, `a:b`, or `a*b` (both main effects and the interaction).
    pub predictors: Vec<String>,
    pub group: Option<String>,
    pub null: f64,
    pub intercept: bool,
}

/// Makes a string usable inside a parameter name.
fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' }).collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn pick(v: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| v[i]).collect()
}

fn single_outcome(spec: &ModelSpec) -> Result<&str> {
    match spec.outcomes.as_slice() {
        [y] => Ok(y),
        _ => Err(Error::invalid(format!("the {} test takes exactly one outcome", spec.test.name()))),
    }
}

/// Expands the predictor terms into a list of terms, each a list of
/// variable names.
fn expand_terms(predictors: &[String]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    let mut push = |t: Vec<String>| {
        if !out.contains(&t) {
            out.push(t);
        }
    };
    for p in predictors {
        if p.contains('*') {
            let vars: Vec<String> = p.split('*').map(|s| s.trim().to_string()).collect();
            let k = vars.len();
            // every non-empty subset, smaller interactions first
            for size in 1..=k {
                for mask in 1u32..(1 << k) {
                    if mask.count_ones() as usize == size {
                        push((0..k).filter(|i| mask & (1 << i) != 0).map(|i| vars[i].clone()).collect());
                    }
                }
            }
        } else {
            push(p.split(':').map(|s| s.trim().to_string()).collect());
        }
    }
    out
}

struct Design {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    terms: Vec<(String, Vec<usize>)>,
}

fn build_design(ds: &Dataset, predictors: &[String], intercept: bool) -> Result<Design> {
    let n = ds.n_rows();
    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut terms = Vec::new();
    if intercept {
        names.push("Intercept".to_string());
        columns.push(vec![1.0; n]);
    }
    let mut full_coding_used = intercept;
    for term in expand_terms(predictors) {
        let mut parts: Vec<(String, Vec<f64>)> = vec![(String::new(), vec![1.0; n])];
        let mut has_factor = false;
        for var in &term {
            let col = ds.column(var)?;
            let pieces: Vec<(String, Vec<f64>)> = match col {
                Column::Numeric(v) => vec![(sanitize(var), v.clone())],
                Column::Categorical(_) => {
                    has_factor = true;
                    let levels = col.levels();
                    let skip = usize::from(full_coding_used || term.len() > 1);
                    levels
                        .iter()
                        .skip(skip)
                        .map(|lv| {
                            let x = (0..n).map(|i| if col.label(i) == *lv { 1.0 } else { 0.0 }).collect();
                            (format!("{}{}", sanitize(var), sanitize(lv)), x)
                        })
                        .collect()
                }
            };
            parts = parts
                .iter()
                .flat_map(|(pn, pv)| {
                    pieces.iter().map(move |(qn, qv)| {
                        let name = if pn.is_empty() { qn.clone() } else { format!("{pn}_x_{qn}") };
                        (name, pv.iter().zip(qv).map(|(a, b)| a * b).collect())
                    })
                })
                .collect();
        }
        if has_factor && term.len() == 1 {
            full_coding_used = true;
        }
        let start = names.len();
        for (name, x) in parts {
            if !is_identifier(&name) {
                return Err(Error::data(format!("`{name}` cannot be used as a parameter name")));
            }
            names.push(name);
            columns.push(x);
        }
        if has_factor {
            terms.push((term.join(":"), (start..names.len()).collect()));
        }
    }
    if names.is_empty() {
        return Err(Error::invalid("the model has no predictors"));
    }
    Ok(Design { names, columns, terms })
}

fn cross_products(x: &[Vec<f64>], y: &[&[f64]], rows: &[usize]) -> LmGroup {
    let k = x.len();
    let p = y.len();
    let xtx = DMatrix::from_fn(k, k, |a, b| rows.iter().map(|&i| x[a][i] * x[b][i]).sum());
    let xty = DMatrix::from_fn(k, p, |a, b| rows.iter().map(|&i| x[a][i] * y[b][i]).sum());
    let yty = DMatrix::from_fn(p, p, |a, b| rows.iter().map(|&i| y[a][i] * y[b][i]).sum());
    LmGroup { name: String::new(), n: rows.len() as f64, xtx, xty, yty }
}

fn correlation(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let d = cols.len();
    let stats: Vec<(f64, f64)> = cols.iter().map(|c| mean_sd(c)).collect();
    let n = cols[0].len() as f64;
    DMatrix::from_fn(d, d, |a, b| {
        if a == b {
            return 1.0;
        }
        let cov =
            cols[a].iter().zip(&cols[b]).map(|(x, y)| (x - stats[a].0) * (y - stats[b].0)).sum::<f64>() / (n - 1.0);
        cov / (stats[a].1 * stats[b].1)
    })
}

pub fn build_from_data(ds: &Dataset, spec: &ModelSpec) -> Result<Model> {
    let all_rows: Vec<usize> = (0..ds.n_rows()).collect();
    let groups = match &spec.group {
        Some(g) => ds.split(g)?,
        None => vec![(String::new(), all_rows.clone())],
    };
    match spec.test {
        TestKind::Ttest => {
            let y = ds.numeric(single_outcome(spec)?)?;
            if groups.len() > 2 {
                return Err(Error::data("a t test compares at most two groups"));
            }
            let samples: Vec<SampleStats> = groups
                .iter()
                .map(|(_, rows)| {
                    let (mean, sd) = mean_sd(&pick(y, rows));
                    SampleStats { n: rows.len() as f64, mean, sd }
                })
                .collect();
            Ok(Model::Ttest(ttest_family(&samples, spec.null)?))
        }
        TestKind::Bartlett => {
            let y = ds.numeric(single_outcome(spec)?)?;
            if spec.group.is_none() {
                return Err(Error::invalid("comparing variances needs a group column"));
            }
            let g = groups
                .iter()
                .map(|(lv, rows)| {
                    let (_, sd) = mean_sd(&pick(y, rows));
                    VarianceGroup { name: sanitize(lv), n: rows.len() as f64, variance: sd * sd }
                })
                .collect::<Vec<_>>();
            Ok(Model::Bartlett(BartlettFamily::new(&g)?))
        }
        TestKind::Corr => {
            if spec.outcomes.len() < 2 {
                return Err(Error::invalid("correlations need at least two outcome columns"));
            }
            let cols: Vec<&[f64]> = spec.outcomes.iter().map(|o| ds.numeric(o)).collect::<Result<_>>()?;
            let g = groups
                .iter()
                .map(|(lv, rows)| {
                    let sub: Vec<Vec<f64>> = cols.iter().map(|c| pick(c, rows)).collect();
                    CorrGroup {
                        name: format!("{}{}", spec.group.as_deref().map(sanitize).unwrap_or_default(), sanitize(lv)),
                        n: rows.len() as f64,
                        correlations: correlation(&sub),
                        se: None,
                    }
                })
                .collect::<Vec<_>>();
            let vars: Vec<String> = spec.outcomes.iter().map(|o| sanitize(o)).collect();
            Ok(Model::Corr(CorrFamily::new(&vars, &g)?))
        }
        TestKind::Lm => {
            if spec.outcomes.is_empty() {
                return Err(Error::invalid("a linear model needs at least one outcome"));
            }
            let y: Vec<&[f64]> = spec.outcomes.iter().map(|o| ds.numeric(o)).collect::<Result<_>>()?;
            let design = build_design(ds, &spec.predictors, spec.intercept)?;
            let lm_groups = groups
                .iter()
                .map(|(lv, rows)| LmGroup { name: lv.clone(), ..cross_products(&design.columns, &y, rows) })
                .collect();
            let s = LmSummary {
                predictors: design.names,
                outcomes: spec.outcomes.iter().map(|o| sanitize(o)).collect(),
                groups: lm_groups,
                terms: design.terms,
            };
            Ok(Model::Lm(lm_family(&s)?))
        }
        TestKind::Gauss => Err(Error::invalid("the gauss test takes estimates from a statistics file (--stats)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "y,x,g,h\n1.0,0.5,a,u\n2.0,1.5,b,v\n1.5,0.7,a,v\n3.0,2.0,b,u\n2.2,1.1,a,u\n2.9,1.8,b,v\n1.1,0.4,a,v\n2.4,1.6,b,u\n";

    fn spec(test: TestKind, outcomes: &[&str], predictors: &[&str], group: Option<&str>) -> ModelSpec {
        ModelSpec {
            test,
            outcomes: outcomes.iter().map(|s| s.to_string()).collect(),
            predictors: predictors.iter().map(|s| s.to_string()).collect(),
            group: group.map(str::to_string),
            null: 0.0,
            intercept: true,
        }
    }

    #[test]
    fn reads_types_and_rejects_missing() {
        let ds = Dataset::from_reader(CSV.as_bytes()).unwrap();
        assert_eq!(ds.n_rows(), 8);
        assert!(matches!(ds.column("y").unwrap(), Column::Numeric(_)));
        assert!(matches!(ds.column("g").unwrap(), Column::Categorical(_)));
        let bad = "y,x\n1,2\nNA,3\n";
        assert!(matches!(Dataset::from_reader(bad.as_bytes()), Err(Error::Data(_))));
        let bad = "y,x\n1,2\n,3\n";
        assert!(Dataset::from_reader(bad.as_bytes()).is_err());
    }

    #[test]
    fn dummy_coding_and_interactions() {
        let ds = Dataset::from_reader(CSV.as_bytes()).unwrap();
        let d = build_design(&ds, &["g*h".to_string(), "x".to_string()], true).unwrap();
        assert_eq!(d.names, ["Intercept", "gb", "hv", "gb_x_hv", "x"]);
        assert_eq!(d.terms, vec![("g".to_string(), vec![1]), ("h".to_string(), vec![2]), ("g:h".to_string(), vec![3])]);
        let d = build_design(&ds, &["g".to_string()], false).unwrap();
        assert_eq!(d.names, ["ga", "gb"]);
    }

    #[test]
    fn builds_each_test() {
        let ds = Dataset::from_reader(CSV.as_bytes()).unwrap();
        let m = build_from_data(&ds, &spec(TestKind::Ttest, &["y"], &[], Some("g"))).unwrap();
        assert_eq!(m.family().space().names(), ["difference"]);
        let m = build_from_data(&ds, &spec(TestKind::Bartlett, &["y"], &[], Some("g"))).unwrap();
        assert_eq!(m.family().space().names(), ["a", "b"]);
        let m = build_from_data(&ds, &spec(TestKind::Corr, &["y", "x"], &[], None)).unwrap();
        assert_eq!(m.family().space().names(), ["x_with_y"]);
        assert!(build_from_data(&ds, &spec(TestKind::Corr, &["y", "x"], &[], Some("h"))).is_err());
        let m = build_from_data(&ds, &spec(TestKind::Lm, &["y"], &["x", "g"], None)).unwrap();
        assert_eq!(m.family().space().names(), ["Intercept", "x", "gb"]);
        assert_eq!(m.grouped_terms(), vec![("g".to_string(), vec![2])]);
        assert!(build_from_data(&ds, &spec(TestKind::Gauss, &["y"], &[], None)).is_err());
    }

    #[test]
    fn stats_json_parses() {
        let s: StatsInput =
            serde_json::from_str(r#"{"test":"ttest","null":5,"groups":[{"n":28,"mean":4.392857,"t":-1.9318}]}"#)
                .unwrap();
        assert_eq!(s.kind(), TestKind::Ttest);
        assert!(s.build(None).is_ok());
        let bad = serde_json::from_str::<StatsInput>(r#"{"test":"ttest","groups":[],"extra":1}"#);
        assert!(bad.is_err());
    }
}
