use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use sdbf::engine::{EngineConfig, DEFAULT_DRAWS, DEFAULT_SEED};
use sdbf::input::{ModelSpec, TestKind};
use sdbf::report::{render_json, render_text, run, RunConfig, Source};
use sdbf::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Test {
    Ttest,
    Lm,
    Bartlett,
    Corr,
    Gauss,
}

impl From<Test> for TestKind {
    fn from(t: Test) -> Self {
        match t {
            Test::Ttest => TestKind::Ttest,
            Test::Lm => TestKind::Lm,
            Test::Bartlett => TestKind::Bartlett,
            Test::Corr => TestKind::Corr,
            Test::Gauss => TestKind::Gauss,
        }
    }
}

/// Bayes factors and posterior probabilities for equality and order
/// constrained hypotheses.
#[derive(Debug, Parser)]
#[command(name = "sdbf", version)]
struct Args {
    /// CSV file with a header row
    #[arg(long, conflicts_with_all = ["stats", "imputations"])]
    data: Option<PathBuf>,
    /// JSON file with sufficient statistics
    #[arg(long, conflicts_with = "imputations")]
    stats: Option<PathBuf>,
    /// Directory of imputed CSV files; results are averaged over them
    #[arg(long)]
    imputations: Option<PathBuf>,
    /// Model type (required with --data and --imputations)
    #[arg(long, value_enum)]
    test: Option<Test>,
    /// Outcome column(s), comma separated
    #[arg(long, value_delimiter = ',')]
    outcome: Vec<String>,
    /// Predictor terms, comma separated; `a:b` is an interaction and `a*b`
    /// adds both main effects and the interaction
    #[arg(long, value_delimiter = ',')]
    predictors: Vec<String>,
    /// Grouping column
    #[arg(long)]
    group: Option<String>,
    /// Hypotheses separated by `;`
    #[arg(long)]
    hypothesis: Option<String>,
    /// Prior weights, one per hypothesis including the complement
    #[arg(long, value_delimiter = ',')]
    prior: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Null value for t tests
    #[arg(long, allow_hyphen_values = true)]
    null: Option<f64>,
    /// Fit regressions without an intercept
    #[arg(long)]
    no_intercept: bool,
}

fn config(args: &Args) -> Result<RunConfig, Error> {
    let spec = || -> Result<ModelSpec, Error> {
        let test = args
            .test
            .ok_or_else(|| Error::InvalidArgument("--test is required with --data or --imputations".into()))?;
        Ok(ModelSpec {
            test: test.into(),
            outcomes: args.outcome.clone(),
            predictors: args.predictors.clone(),
            group: args.group.clone(),
            null: args.null.unwrap_or(0.0),
            intercept: !args.no_intercept,
        })
    };
    let source = match (&args.data, &args.stats, &args.imputations) {
        (Some(p), None, None) => Source::Data(p.clone(), spec()?),
        (None, Some(p), None) => Source::Stats(p.clone()),
        (None, None, Some(p)) => Source::Imputations(p.clone(), spec()?),
        _ => return Err(Error::InvalidArgument("give exactly one of --data, --stats or --imputations".into())),
    };
    if args.draws == 0 {
        return Err(Error::InvalidArgument("--draws must be positive".into()));
    }
    Ok(RunConfig {
        source,
        hypothesis: args.hypothesis.clone(),
        prior: args.prior.clone(),
        null: args.null,
        engine: EngineConfig { seed: args.seed, n_draws: args.draws, ..EngineConfig::default() },
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = config(&args).and_then(|cfg| {
        if let (Source::Stats(path), Some(t)) = (&cfg.source, args.test) {
            let found = sdbf::input::read_stats(path)?.kind();
            if found != TestKind::from(t) {
                return Err(Error::InvalidArgument(format!(
                    "--test {} does not match the statistics file ({})",
                    TestKind::from(t).name(),
                    found.name()
                )));
            }
        }
        run(&cfg)
    });
    match result {
        Ok(doc) => {
            let out = match args.format {
                Format::Table => render_text(&doc),
                Format::Json => render_json(&doc),
            };
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let (Error::Parse(pe), Some(h)) = (&e, &args.hypothesis) {
                if let Some(c) = pe.caret(h) {
                    eprintln!("{c}");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
