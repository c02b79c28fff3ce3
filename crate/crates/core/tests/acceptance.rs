//! Acceptance checks. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails. Run with `--nocapture` to see the report.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use sdbf::adapters::gaussian_family;
use sdbf::distributions::rng::mc_mean;
use sdbf::distributions::{bvn_upper, GaussianSpec, InverseWishart, RandomStream, UniformCorrelation};
use sdbf::engine::{evidence_matrix, posterior_probs, EngineConfig, Family, McContext};
use sdbf::hypothesis::{parse, parse_one, ParameterSpace};
use sdbf::input::{build_from_data, read_stats, Dataset, Model, ModelSpec, TestKind};
use sdbf::report::{analyze, render_json, ConfirmatoryEntry, ResultDocument};
use sdbf::Error;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stats_model(name: &str) -> Model {
    read_stats(&fixture(name)).unwrap().build(None).unwrap()
}

/// Collects failed sub-checks of one criterion.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
}

impl Check {
    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        if (got - want).abs().is_nan() || (got - want).abs() > tol {
            self.failures.push(format!("{what}: got {got:.6}, want {want} ± {tol}"));
        }
    }

    fn rel(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        if (got / want - 1.0).abs().is_nan() || (got / want - 1.0).abs() > tol {
            self.failures.push(format!("{what}: got {got:.6}, want {want} ± {:.0}%", tol * 100.0));
        }
    }

    fn holds(&mut self, what: &str, ok: bool) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }
}

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn outcome(c: Check, note: String) -> Outcome {
    if c.failures.is_empty() {
        Outcome::Pass(note)
    } else {
        Outcome::Fail(c.failures.join("; "))
    }
}

fn confirmatory(doc: &ResultDocument) -> &ConfirmatoryEntry {
    doc.confirmatory.as_ref().expect("confirmatory section")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let model = stats_model("app1_ttest.json");
    let doc = analyze(&[model], Some("mu = 5; mu > 5"), Some(&[0.5, 0.5, 0.0]), &EngineConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut c = Check::default();
    let h = &confirmatory(&doc).hypotheses;
    let table = [[0.195, 1.0, 0.205, 1.0], [1.0, 0.5, 1.0, 0.032], [1.0, 0.5, 1.0, 0.968]];
    for (i, want) in table.iter().enumerate() {
        let got = [h[i].comp_e.0, h[i].comp_o.0, h[i].fit_e.0, h[i].fit_o.0];
        for (k, name) in ["comp_E", "comp_O", "fit_E", "fit_O"].iter().enumerate() {
            c.near(&format!("H{} {name}", i + 1), got[k], want[k], 0.005);
        }
    }
    for (i, want) in [1.053, 0.064, 1.936].iter().enumerate() {
        c.rel(&format!("BF H{}", i + 1), h[i].bf.0, *want, 0.01);
    }
    for (i, want) in [0.943, 0.057, 0.0].iter().enumerate() {
        c.near(&format!("PHP H{}", i + 1), h[i].php.0, *want, 0.005);
    }
    let ex = &doc.exploratory[0].hypotheses;
    for (j, want) in [0.345, 0.634, 0.021].iter().enumerate() {
        c.near(&format!("exploratory {}", ex[j].label), ex[j].php.0, *want, 0.005);
    }
    c.rel("B12", confirmatory(&doc).evidence[0][1].0, 16.473, 0.01);
    c.holds(&format!("runtime {secs:.3}s >= 1s"), secs < 1.0);
    outcome(c, format!("t test table, BFs, PHP, exploratory, B12 ({secs:.3}s)"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let model = stats_model("app3_bartlett.json");
    let cfg = EngineConfig { n_draws: 100_000, ..EngineConfig::default() };
    let doc = analyze(&[model], Some("Controls = TS < ADHD; Controls < TS = ADHD; Controls = TS = ADHD"), None, &cfg)
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut c = Check::default();
    let ex = &doc.exploratory[0].hypotheses;
    c.near("homogeneity", ex[0].php.0, 0.803, 0.01);
    c.near("no homogeneity", ex[1].php.0, 0.197, 0.01);
    let h = &confirmatory(&doc).hypotheses;
    for (i, want) in [0.426, 0.278, 0.238, 0.058].iter().enumerate() {
        c.near(&format!("PHP {}", h[i].label), h[i].php.0, *want, 0.01);
    }
    c.holds(&format!("runtime {secs:.3}s >= 5s"), secs < 5.0);
    outcome(c, format!("group variances, exploratory and PHP ({secs:.3}s)"))
}

/// Synthetic Gaussian-approximation suite, standing in for the logistic
/// regression example whose dataset is not available here.
fn criterion_3() -> Outcome {
    let mut c = Check::default();
    let names: Vec<String> = ["ztrust", "zfWHR", "zAfro"].iter().map(|s| s.to_string()).collect();
    let est = [0.35, 0.12, -0.18];
    let cov = DMatrix::from_row_slice(3, 3, &[0.010, 0.002, 0.001, 0.002, 0.012, 0.003, 0.001, 0.003, 0.011]);
    let n = 120.0;
    let fam = gaussian_family(&names, &est, cov.clone(), n).unwrap();
    let cfg = EngineConfig::default();
    let ctx = McContext { seed: cfg.seed, stream: RandomStream::new(cfg.seed, 1), n_draws: cfg.n_draws };
    let space = fam.space().clone();

    // H1: all orders, three independent rows out of four
    let h1 = parse_one("ztrust > (zfWHR, zAfro) > 0", &space).unwrap();
    let m1 = fam.measures(&h1, &h1, &ctx).unwrap();
    let prior = GaussianSpec::new(DVector::zeros(3), &cov * (n / 3.0)).unwrap();
    let post = GaussianSpec::new(DVector::from_row_slice(&est), cov.clone()).unwrap();
    let inside = |t: &DVector<f64>| t[0] > t[1] && t[0] > t[2] && t[1] > 0.0 && t[2] > 0.0;
    let draws = 400_000;
    let oc = mc_mean(RandomStream::new(1, 11), draws, |r| f64::from(u8::from(inside(&prior.sample(r)))));
    let of = mc_mean(RandomStream::new(1, 12), draws, |r| f64::from(u8::from(inside(&post.sample(r)))));
    c.near("H1 comp_O vs sampling oracle", m1.comp_o, oc.mean(), 3.0 * (oc.se().powi(2) + m1.comp_o_se.powi(2)).sqrt());
    c.near("H1 fit_O vs sampling oracle", m1.fit_o, of.mean(), 3.0 * (of.se().powi(2) + m1.fit_o_se.powi(2)).sqrt());

    // H2: two equalities and one order; q = 3
    let h2 = parse_one("ztrust > zfWHR = zAfro = 0", &space).unwrap();
    let m2 = fam.measures(&h2, &h2, &ctx).unwrap();
    let sub = |m: &DMatrix<f64>| DMatrix::from_fn(2, 2, |i, j| m[(i + 1, j + 1)]);
    let pd = GaussianSpec::new(DVector::from_row_slice(&est[1..]), sub(&cov)).unwrap();
    let qd = GaussianSpec::new(DVector::zeros(2), sub(&cov) * (n / 3.0)).unwrap();
    let zero = DVector::zeros(2);
    c.near("H2 log fit_E closed form", m2.log_fit_e, pd.log_pdf(&zero), 1e-9);
    c.near("H2 log comp_E closed form", m2.log_comp_e, qd.log_pdf(&zero), 1e-9);
    c.near("H2 comp_O is one half at the boundary", m2.comp_o, 0.5, 1e-9);
    // conditional posterior of ztrust given the others at zero
    let s01 = cov.fixed_view::<1, 2>(0, 1).into_owned();
    let k = s01 * sub(&cov).try_inverse().unwrap();
    let cmean = est[0] - (&k * DVector::from_row_slice(&est[1..]))[0];
    let cvar = cov[(0, 0)] - (k * s01.transpose())[(0, 0)];
    let want = 1.0 - sdbf::distributions::norm_cdf(-cmean / cvar.sqrt());
    c.near("H2 fit_O closed form", m2.fit_o, want, 1e-9);

    let doc = analyze(
        &[sdbf::input::Model::Gauss(fam)],
        Some("ztrust > (zfWHR, zAfro) > 0; ztrust > zfWHR = zAfro = 0"),
        None,
        &cfg,
    )
    .unwrap();
    let conf = confirmatory(&doc);
    let total: f64 = conf.hypotheses.iter().map(|h| h.php.0).sum();
    c.near("PHP sums to one", total, 1.0, 1e-12);
    for i in 0..3 {
        for j in 0..3 {
            c.near("evidence reciprocity", conf.evidence[i][j].0 * conf.evidence[j][i].0, 1.0, 1e-9);
        }
    }
    let row = &doc.exploratory[2].hypotheses;
    c.near("exploratory row sums to one", row.iter().map(|h| h.php.0).sum(), 1.0, 1e-12);
    c.holds("exploratory zAfro: negative effect beats positive", row[1].php.0 > row[2].php.0);
    outcome(c, "replaced by synthetic Gaussian-approximation suite (dataset unavailable)".into())
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let model = stats_model("app6_corr.json");
    let h = std::fs::read_to_string(fixture("app6_hypothesis.txt")).unwrap();
    let cfg = EngineConfig { n_draws: 1_000_000, ..EngineConfig::default() };
    let doc = analyze(&[model], Some(h.trim()), None, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut c = Check::default();
    let conf = confirmatory(&doc);
    let bf = conf.evidence[0][1].0;
    c.holds(
        &format!("BF(H1, complement) = {bf:.1} not within a factor of 2 of 4631.01"),
        bf > 4631.01 / 2.0 && bf < 4631.01 * 2.0,
    );
    c.holds(&format!("PHP(H1) = {} < 0.99", conf.hypotheses[0].php.0), conf.hypotheses[0].php.0 >= 0.99);
    c.holds(&format!("runtime {secs:.1}s >= 60s"), secs < 60.0);
    outcome(c, format!("15 order constraints, BF {bf:.1}, PHP {:.4} ({secs:.1}s)", conf.hypotheses[0].php.0))
}

fn criterion_5() -> Outcome {
    Outcome::Skip("conditional on the fMRI dataset, which is not available".into())
}

/// Bivariate regression used for Monte Carlo checks on the mixture path.
fn lm_model() -> sdbf::adapters::LmFamily {
    let mut csv = String::from("y1,y2,x\n");
    for i in 0..40 {
        let x = (i as f64 - 20.0) / 10.0;
        let y1 = 0.5 + 0.8 * x + ((i * 7 % 11) as f64 - 5.0) / 6.0;
        let y2 = -0.2 + 0.3 * x + ((i * 5 % 13) as f64 - 6.0) / 7.0;
        csv.push_str(&format!("{y1},{y2},{x}\n"));
    }
    let ds = Dataset::from_reader(csv.as_bytes()).unwrap();
    let spec = ModelSpec {
        test: TestKind::Lm,
        outcomes: vec!["y1".into(), "y2".into()],
        predictors: vec!["x".into()],
        group: None,
        null: 0.0,
        intercept: true,
    };
    match build_from_data(&ds, &spec).unwrap() {
        Model::Lm(f) => f,
        _ => unreachable!(),
    }
}

/// Random hypothesis text over parameters a, b, c, d.
fn random_hypothesis(rng: &mut ChaCha20Rng) -> String {
    let names = ["a", "b", "c", "d"];
    let term = |rng: &mut ChaCha20Rng| -> String {
        let name = names[rng.random_range(0..names.len())];
        match rng.random_range(0..4) {
            0 => format!("{}*{name}", rng.random_range(1..5)),
            1 => format!("{}{name}", rng.random_range(1..20) as f64 / 4.0),
            _ => name.to_string(),
        }
    };
    let side = |rng: &mut ChaCha20Rng| -> String {
        match rng.random_range(0..5) {
            0 => format!("{}", rng.random_range(-40..40) as f64 / 8.0),
            1 => format!("({}, {})", names[rng.random_range(0..2)], names[rng.random_range(2..4)]),
            2 => format!("{} - {}", term(rng), term(rng)),
            3 => format!("{} + {}", term(rng), rng.random_range(0..9)),
            _ => term(rng),
        }
    };
    let ops = ["=", "<", ">"];
    let n = rng.random_range(1..4);
    (0..n)
        .map(|_| format!("{} {} {}", side(rng), ops[rng.random_range(0..3)], side(rng)))
        .collect::<Vec<_>>()
        .join(" & ")
}

fn criterion_6() -> Outcome {
    let mut c = Check::default();
    let cfg = EngineConfig::default();
    let ctx = |id| McContext { seed: cfg.seed, stream: RandomStream::new(cfg.seed, id), n_draws: cfg.n_draws };

    // normalization and reciprocity on random Bayes factors
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..200 {
        let k = rng.random_range(2..7);
        let lbf: Vec<f64> = (0..k).map(|_| rng.random_range(-30.0..30.0)).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let p = posterior_probs(&lbf, &w).unwrap();
        c.near("PHP normalization", p.iter().sum(), 1.0, 1e-12);
        let e = evidence_matrix(&lbf);
        for i in 0..k {
            for j in 0..k {
                c.near("evidence reciprocity", e[(i, j)] * e[(j, i)], 1.0, 1e-9);
            }
        }
    }

    // complementary half-spaces and boundary comp_O on the Monte Carlo path
    let lm = lm_model();
    let up = parse_one("x_on_y1 > Intercept_on_y2", lm.space()).unwrap();
    let down = parse_one("x_on_y1 < Intercept_on_y2", lm.space()).unwrap();
    let mu = lm.measures_by_mixture(&up, &ctx(1)).unwrap();
    let md = lm.measures_by_mixture(&down, &ctx(2)).unwrap();
    let se = (mu.fit_o_se.powi(2) + md.fit_o_se.powi(2)).sqrt();
    c.near("complementary half-spaces, fit_O", mu.fit_o + md.fit_o, 1.0, 3.0 * se);
    let se = (mu.comp_o_se.powi(2) + md.comp_o_se.powi(2)).sqrt();
    c.near("complementary half-spaces, comp_O", mu.comp_o + md.comp_o, 1.0, 3.0 * se);
    c.near("boundary-centered comp_O", mu.comp_o, 0.5, 3.0 * mu.comp_o_se);

    // density ratio against quadrature of the fractional likelihoods
    for (x, s2, n) in [(0.4, 0.04, 30.0), (-1.3, 0.5, 12.0), (0.05, 0.001, 400.0)] {
        let fam = gaussian_family(&["t".to_string()], &[x], DMatrix::from_element(1, 1, s2), n).unwrap();
        let h = parse_one("t = 0", fam.space()).unwrap();
        let m = fam.measures(&h, &h, &ctx(3)).unwrap();
        let b = 1.0 / n;
        let lik = |t: f64, power: f64, centre: f64| (-(t - centre).powi(2) / (2.0 * s2) * power).exp();
        let integrate = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
            let steps = 20_000;
            let hstep = (hi - lo) / steps as f64;
            let mut acc = f(lo) + f(hi);
            for i in 1..steps {
                acc += f(lo + i as f64 * hstep) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * hstep / 3.0
        };
        let sd = s2.sqrt();
        let post0 = lik(0.0, 1.0, x) / integrate(&|t| lik(t, 1.0, x), x - 12.0 * sd, x + 12.0 * sd);
        let wide = 12.0 * sd / b.sqrt();
        let prior0 = 1.0 / integrate(&|t| lik(t, b, 0.0), -wide, wide);
        c.near("Savage-Dickey vs quadrature", m.bf_e(), post0 / prior0, 1e-6 * (post0 / prior0).max(1.0));
    }

    // exhaustive disjoint orderings
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.0]) * 0.05;
    let fam = gaussian_family(&names, &[0.2, 0.1, -0.1], cov, 50.0).unwrap();
    let perms = ["a > b > c", "a > c > b", "b > a > c", "b > c > a", "c > a > b", "c > b > a"];
    let (mut total, mut var) = (0.0, 0.0);
    for (i, p) in perms.iter().enumerate() {
        let h = parse_one(p, fam.space()).unwrap();
        let m = fam.measures(&h, &h, &ctx(10 + i as u64)).unwrap();
        total += m.fit_o;
        var += m.fit_o_se.powi(2);
    }
    c.near("exhaustive orderings, sum of fit_O", total, 1.0, (3.0 * var.sqrt()).max(1e-9));

    // parser round trip
    let space = ParameterSpace::new(["a", "b", "c", "d"]).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let (mut parsed, mut bad) = (0, 0);
    for _ in 0..10_000 {
        let text = random_hypothesis(&mut rng);
        let result = std::panic::catch_unwind(|| parse(&text, &space));
        match result {
            Err(_) => bad += 1,
            Ok(Err(Error::Parse(_) | Error::Infeasible(_) | Error::RedundantEqualities(_))) => {}
            Ok(Err(_)) => bad += 1,
            Ok(Ok(hs)) => {
                parsed += 1;
                let again = parse_one(&hs[0].pretty(&space), &space);
                if again.as_ref().map(|h| *h != hs[0]).unwrap_or(true) {
                    bad += 1;
                }
            }
        }
    }
    c.holds(&format!("parser fuzz: {bad} failures"), bad == 0);
    c.holds(&format!("parser fuzz: only {parsed} inputs parsed"), parsed > 2_000);

    // determinism
    let run = || {
        let doc = analyze(
            &[stats_model("app3_bartlett.json")],
            Some("Controls < TS < ADHD; Controls = TS = ADHD"),
            None,
            &cfg,
        )
        .unwrap();
        render_json(&doc)
    };
    c.holds("identical seeds give identical JSON", run() == run());
    outcome(c, format!("property suite ({parsed} fuzz inputs round-tripped)"))
}

fn criterion_7() -> Outcome {
    let mut c = Check::default();

    let g = GaussianSpec::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
    let acc = mc_mean(RandomStream::new(7, 1), 200_000, |r| {
        let x = g.sample(r);
        f64::from(u8::from(x[0] > 0.0 && x[1] > 0.0))
    });
    c.near("orthant probability, sampling", acc.mean(), 1.0 / 3.0, 3.0 * acc.se());
    c.near("orthant probability, exact", bvn_upper(0.0, 0.0, 0.5), 1.0 / 3.0, 1e-12);

    let scale = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.2, 0.5, 1.5, 0.3, 0.2, 0.3, 1.0]);
    let df = 9.0;
    let iw = InverseWishart::new(&scale, df).unwrap();
    let n = 100_000;
    let mut rng = RandomStream::new(7, 2).rng();
    let draws: Vec<DMatrix<f64>> = (0..n).map(|_| iw.sample(&mut rng)).collect();
    let want = &scale / (df - 3.0 - 1.0);
    for i in 0..3 {
        for j in 0..=i {
            let vals: Vec<f64> = draws.iter().map(|d| d[(i, j)]).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            c.near(&format!("inverse-Wishart mean [{i},{j}]"), mean, want[(i, j)], 3.0 * (var / n as f64).sqrt());
        }
    }

    let onion = UniformCorrelation::new(2).unwrap();
    let mut rng = RandomStream::new(7, 3).rng();
    let m = 20_000;
    let mut xs: Vec<f64> = (0..m).map(|_| onion.sample(&mut rng)[(0, 1)]).collect();
    xs.sort_by(f64::total_cmp);
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = (x + 1.0) / 2.0;
            (f - i as f64 / m as f64).abs().max(((i + 1) as f64 / m as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    let critical = 1.628 / (m as f64).sqrt();
    c.holds(&format!("KS statistic {d:.4} exceeds {critical:.4}"), d < critical);
    outcome(c, "orthant probability, inverse-Wishart means, uniform correlation marginal".into())
}

#[test]
fn acceptance() {
    let criteria: [(usize, fn() -> Outcome); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    let mut failed = Vec::new();
    for (k, f) in criteria {
        match f() {
            Outcome::Pass(note) => println!("PASS criterion {k}: {note}"),
            Outcome::Fail(why) => {
                println!("FAIL criterion {k}: {why}");
                failed.push(k);
            }
            Outcome::Skip(why) => println!("SKIP criterion {k}: {why}"),
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
