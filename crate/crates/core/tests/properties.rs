use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sdbf::adapters::gaussian_family;
use sdbf::constrained::build_transformation;
use sdbf::engine::{
    aggregate_imputations, evidence_matrix, exploratory, parameter_triads, posterior_probs, EngineConfig, Measures,
};
use sdbf::hypothesis::{parse_one, ParameterSpace};
use sdbf::report::Real;

fn measures() -> impl Strategy<Value = Measures> {
    (-5.0..2.0f64, -5.0..2.0f64, 0.01..1.0f64, 0.0..1.0f64).prop_map(|(ce, fe, co, fo)| Measures {
        log_comp_e: ce,
        log_fit_e: fe,
        comp_o: co,
        fit_o: fo,
        comp_o_se: 0.0,
        fit_o_se: 0.0,
    })
}

proptest! {
    #[test]
    fn probabilities_normalize(lbf in prop::collection::vec(-50.0..50.0f64, 1..8), seed in 0u64..1000) {
        let w: Vec<f64> = (0..lbf.len()).map(|i| 1.0 + ((seed + i as u64) % 5) as f64).collect();
        let p = posterior_probs(&lbf, &w).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn evidence_is_reciprocal(lbf in prop::collection::vec(-20.0..20.0f64, 2..6)) {
        let e = evidence_matrix(&lbf);
        for i in 0..lbf.len() {
            prop_assert!((e[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..lbf.len() {
                prop_assert!((e[(i, j)] * e[(j, i)] - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn aggregating_copies_is_identity(m in prop::collection::vec(measures(), 1..4), copies in 1usize..5) {
        let tables = vec![m.clone(); copies];
        let out = aggregate_imputations(&tables).unwrap();
        for (a, b) in out.iter().zip(&m) {
            prop_assert!((a.log_comp_e - b.log_comp_e).abs() < 1e-12);
            prop_assert!((a.log_fit_e - b.log_fit_e).abs() < 1e-12);
            prop_assert!((a.fit_o - b.fit_o).abs() < 1e-12);
            prop_assert!((a.comp_o - b.comp_o).abs() < 1e-12);
        }
    }

    #[test]
    fn real_round_trips(v in any::<f64>()) {
        let s = serde_json::to_string(&Real(v)).unwrap();
        let back: Real = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, Real(v));
    }

    /// Mirroring the estimate swaps the one-sided probabilities.
    #[test]
    fn triads_are_mirror_symmetric(est in -2.0..2.0f64, var in 0.01..1.0f64, n in 10.0..500.0f64) {
        let cfg = EngineConfig { n_draws: 1000, ..EngineConfig::default() };
        let row = |e: f64| {
            let f = gaussian_family(&["b".to_string()], &[e], DMatrix::from_element(1, 1, var), n).unwrap();
            let sets = parameter_triads(&f);
            exploratory(&f, &sets, &cfg).unwrap().0.remove(0).php
        };
        let (a, b) = (row(est), row(-est));
        prop_assert!((a[0] - b[0]).abs() < 1e-12);
        prop_assert!((a[1] - b[2]).abs() < 1e-12);
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    /// A point satisfies the constraints exactly when its transformed
    /// coordinates do.
    #[test]
    fn transformation_preserves_membership(
        which in 0usize..6,
        points in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 4), 200),
    ) {
        let space = ParameterSpace::new(["a", "b", "c", "d"]).unwrap();
        let text = ["a > b > c > d", "a = b & c > d", "(a, b) > (c, d)", "a + b > 1 & a - c > 0", "a > b & b > c & a > c", "2a = c & b > 0.5"][which];
        let cm = parse_one(text, &space).unwrap();
        let t = build_transformation(&cm).unwrap();
        for p in points {
            let mut theta = DVector::from_vec(p);
            if cm.n_equalities() > 0 {
                // project onto the equality set so both sides can hold
                let (re, r_e) = (&cm.re, &cm.r_e);
                let pinv = sdbf::linalg::pinv(re);
                theta -= &pinv * (re * &theta - r_e);
            }
            let eta = t.transform(&theta);
            prop_assert_eq!(cm.contains(&theta, 1e-9), t.contains(&eta, &cm.r_e, 1e-9));
        }
    }
}
