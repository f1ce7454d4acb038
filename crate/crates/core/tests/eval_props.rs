mod common;

use common::XorShift;
use proptest::prelude::*;
use splatstereo::eval::{
    aggregate, bad_count, bad_tau, evaluate_pair, render_report, report_json, select_best_checkpoint, DatasetFamily,
    EvalConfig, EvalError, EvalReport, NamedPair, PairResult, Weighting,
};
use splatstereo::raster::{DisparityMap, Grid, Mask};

fn row(v: &[f64]) -> DisparityMap {
    DisparityMap::from_values(Grid::from_vec(v.len(), 1, v.to_vec()))
}

fn all(n: usize) -> Mask {
    Grid::filled(n, 1, true)
}

fn random_pair(seed: u64, n: usize) -> (DisparityMap, DisparityMap) {
    let mut rng = XorShift(seed);
    let gt: Vec<f64> = (0..n).map(|_| if rng.next_f64() < 0.1 { 0.0 } else { rng.range(1.0, 100.0) }).collect();
    let pred: Vec<f64> = gt
        .iter()
        .map(|g| if rng.next_f64() < 0.05 { 0.0 } else { (g + rng.range(-6.0, 6.0)).max(0.0) })
        .collect();
    (row(&pred), row(&gt))
}

/// Counts directly over the raw arrays.
fn oracle_percent(pred: &[f64], gt: &[f64], tau: f64) -> f64 {
    let evaluated: Vec<(f64, f64)> = pred.iter().zip(gt).filter(|(_, g)| **g > 0.0).map(|(p, g)| (*p, *g)).collect();
    let bad = evaluated.iter().filter(|(p, g)| *p <= 0.0 || (p - g).abs() > tau).count();
    100.0 * bad as f64 / evaluated.len() as f64
}

#[test]
fn reference_error_ladder() {
    let gt = row(&[10.0; 5]);
    let pred = row(&[10.0, 11.0, 12.0, 13.0, 14.0]);
    assert_eq!(bad_tau(&pred, &gt, &all(5), 2.0).unwrap(), 40.0);
}

#[test]
fn family_thresholds() {
    assert_eq!(DatasetFamily::Eth3d.tau(), 1.0);
    assert_eq!(DatasetFamily::Middlebury.tau(), 2.0);
    assert_eq!(DatasetFamily::Kitti.tau(), 3.0);
    assert_eq!("kitti-15".parse::<DatasetFamily>().unwrap(), DatasetFamily::Kitti);
    assert_eq!(EvalConfig::for_family(DatasetFamily::Eth3d).tau, 1.0);
}

#[test]
fn matches_counting_oracle() {
    for seed in 1..50 {
        let (p, g) = random_pair(seed, 500);
        for tau in [0.5, 1.0, 2.0, 3.0] {
            let got = bad_tau(&p, &g, &all(500), tau).unwrap();
            assert_eq!(got, oracle_percent(p.values.as_slice(), g.values.as_slice(), tau));
        }
    }
}

#[test]
fn empty_evaluation_set_is_an_error() {
    let z = row(&[0.0, 0.0]);
    assert_eq!(bad_tau(&z, &z, &all(2), 1.0), Err(EvalError::EmptyEvaluationSet));
    let g = row(&[1.0, 2.0]);
    assert_eq!(bad_tau(&g, &g, &Grid::filled(2, 1, false), 1.0), Err(EvalError::EmptyEvaluationSet));
}

#[test]
fn noc_evaluates_a_subset() {
    let gt = row(&[5.0, 5.0, 5.0, 5.0]);
    let pred = row(&[5.0, 9.0, 5.0, 9.0]);
    let noc = Grid::from_vec(4, 1, vec![true, false, true, true]);
    let r = evaluate_pair(&pred, &gt, &noc, &EvalConfig::new("x", 2.0)).unwrap();
    assert_eq!((r.evaluated_all, r.bad_all, r.evaluated_noc, r.bad_noc), (4, 2, 3, 1));
    assert_eq!(r.all_pct, 50.0);
}

fn result(bad: usize, total: usize) -> PairResult {
    let pct = 100.0 * bad as f64 / total as f64;
    PairResult { all_pct: pct, noc_pct: pct, evaluated_all: total, evaluated_noc: total, bad_all: bad, bad_noc: bad }
}

#[test]
fn pair_and_pixel_weighting_differ_as_expected() {
    let rs = [result(1, 10), result(50, 100)];
    assert_eq!(aggregate(&rs, Weighting::Pair).unwrap().0, 30.0);
    assert_eq!(aggregate(&rs, Weighting::Pixel).unwrap().0, 100.0 * 51.0 / 110.0);
    assert_eq!(aggregate(&[], Weighting::Pair), Err(EvalError::EmptyInput));
}

fn report(pcts: &[(&str, f64)]) -> EvalReport {
    EvalReport::new(
        pcts.iter()
            .map(|(n, p)| {
                let r = PairResult { all_pct: *p, noc_pct: *p, evaluated_all: 1, evaluated_noc: 1, bad_all: 0, bad_noc: 0 };
                (EvalConfig::new(*n, 1.0), vec![NamedPair { id: "0".into(), result: r }])
            })
            .collect(),
        Weighting::Pair,
    )
    .unwrap()
}

#[test]
fn report_text_and_json() {
    let r = report(&[("kitti-15", 5.52), ("eth3d", 2.35)]);
    let text = render_report(&r);
    assert!(text.contains(" 5.52 "), "{text}");
    assert!(text.lines().last().unwrap().starts_with("mean"));
    let back: EvalReport = serde_json::from_str(&report_json(&r)).unwrap();
    assert_eq!(back, r);
    let empty = EvalReport::new(vec![], Weighting::Pair).unwrap();
    assert_eq!(render_report(&empty).lines().count(), 1);
}

#[test]
fn checkpoint_selection() {
    let reports = vec![
        ("a".to_string(), report(&[("x", 5.0), ("y", 3.0)])),
        ("b".to_string(), report(&[("x", 4.0), ("y", 2.0)])),
        ("c".to_string(), report(&[("x", 2.0), ("y", 4.0)])),
    ];
    assert_eq!(select_best_checkpoint(&reports).unwrap(), "b");
    let mismatched = vec![reports[0].clone(), ("d".to_string(), report(&[("x", 1.0)]))];
    assert_eq!(select_best_checkpoint(&mismatched), Err(EvalError::InconsistentSuite { checkpoint: "d".into() }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn anti_monotone_in_tau(seed in 1u64.., t1 in 0.0f64..5.0, dt in 0.0f64..5.0) {
        let (p, g) = random_pair(seed, 300);
        let a = bad_tau(&p, &g, &all(300), t1).unwrap();
        let b = bad_tau(&p, &g, &all(300), t1 + dt).unwrap();
        prop_assert!(a >= b);
    }

    #[test]
    fn invariant_under_pixel_permutation(seed in 1u64.., shift in 0usize..300, tau in 0.5f64..4.0) {
        let (p, g) = random_pair(seed, 300);
        let mut pv = p.values.into_vec();
        let mut gv = g.values.into_vec();
        let before = bad_tau(&row(&pv), &row(&gv), &all(300), tau).unwrap();
        pv.rotate_left(shift);
        gv.rotate_left(shift);
        pv.reverse();
        gv.reverse();
        prop_assert_eq!(bad_tau(&row(&pv), &row(&gv), &all(300), tau).unwrap(), before);
    }

    #[test]
    fn binary_error_maps_give_exact_fraction(bits in proptest::collection::vec(any::<bool>(), 1..200), tau in 0.5f64..3.0) {
        let gt: Vec<f64> = vec![50.0; bits.len()];
        let pred: Vec<f64> = bits.iter().map(|b| if *b { 50.0 + 2.0 * tau } else { 50.0 }).collect();
        let c = bad_count(&row(&pred), &row(&gt), &all(bits.len()), tau).unwrap();
        prop_assert_eq!(c.bad, bits.iter().filter(|b| **b).count());
        prop_assert_eq!(c.total, bits.len());
    }

    #[test]
    fn checkpoint_choice_survives_affine_rescaling(scores in proptest::collection::vec(0.0f64..50.0, 1..6), a in 0.1f64..10.0, b in 0.0f64..10.0) {
        let make = |f: &dyn Fn(f64) -> f64| -> Vec<(String, EvalReport)> {
            scores.iter().enumerate().map(|(i, s)| (format!("ck{i}"), report(&[("x", f(*s))]))).collect()
        };
        let plain = make(&|s| s);
        let scaled = make(&|s| a * s + b);
        prop_assert_eq!(select_best_checkpoint(&plain).unwrap(), select_best_checkpoint(&scaled).unwrap());
    }
}
