use fairscope::fairness::{
    fdr_auc, fdr_from_rates, fdr_value, max_pairwise_gap, min_imposters, PairKind, ScoreEntry, ALL_GROUPS,
};
use fairscope::{oracle, synthetic, ComparisonScoreSet, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn imposters(entries: &[ScoreEntry]) -> Vec<f64> {
    entries.iter().filter(|e| e.kind == PairKind::Imposter).map(|e| e.score).collect()
}

#[test]
fn rates_match_counting_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..200 {
        let entries = synthetic::random_scores(seed, r.random_range(1..=4), 250);
        let set = ComparisonScoreSet::new(entries.clone()).unwrap();
        let groups: Vec<String> = set.groups().into_iter().chain([ALL_GROUPS.to_string()]).collect();
        for _ in 0..50 {
            // Mix observed scores (exact ties) with arbitrary thresholds.
            let tau = if r.random_bool(0.5) {
                entries[r.random_range(0..entries.len())].score
            } else {
                r.random_range(-1.2..1.2)
            };
            for g in &groups {
                assert_eq!(set.fmr(g, tau).unwrap(), oracle::fmr(&entries, g, tau).unwrap());
                assert_eq!(set.fnmr(g, tau).unwrap(), oracle::fnmr(&entries, g, tau).unwrap());
            }
        }
    }
}

#[test]
fn calibration_matches_enumeration() {
    for seed in 0..40 {
        let entries = synthetic::random_scores(500 + seed, 3, 400);
        let set = ComparisonScoreSet::new(entries.clone()).unwrap();
        let imp = imposters(&entries);
        for target in [0.3, 0.1, 0.01, 1e-3] {
            let expected = oracle::calibrate(&imp, target);
            match set.calibrate_tau(target) {
                Ok(c) => {
                    assert_eq!(Some((c.tau, c.achieved_fmr)), expected, "seed {seed} target {target}");
                    assert!(c.achieved_fmr <= target);
                }
                Err(Error::UnresolvableTarget { required, available, .. }) => {
                    assert!((available as u64) < required);
                }
                Err(Error::TiedMaximum { .. }) => assert_eq!(expected, None),
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn calibration_matches_enumeration_on_ten_thousand_scores() {
    let entries = synthetic::comparison_scores(&[("a", 0.0, 0.0), ("b", 0.0, 0.05)], 10, 5000, 8);
    let set = ComparisonScoreSet::new(entries.clone()).unwrap();
    let imp = imposters(&entries);
    assert_eq!(imp.len(), 10_000);
    for target in [1e-1, 1e-2, 1e-3, 1e-4] {
        let c = set.calibrate_tau(target).unwrap();
        assert_eq!(Some((c.tau, c.achieved_fmr)), oracle::calibrate(&imp, target), "target {target}");
    }
}

#[test]
fn too_few_imposters_is_unresolvable() {
    let entries: Vec<ScoreEntry> = (0..10)
        .map(|k| ScoreEntry { pair_id: k.to_string(), group: "g".into(), kind: PairKind::Imposter, score: k as f64 })
        .collect();
    let set = ComparisonScoreSet::new(entries).unwrap();
    assert!(matches!(set.calibrate_tau(1e-3), Err(Error::UnresolvableTarget { required: 1000, available: 10, .. })));
    assert_eq!(set.calibrate_tau(0.1).unwrap().tau, 9.0);
    assert_eq!(min_imposters(1e-5), 100_000);
    assert_eq!(min_imposters(0.3), 4);
}

#[test]
fn fdr_matches_brute_force_over_curve() {
    let entries = synthetic::comparison_scores(&[("a", 0.0, 0.0), ("b", -0.04, 0.02), ("c", 0.03, -0.01)], 300, 1000, 3);
    let set = ComparisonScoreSet::new(entries.clone()).unwrap();
    let groups = set.groups();
    let targets = [1e-1, 1e-2, 1e-3, 5e-4];
    let report = set.fdr_curve(&groups, &targets, 0.3).unwrap();
    let imp = imposters(&entries);
    let mut fdrs = Vec::new();
    for (point, &target) in report.points.iter().zip(&targets) {
        let (tau, achieved) = oracle::calibrate(&imp, target).unwrap();
        assert_eq!((point.calibration.tau, point.calibration.achieved_fmr), (tau, achieved));
        let fmrs: Vec<f64> = groups.iter().map(|g| oracle::fmr(&entries, g, tau).unwrap()).collect();
        let fnmrs: Vec<f64> = groups.iter().map(|g| oracle::fnmr(&entries, g, tau).unwrap()).collect();
        let mut a = 0.0f64;
        let mut b = 0.0f64;
        for i in 0..groups.len() {
            for j in 0..groups.len() {
                a = a.max((fmrs[i] - fmrs[j]).abs());
                b = b.max((fnmrs[i] - fnmrs[j]).abs());
            }
        }
        let fdr = 1.0 - (0.3 * a + 0.7 * b);
        assert_eq!((point.point.a_tau, point.point.b_tau), (a, b));
        assert!((point.point.fdr - fdr).abs() < 1e-15);
        fdrs.push(fdr);
    }
    let auc: f64 = fdrs.windows(2).map(|w| (w[0] + w[1]) / 2.0 / 3.0).sum();
    assert!((report.fdr_auc - auc).abs() < 1e-12);
    assert_eq!(report.curve.len(), 4);
    assert!(report.curve.windows(2).all(|w| w[0].target_fmr > w[1].target_fmr));
}

#[test]
fn published_rows_recompute() {
    let p = fdr_from_rates([("C", 0.007, 0.040), ("E", 0.026, 0.127), ("A", 0.017, 0.085), ("I", 0.022, 0.082)], 0.5).unwrap();
    assert!((p.fdr - 0.946).abs() <= 0.015);
    let g = fdr_from_rates([("m", 0.011, 0.085), ("f", 0.016, 0.083)], 0.5).unwrap();
    assert!((g.fdr - 0.997).abs() <= 0.005);
}

#[test]
fn fdr_building_blocks() {
    assert_eq!(max_pairwise_gap(&[0.1, 0.4, 0.25]), 0.30000000000000004);
    assert_eq!(fdr_value(0.0, 0.0, 0.5), 1.0);
    assert_eq!(fdr_value(1.0, 1.0, 0.2), 0.0);
    assert_eq!(fdr_auc(&[1.0, 1.0, 1.0]), 1.0);
    assert_eq!(fdr_auc(&[0.9]), 0.9);
}

#[test]
fn errors_for_degenerate_inputs() {
    let entries = synthetic::random_scores(9, 1, 20);
    let set = ComparisonScoreSet::new(entries).unwrap();
    assert!(matches!(set.fdr(&set.groups(), 0.0, 0.5), Err(Error::TooFewGroups(1))));
    assert!(matches!(set.fmr("missing", 0.0), Err(Error::EmptyGroup { .. })));
    assert!(set.calibrate_tau(0.0).is_err());
    assert!(set.fdr(&["g0".into(), "g0".into()], 0.0, 1.5).is_err());
    let bad = vec![ScoreEntry { pair_id: "x".into(), group: ALL_GROUPS.into(), kind: PairKind::Genuine, score: 0.1 }];
    assert!(ComparisonScoreSet::new(bad).is_err());
}
