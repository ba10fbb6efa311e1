//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Every tolerance is fixed here.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use fairscope::cam::{score_cam, score_cam_symmetrized, Layer};
use fairscope::fairness::{fdr_from_rates, PairKind, ScoreEntry, ALL_GROUPS};
use fairscope::io::{encode_amap_archive, read_amap_archive, CohortManifest};
use fairscope::pipeline::{run_fairness, run_report, run_stats, RunConfig};
use fairscope::selftest::TABLE_ROWS;
use fairscope::stats::{compute_spatial_profile, damv_from_grids, Cohort, CohortStatistics};
use fairscope::synthetic::{self, DemoSize};
use fairscope::{oracle, ActivationMap, ComparisonScoreSet, Demographics, Grid, ToyModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TABLE_RUNTIME: Duration = Duration::from_secs(1);
const RATE_ORACLE_SETS: usize = 1000;
const RATE_ORACLE_MAX_ENTRIES: usize = 1000;
const RATE_ORACLE_THRESHOLDS: usize = 100;
const RATE_ORACLE_RUNTIME: Duration = Duration::from_secs(10);
const CALIBRATION_MAX_SET: usize = 10_000;
const PROFILE_GRIDS: usize = 100;
const PROFILE_REL_TOL: f64 = 1e-9;
const FORWARD_SPECS: u64 = 50;
const FORWARD_TOL: f64 = 1e-12;
const SOFTMAX_TOL: f64 = 1e-12;
const FLIP_TOL: f64 = 1e-9;
const LOCALIZATION_MIN_MASS: f64 = 0.8;
const SUITE_RUNTIME: Duration = Duration::from_secs(120);

type Outcome = Result<String, String>;

struct Gate {
    failures: usize,
}

impl Gate {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS  {name}  [{detail}; {ms} ms]"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL  {name}  [{detail}; {ms} ms]");
            }
        }
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn table_row(index: usize) -> Outcome {
    let start = Instant::now();
    let row = &TABLE_ROWS[index];
    let p = ok(fdr_from_rates(row.rates.iter().copied(), 0.5))?;
    let elapsed = start.elapsed();
    ensure((p.fdr - row.published).abs() <= row.tolerance, || {
        format!("FDR {:.4} vs published {:.3} ± {}", p.fdr, row.published, row.tolerance)
    })?;
    ensure(elapsed < TABLE_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!("FDR {:.4} vs {:.3} ± {}; A {:.4} B {:.4}", p.fdr, row.published, row.tolerance, p.a_tau, p.b_tau))
}

fn rate_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(2024);
    let mut comparisons = 0usize;
    for set_index in 0..RATE_ORACLE_SETS {
        let groups = r.random_range(1..=4);
        let per_kind = RATE_ORACLE_MAX_ENTRIES / (2 * groups);
        let entries = synthetic::random_scores(set_index as u64, groups, per_kind);
        ensure(entries.len() <= RATE_ORACLE_MAX_ENTRIES, || format!("set {set_index} too large"))?;
        let set = ok(ComparisonScoreSet::new(entries.clone()))?;
        let names: Vec<String> = set.groups().into_iter().chain([ALL_GROUPS.to_string()]).collect();
        for _ in 0..RATE_ORACLE_THRESHOLDS {
            let tau = if r.random_bool(0.5) {
                entries[r.random_range(0..entries.len())].score
            } else {
                r.random_range(-1.1..1.1)
            };
            for g in &names {
                let fast = (ok(set.fmr(g, tau))?, ok(set.fnmr(g, tau))?);
                let slow = (oracle::fmr(&entries, g, tau).unwrap(), oracle::fnmr(&entries, g, tau).unwrap());
                ensure(fast == slow, || format!("set {set_index} group {g} tau {tau}: {fast:?} vs {slow:?}"))?;
                comparisons += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < RATE_ORACLE_RUNTIME, || format!("took {elapsed:?}, limit {RATE_ORACLE_RUNTIME:?}"))?;
    Ok(format!("{RATE_ORACLE_SETS} sets x {RATE_ORACLE_THRESHOLDS} thresholds, {comparisons} group checks, exact"))
}

fn calibration_enumeration() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    let sizes: Vec<usize> =
        (0..150).map(|_| r.random_range(1..=2000)).chain([CALIBRATION_MAX_SET; 3]).collect();
    for (k, &n) in sizes.iter().enumerate() {
        let coarse = k % 2 == 0;
        let imposters: Vec<f64> = (0..n)
            .map(|_| if coarse { r.random_range(0..50) as f64 / 50.0 } else { r.random::<f64>() })
            .collect();
        let entries: Vec<ScoreEntry> = imposters
            .iter()
            .enumerate()
            .map(|(i, &score)| ScoreEntry {
                pair_id: i.to_string(),
                group: if i % 2 == 0 { "a" } else { "b" }.into(),
                kind: PairKind::Imposter,
                score,
            })
            .collect();
        let set = ok(ComparisonScoreSet::new(entries))?;
        for target in [0.5, 0.1, 0.01, 1e-3, 1e-4] {
            let expected = oracle::calibrate(&imposters, target);
            match set.calibrate_tau(target) {
                Ok(c) => {
                    ensure(Some((c.tau, c.achieved_fmr)) == expected, || {
                        format!("n {n} target {target}: {c:?} vs {expected:?}")
                    })?;
                    checked += 1;
                }
                Err(fairscope::Error::UnresolvableTarget { .. }) => {
                    ensure((n as f64) < 1.0 / target, || format!("n {n} target {target}: spurious unresolvable"))?
                }
                Err(fairscope::Error::TiedMaximum { .. }) => {
                    ensure(expected.is_none(), || format!("n {n} target {target}: oracle found {expected:?}"))?
                }
                Err(e) => return Err(e.to_string()),
            }
        }
    }
    Ok(format!("{checked} calibrations on {} sets up to {CALIBRATION_MAX_SET} scores, exact", sizes.len()))
}

fn cohort_statistics_hand_cases() -> Outcome {
    let tag = Demographics::default();
    let map = |v: f64| ActivationMap::new("m", Grid::filled(1, 1, v), tag).unwrap();
    let s = ok(CohortStatistics::compute(&ok(Cohort::new("x", vec![map(0.2), map(0.6)]))?))?;
    let (mam, amv) = (s.mam.values()[0], s.amv.values()[0]);
    ensure(mam == 0.4, || format!("MAM {mam:?}, expected 0.4"))?;
    // 0.2 is not representable; accept the correctly rounded neighbour.
    ensure((amv - 0.2).abs() <= 0.2 * f64::EPSILON, || format!("AM-V {amv:?}, expected 0.2 within 1 ulp"))?;

    let one = synthetic::cohort_maps(tag, 1, 40, 0.5, 3).remove(0);
    let same = ok(CohortStatistics::compute(&ok(Cohort::new("y", vec![one; 7]))?))?;
    ensure(same.amv.values().iter().all(|&v| v == 0.0), || "identical maps give non-zero AM-V".into())?;

    let a = ok(CohortStatistics::compute(&ok(Cohort::new("a", synthetic::cohort_maps(tag, 6, 40, 0.2, 4)))?))?;
    let b = ok(CohortStatistics::compute(&ok(Cohort::new("b", synthetic::cohort_maps(tag, 6, 40, 0.9, 5)))?))?;
    let ab = ok(damv_from_grids(&a.amv, &b.amv))?;
    ensure(ab == ok(damv_from_grids(&b.amv, &a.amv))?, || "D-AM-V changes under argument swap".into())?;
    ensure(ab == ab.flip_horizontal(), || "D-AM-V changes under horizontal flip".into())?;
    let flipped_inputs = ok(damv_from_grids(&a.amv.flip_horizontal(), &b.amv.flip_horizontal()))?;
    ensure(ab == flipped_inputs, || "D-AM-V changes when both inputs are flipped".into())?;
    Ok(format!("MAM {mam}, AM-V {amv}, identical AM-V 0, D-AM-V swap/flip bit-exact"))
}

fn profile_conservation() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..PROFILE_GRIDS {
        let (w, h) = (r.random_range(1..=112), r.random_range(1..=112));
        let g = ok(Grid::new(w, h, (0..w * h).map(|_| 0.5 * r.random::<f64>()).collect()))?;
        let p = compute_spatial_profile(&g, "x");
        let total = oracle::compensated_sum(g.values().iter().copied());
        for s in [&p.s_x, &p.s_y] {
            let sum = oracle::compensated_sum(s.iter().copied());
            worst = worst.max((sum - total).abs() / total);
        }
    }
    ensure(worst <= PROFILE_REL_TOL, || format!("relative error {worst:e}"))?;
    Ok(format!("{PROFILE_GRIDS} grids, worst relative error {worst:e} <= {PROFILE_REL_TOL:e}"))
}

fn forward_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..FORWARD_SPECS {
        let model = synthetic::random_model(seed);
        let (c, h, w) = model.input_shape();
        let img = synthetic::random_image(seed + 10_000, c, h, w);
        let fast = ok(model.forward(img.tensor()))?;
        let (embedding, target) = oracle::forward(&model, &img);
        ensure(fast.embedding.len() == embedding.len(), || format!("spec {seed}: embedding size"))?;
        for (a, b) in fast.embedding.iter().zip(&embedding) {
            worst = worst.max((a - b).abs());
        }
        for (g, plane) in fast.target_activations.iter().zip(&target) {
            for (a, b) in g.values().iter().zip(plane.iter().flatten()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst < FORWARD_TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!("{FORWARD_SPECS} specs, max deviation {worst:e} < {FORWARD_TOL:e}"))
}

fn softmax_weights() -> Outcome {
    let model = synthetic::toy_face_model(1);
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let r = ok(score_cam(&model, &synthetic::face_image(seed, 0.8)))?;
        worst = worst.max((r.weights.iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst < SOFTMAX_TOL, || format!("weight sum error {worst:e}"))?;
    Ok(format!("weight sum error {worst:e} < {SOFTMAX_TOL:e}"))
}

fn single_channel() -> Outcome {
    let k: Vec<f64> = synthetic::random_image(3, 2, 3, 3).tensor().data().iter().map(|v| v - 0.5).collect();
    let conv = Layer::Conv {
        out_channels: 1,
        in_channels: 2,
        kernel_h: 3,
        kernel_w: 3,
        stride: 2,
        padding: 1,
        weights: k,
        bias: vec![1.0],
    };
    let model = ok(ToyModelSpec::new((2, 20, 20), vec![conv, Layer::Relu, Layer::GlobalAvgPool], 1))?;
    let img = synthetic::random_image(4, 2, 20, 20);
    let cam = ok(score_cam(&model, &img))?.cam;
    let act = &ok(model.forward(img.tensor()))?.target_activations[0];
    let expected = act.resize_bilinear(20, 20).relu().minmax_normalize();
    ensure(cam == expected, || "map differs from the normalized upsampled channel".into())?;
    Ok("identical to minmax(relu(upsample(channel)))".into())
}

fn flip_equivariance() -> Outcome {
    let model = synthetic::toy_face_model(2);
    let mut worst = 0.0f64;
    for seed in 0..2 {
        let img = synthetic::face_image(40 + seed, 0.75);
        let a = ok(score_cam_symmetrized(&model, &img))?;
        let b = ok(score_cam_symmetrized(&model, &img.flip_horizontal()))?.flip_horizontal();
        for (x, y) in a.values().iter().zip(b.values()) {
            worst = worst.max((x - y).abs());
        }
    }
    ensure(worst <= FLIP_TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:e} <= {FLIP_TOL:e}"))
}

fn localization() -> Outcome {
    let (model, img, quadrant) = synthetic::localization_fixture();
    let cam = ok(score_cam(&model, &img))?.cam;
    let mass = synthetic::top_left_mass(&cam, quadrant);
    ensure(mass >= LOCALIZATION_MIN_MASS, || format!("hot-quadrant mass {mass:.4}"))?;
    Ok(format!("hot-quadrant mass {mass:.4} >= {LOCALIZATION_MIN_MASS}"))
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let size = DemoSize { maps_per_cohort: 12, faces: 2, imposters_per_group: 60_000, genuine_per_group: 2_000 };
    let manifest_path = ok(synthetic::write_demo(dir.path(), size))?;
    let manifest = ok(CohortManifest::load(&manifest_path))?;
    let mut trees = Vec::new();
    for (run, threads) in [(1, 1), (2, 4)] {
        let cfg = RunConfig {
            output_dir: Some(dir.path().join(format!("run{run}"))),
            threads: Some(threads),
            ..RunConfig::default()
        };
        ok(run_stats(&manifest, &cfg))?;
        ok(run_fairness(&manifest, &cfg))?;
        ok(run_report(&manifest, &cfg))?;
        trees.push(tree(cfg.output_dir.as_ref().unwrap()));
    }
    ensure(!trees[0].is_empty(), || "no output written".into())?;
    ensure(trees[0] == trees[1], || {
        let differing: Vec<_> =
            trees[0].iter().filter(|(k, v)| trees[1].get(*k) != Some(v)).map(|(k, _)| k.display().to_string()).collect();
        format!("trees differ: {differing:?}")
    })?;

    let bytes = ok(fs::read(dir.path().join("maps.amap")))?;
    let maps = ok(read_amap_archive(&bytes[..]))?;
    ensure(ok(encode_amap_archive(&maps))? == bytes, || "archive re-encoding differs".into())?;
    let fresh = synthetic::cohort_maps(maps[0].demographics(), 12, 112, 0.2, 11);
    let bits = |m: &ActivationMap| m.grid().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(fresh.iter().zip(&maps).all(|(a, b)| bits(a) == bits(b) && a.sample_id() == b.sample_id()), || {
        "decoded maps are not bit-identical to the written ones".into()
    })?;
    Ok(format!("{} files identical across runs; {} maps round-trip bit-exact", trees[0].len(), maps.len()))
}

fn main() {
    let start = Instant::now();
    let mut gate = Gate { failures: 0 };
    gate.check("FDR recomputation, BFW r100 at FMR 1e-2", || table_row(0));
    gate.check("FDR recomputation, BFW r100 at FMR 1e-3", || table_row(1));
    gate.check("FDR recomputation, BFW r100 at FMR 1e-4", || table_row(2));
    gate.check("FDR recomputation, gender r100 at FMR 1e-2", || table_row(3));
    gate.check("FMR/FNMR equal a counting oracle", rate_oracle);
    gate.check("threshold calibration equals exhaustive enumeration", calibration_enumeration);
    gate.check("MAM, AM-V and D-AM-V hand cases", cohort_statistics_hand_cases);
    gate.check("spatial profiles conserve AM-V mass", profile_conservation);
    gate.check("forward pass equals per-layer brute force", forward_oracle);
    gate.check("Score-CAM softmax weights sum to one", softmax_weights);
    gate.check("single-channel Score-CAM equals its normalized channel", single_channel);
    gate.check("symmetrized Score-CAM is flip equivariant", flip_equivariance);
    gate.check("Score-CAM localizes the hot quadrant", localization);
    gate.check("report output is deterministic and archives round-trip", end_to_end);
    let elapsed = start.elapsed();
    let within = elapsed < SUITE_RUNTIME;
    if !within {
        gate.failures += 1;
    }
    println!(
        "{}  full suite within {SUITE_RUNTIME:?}  [{:.1} s]",
        if within { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    if gate.failures > 0 {
        println!("{} acceptance check(s) failed", gate.failures);
        std::process::exit(1);
    }
}
