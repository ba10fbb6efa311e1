//! Built-in checks run by `fairscope selftest`: a reduced version of the
//! acceptance suite that needs no files and finishes in a few seconds.

use std::time::Instant;

use crate::cam::{score_cam, score_cam_symmetrized};
use crate::demographics::{Demographics, Ethnicity, Gender};
use crate::fairness::{fdr_from_rates, ComparisonScoreSet, PairKind, ALL_GROUPS};
use crate::grid::Grid;
use crate::io::{encode_amap_archive, read_amap_archive};
use crate::stats::{compute_spatial_profile, damv_from_grids, Cohort, CohortStatistics};
use crate::{oracle, synthetic, ActivationMap};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: u128,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Check { name, passed, detail, millis: start.elapsed().as_millis() }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Published per-group rates `(group, fmr, fnmr)` with the FDR they imply.
pub struct TableRow {
    pub name: &'static str,
    pub rates: &'static [(&'static str, f64, f64)],
    pub published: f64,
    pub tolerance: f64,
}

pub const TABLE_ROWS: [TableRow; 4] = [
    TableRow {
        name: "BFW r100 @ FMR 1e-2",
        rates: &[("C", 0.007, 0.040), ("E", 0.026, 0.127), ("A", 0.017, 0.085), ("I", 0.022, 0.082)],
        published: 0.946,
        tolerance: 0.015,
    },
    TableRow {
        name: "BFW r100 @ FMR 1e-3",
        rates: &[("C", 0.4e-3, 0.057), ("E", 3.6e-3, 0.160), ("A", 1.8e-3, 0.109), ("I", 2.1e-3, 0.105)],
        published: 0.946,
        tolerance: 0.015,
    },
    TableRow {
        name: "BFW r100 @ FMR 1e-4",
        rates: &[("C", 0.1e-4, 0.090), ("E", 3.9e-4, 0.205), ("A", 2.2e-4, 0.136), ("I", 1.8e-4, 0.131)],
        published: 0.942,
        tolerance: 0.015,
    },
    TableRow {
        name: "gender r100 @ FMR 1e-2",
        rates: &[("m", 0.011, 0.085), ("f", 0.016, 0.083)],
        published: 0.997,
        tolerance: 0.005,
    },
];

pub fn run() -> Vec<Check> {
    vec![
        check("published FDR rows", || {
            let mut out = Vec::new();
            for row in &TABLE_ROWS {
                let p = fdr_from_rates(row.rates.iter().copied(), 0.5).map_err(|e| e.to_string())?;
                ensure((p.fdr - row.published).abs() <= row.tolerance, || {
                    format!("{}: FDR {:.4} vs {:.3} ± {}", row.name, p.fdr, row.published, row.tolerance)
                })?;
                out.push(format!("{:.4}", p.fdr));
            }
            Ok(out.join(" "))
        }),
        check("FMR/FNMR vs counting", || {
            for seed in 0..100 {
                let entries = synthetic::random_scores(seed, 3, 60);
                let set = ComparisonScoreSet::new(entries.clone()).map_err(|e| e.to_string())?;
                for k in 0..20 {
                    let tau = k as f64 / 10.0 - 1.0 + 0.005 * (k % 3) as f64;
                    for g in set.groups().iter().map(String::as_str).chain([ALL_GROUPS]) {
                        let fast = (set.fmr(g, tau).unwrap(), set.fnmr(g, tau).unwrap());
                        let slow = (oracle::fmr(&entries, g, tau).unwrap(), oracle::fnmr(&entries, g, tau).unwrap());
                        ensure(fast == slow, || format!("seed {seed} group {g} tau {tau}: {fast:?} vs {slow:?}"))?;
                    }
                }
            }
            Ok("100 sets x 20 thresholds".into())
        }),
        check("threshold calibration vs enumeration", || {
            let mut checked = 0;
            for seed in 0..100 {
                let entries = synthetic::random_scores(1000 + seed, 2, 300);
                let set = ComparisonScoreSet::new(entries.clone()).map_err(|e| e.to_string())?;
                let imposters: Vec<f64> =
                    entries.iter().filter(|e| e.kind == PairKind::Imposter).map(|e| e.score).collect();
                for target in [0.5, 0.1, 0.05, 0.01] {
                    let expected = oracle::calibrate(&imposters, target);
                    match set.calibrate_tau(target) {
                        Ok(c) => {
                            ensure(Some((c.tau, c.achieved_fmr)) == expected, || {
                                format!("seed {seed} target {target}: {c:?} vs {expected:?}")
                            })?;
                            checked += 1;
                        }
                        Err(_) => ensure(
                            expected.is_none() || (imposters.len() as f64) < 1.0 / target,
                            || format!("seed {seed} target {target}: error but oracle found {expected:?}"),
                        )?,
                    }
                }
            }
            Ok(format!("{checked} calibrations"))
        }),
        check("cohort statistics hand cases", || {
            let tag = Demographics { ethnicity: Ethnicity::Unknown, gender: Gender::Unknown };
            let map = |v: f64| ActivationMap::new("m", Grid::filled(1, 1, v), tag).unwrap();
            let s = CohortStatistics::compute(&Cohort::new("x", vec![map(0.2), map(0.6)]).unwrap()).unwrap();
            let (mam, amv) = (s.mam.values()[0], s.amv.values()[0]);
            ensure(mam == 0.4, || format!("MAM {mam}"))?;
            ensure((amv - 0.2).abs() <= 0.2 * f64::EPSILON, || format!("AM-V {amv}"))?;
            let same = CohortStatistics::compute(&Cohort::new("y", vec![map(0.3); 5]).unwrap()).unwrap();
            ensure(same.amv.values()[0] == 0.0, || "identical maps give non-zero AM-V".into())?;
            let a = synthetic::cohort_maps(tag, 1, 16, 0.3, 1).remove(0).into_grid();
            let b = synthetic::cohort_maps(tag, 1, 16, 0.9, 2).remove(0).into_grid();
            let ab = damv_from_grids(&a, &b).unwrap();
            ensure(ab == damv_from_grids(&b, &a).unwrap(), || "D-AM-V not symmetric in its arguments".into())?;
            ensure(ab == ab.flip_horizontal(), || "D-AM-V not mirror symmetric".into())?;
            let p = compute_spatial_profile(&ab, "d");
            let total = oracle::compensated_sum(ab.values().iter().copied());
            let (sx, sy): (f64, f64) = (p.s_x.iter().sum(), p.s_y.iter().sum());
            ensure((sx - total).abs() <= 1e-9 * total && (sy - total).abs() <= 1e-9 * total, || {
                format!("profile sums {sx} {sy} vs {total}")
            })?;
            Ok(format!("MAM {mam} AM-V {amv}"))
        }),
        check("forward pass vs loop nest", || {
            let mut worst = 0.0f64;
            for seed in 0..20 {
                let model = synthetic::random_model(seed);
                let (c, h, w) = model.input_shape();
                let img = synthetic::random_image(seed, c, h, w);
                let fast = model.forward(img.tensor()).map_err(|e| e.to_string())?;
                let (emb, target) = oracle::forward(&model, &img);
                for (a, b) in fast.embedding.iter().zip(&emb) {
                    worst = worst.max((a - b).abs());
                }
                for (grid, plane) in fast.target_activations.iter().zip(&target) {
                    for (a, b) in grid.values().iter().zip(plane.iter().flatten()) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
            ensure(worst < 1e-12, || format!("max deviation {worst:e}"))?;
            Ok(format!("max deviation {worst:e}"))
        }),
        check("Score-CAM invariants", || {
            let model = synthetic::toy_face_model(1);
            let img = synthetic::face_image(3, 0.8);
            let r = score_cam(&model, &img).map_err(|e| e.to_string())?;
            let total: f64 = r.weights.iter().sum();
            ensure((total - 1.0).abs() < 1e-12, || format!("weights sum to {total}"))?;
            let direct = score_cam_symmetrized(&model, &img).map_err(|e| e.to_string())?;
            let flipped = score_cam_symmetrized(&model, &img.flip_horizontal()).map_err(|e| e.to_string())?;
            let dev = direct
                .values()
                .iter()
                .zip(flipped.flip_horizontal().values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            ensure(dev <= 1e-9, || format!("flip deviation {dev:e}"))?;
            Ok(format!("weight sum error {:e}, flip deviation {dev:e}", (total - 1.0).abs()))
        }),
        check("activation archive round trip", || {
            let tag = Demographics { ethnicity: Ethnicity::African, gender: Gender::Female };
            let maps = synthetic::cohort_maps(tag, 5, 32, 0.5, 9);
            let bytes = encode_amap_archive(&maps).map_err(|e| e.to_string())?;
            let back = read_amap_archive(&bytes[..]).map_err(|e| e.to_string())?;
            ensure(back == maps, || "decoded maps differ".into())?;
            ensure(encode_amap_archive(&back).map_err(|e| e.to_string())? == bytes, || "re-encoding differs".into())?;
            Ok(format!("{} bytes", bytes.len()))
        }),
    ]
}
