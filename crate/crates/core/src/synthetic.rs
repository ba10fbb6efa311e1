//! Seeded synthetic inputs: a toy face model, face-like images, cohort
//! activation maps and comparison scores. Used by tests, the self-test and
//! `fairscope fixture` to produce a runnable demo without real data.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cam::{write_model, ActivationMap, ImageTensor, Layer, ToyModelSpec};
use crate::demographics::{Demographics, Ethnicity, Gender};
use crate::error::{IoContext, Result};
use crate::fairness::{PairKind, ScoreEntry};
use crate::grid::{Grid, FACE_SIZE};
use crate::io::{encode_amap_archive, image::encode_rgb8_png, write_scores_csv};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rounds through `f32` so values survive an archive round trip unchanged.
fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

/// 3×112×112 model: conv5x5/2 → relu → maxpool2 → conv3x3 (16 ch) → relu
/// (target) → gap → fc(16→8). Weights are `f32`-exact.
pub fn toy_face_model(seed: u64) -> ToyModelSpec {
    let mut r = rng(seed);
    let mut weights = |n: usize, scale: f64| -> Vec<f64> {
        (0..n).map(|_| f32_exact(r.random_range(-scale..scale))).collect()
    };
    let layers = vec![
        Layer::Conv {
            out_channels: 8,
            in_channels: 3,
            kernel_h: 5,
            kernel_w: 5,
            stride: 2,
            padding: 2,
            weights: weights(8 * 3 * 25, 0.2),
            bias: weights(8, 0.05),
        },
        Layer::Relu,
        Layer::MaxPool { window: 2, stride: 2 },
        Layer::Conv {
            out_channels: 16,
            in_channels: 8,
            kernel_h: 3,
            kernel_w: 3,
            stride: 1,
            padding: 1,
            weights: weights(16 * 8 * 9, 0.25),
            bias: weights(16, 0.05),
        },
        Layer::Relu,
        Layer::GlobalAvgPool,
        Layer::Dense { out_features: 8, in_features: 16, weights: weights(128, 0.5), bias: weights(8, 0.1) },
    ];
    ToyModelSpec::new((3, FACE_SIZE, FACE_SIZE), layers, 4).expect("toy model is consistent")
}

/// Face-like test image: skin-toned ellipse with darker eyes and mouth,
/// perturbed per `seed`.
pub fn face_image(seed: u64, tone: f64) -> ImageTensor {
    let mut r = rng(seed);
    let jitter = |r: &mut ChaCha8Rng| r.random_range(-3.0..3.0);
    let (eye_dx, eye_y, mouth_y) = (22.0 + jitter(&mut r), 45.0 + jitter(&mut r), 82.0 + jitter(&mut r));
    let c = FACE_SIZE as f64 / 2.0;
    let mut hwc = Vec::with_capacity(FACE_SIZE * FACE_SIZE * 3);
    for y in 0..FACE_SIZE {
        for x in 0..FACE_SIZE {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = ((fx - c) / 40.0).powi(2) + ((fy - c) / 52.0).powi(2) <= 1.0;
            let mut v = if inside { tone } else { 0.15 };
            let eye = |ex: f64| ((fx - ex).powi(2) + (fy - eye_y).powi(2)).sqrt() < 7.0;
            if inside && (eye(c - eye_dx) || eye(c + eye_dx)) {
                v *= 0.3;
            }
            if inside && (fy - mouth_y).abs() < 3.0 && (fx - c).abs() < 16.0 {
                v *= 0.5;
            }
            let px = [v, v * 0.85, v * 0.75].map(|p| (p + r.random_range(-0.02..0.02)).clamp(0.0, 1.0));
            hwc.extend(px.map(|p| (p * 255.0).round() / 255.0));
        }
    }
    ImageTensor::from_interleaved(FACE_SIZE, FACE_SIZE, 3, &hwc).expect("valid image")
}

fn blob(x: f64, y: f64, cx: f64, cy: f64, sigma: f64) -> f64 {
    (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
}

/// Activation maps with face-landmark blobs whose strength varies per sample;
/// `mouth_spread` scales the variation around the mouth.
pub fn cohort_maps(
    demographics: Demographics,
    n: usize,
    size: usize,
    mouth_spread: f64,
    seed: u64,
) -> Vec<ActivationMap> {
    let mut r = rng(seed);
    let s = size as f64 / FACE_SIZE as f64;
    (0..n)
        .map(|k| {
            let eyes = 0.6 + 0.2 * r.random::<f64>();
            let nose = 0.5 + 0.2 * r.random::<f64>();
            let mouth = (0.4 + mouth_spread * (r.random::<f64>() - 0.5)).max(0.0);
            let shift = r.random_range(-2.0..2.0) * s;
            let mut values = Vec::with_capacity(size * size);
            for y in 0..size {
                for x in 0..size {
                    let (fx, fy) = (x as f64, y as f64);
                    let v = eyes * (blob(fx, fy, 34.0 * s + shift, 45.0 * s, 8.0 * s) + blob(fx, fy, 78.0 * s + shift, 45.0 * s, 8.0 * s))
                        + nose * blob(fx, fy, 56.0 * s, 62.0 * s, 9.0 * s)
                        + mouth * blob(fx, fy, 56.0 * s, 84.0 * s, 11.0 * s);
                    values.push(v);
                }
            }
            let grid = Grid::new(size, size, values).expect("finite").minmax_normalize().map(f32_exact);
            ActivationMap::new(format!("{}-{k:04}", demographics.ethnicity), grid, demographics).expect("in range")
        })
        .collect()
}

/// Genuine and imposter scores for `groups`, each group `(label, genuine
/// mean shift, imposter mean shift)` relative to N(0.6, 0.1) genuine and
/// N(0.1, 0.08) imposter distributions.
pub fn comparison_scores(
    groups: &[(&str, f64, f64)],
    genuine_per_group: usize,
    imposter_per_group: usize,
    seed: u64,
) -> Vec<ScoreEntry> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(groups.len() * (genuine_per_group + imposter_per_group));
    for &(label, g_shift, i_shift) in groups {
        let genuine = Normal::new(0.6 + g_shift, 0.1).expect("valid normal");
        let imposter = Normal::new(0.1 + i_shift, 0.08).expect("valid normal");
        for k in 0..genuine_per_group {
            let score = f32_exact(genuine.sample(&mut r));
            out.push(ScoreEntry { pair_id: format!("{label}-g{k}"), group: label.into(), kind: PairKind::Genuine, score });
        }
        for k in 0..imposter_per_group {
            let score = f32_exact(imposter.sample(&mut r));
            out.push(ScoreEntry { pair_id: format!("{label}-i{k}"), group: label.into(), kind: PairKind::Imposter, score });
        }
    }
    out
}

/// Sizes of the demo written by [`write_demo`].
#[derive(Debug, Clone, Copy)]
pub struct DemoSize {
    pub maps_per_cohort: usize,
    pub faces: usize,
    pub imposters_per_group: usize,
    pub genuine_per_group: usize,
}

impl Default for DemoSize {
    fn default() -> Self {
        Self { maps_per_cohort: 24, faces: 4, imposters_per_group: 50_000, genuine_per_group: 5_000 }
    }
}

/// Writes a complete two-cohort (C vs E) demo into `dir` and returns the
/// manifest path:
///
/// - `toy.tmdl`, `faces/*.png` and `faces.csv` for `fairscope cam`
/// - `maps.amap` with both cohorts, `scores.csv`, `face.png`
/// - `manifest.json` with output under `out/`
pub fn write_demo(dir: &Path, size: DemoSize) -> Result<PathBuf> {
    let faces = dir.join("faces");
    std::fs::create_dir_all(&faces).io_context(|| format!("creating {}", faces.display()))?;
    let write = |p: PathBuf, bytes: &[u8]| std::fs::write(&p, bytes).io_context(|| format!("writing {}", p.display()));

    write(dir.join("toy.tmdl"), &write_model(&toy_face_model(1)))?;
    let mut list = String::from("path,ethnicity,gender\n");
    for k in 0..size.faces {
        let (ethnicity, tone) = if k % 2 == 0 { (Ethnicity::Caucasian, 0.85) } else { (Ethnicity::Asian, 0.7) };
        let name = format!("face_{k:02}.png");
        write(faces.join(&name), &image_png(&face_image(100 + k as u64, tone))?)?;
        list.push_str(&format!("faces/{name},{ethnicity},{}\n", if k < 2 { "m" } else { "f" }));
    }
    write(dir.join("faces.csv"), list.as_bytes())?;
    write(dir.join("face.png"), &image_png(&face_image(7, 0.8))?)?;

    let c = Demographics { ethnicity: Ethnicity::Caucasian, gender: Gender::Male };
    let e = Demographics { ethnicity: Ethnicity::Asian, gender: Gender::Female };
    let mut maps = cohort_maps(c, size.maps_per_cohort, FACE_SIZE, 0.2, 11);
    maps.extend(cohort_maps(e, size.maps_per_cohort, FACE_SIZE, 0.6, 12));
    write(dir.join("maps.amap"), &encode_amap_archive(&maps)?)?;

    let scores = comparison_scores(
        &[("C-C", 0.0, 0.0), ("E-E", -0.05, 0.03)],
        size.genuine_per_group,
        size.imposters_per_group,
        13,
    );
    let mut csv = Vec::new();
    write_scores_csv(&scores, &mut csv)?;
    write(dir.join("scores.csv"), &csv)?;

    let manifest = serde_json::json!({
        "dataset": "synthetic",
        "model": "toy",
        "cohorts": [
            { "label": "C", "archive": "maps.amap", "filter": { "ethnicity": "C" } },
            { "label": "E", "archive": "maps.amap", "filter": { "ethnicity": "E" } }
        ],
        "reference": "C",
        "scores": "scores.csv",
        "overlay_image": "face.png",
        "output_dir": "out"
    });
    let path = dir.join("manifest.json");
    write(path.clone(), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(path)
}

/// Encodes an image tensor as an RGB8 PNG.
pub fn image_png(img: &ImageTensor) -> Result<Vec<u8>> {
    let (w, h) = (img.width(), img.height());
    let mut px = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                px.push((img.at(c, y, x) * 255.0).round() as u8);
            }
        }
    }
    encode_rgb8_png(w, h, &px)
}

/// Random small model for oracle checks: one or two conv blocks, an
/// optional max pool, and a gap and/or fc head. The target is the last
/// spatial layer.
pub fn random_model(seed: u64) -> ToyModelSpec {
    let mut r = rng(seed);
    loop {
        let c = r.random_range(1..=3);
        let (h, w) = (r.random_range(4..=12), r.random_range(4..=12));
        let mut layers = Vec::new();
        let mut channels = c;
        let blocks = r.random_range(1..=2);
        for b in 0..blocks {
            let out = r.random_range(1..=4);
            let (kh, kw) = (r.random_range(1..=3), r.random_range(1..=3));
            let mut weights = |n: usize| -> Vec<f64> { (0..n).map(|_| r.random_range(-1.0..1.0)).collect() };
            let (wt, bias) = (weights(out * channels * kh * kw), weights(out));
            layers.push(Layer::Conv {
                out_channels: out,
                in_channels: channels,
                kernel_h: kh,
                kernel_w: kw,
                stride: r.random_range(1..=2),
                padding: r.random_range(0..=1),
                weights: wt,
                bias,
            });
            channels = out;
            layers.push(Layer::Relu);
            if b == 0 && r.random_bool(0.5) {
                layers.push(Layer::MaxPool { window: 2, stride: r.random_range(1..=2) });
            }
        }
        let target = layers.len() - 1;
        let head = r.random_range(0..3);
        if head != 2 {
            layers.push(Layer::GlobalAvgPool);
        }
        if head != 0 {
            // Flat size is only known once shapes are inferred; probe with a
            // placeholder and fix the fc input afterwards.
            let probe = ToyModelSpec::new((c, h, w), [&layers[..=target], &[Layer::GlobalAvgPool]].concat(), target);
            let Ok(probe) = probe else { continue };
            let flat = if head == 1 { channels } else { probe.layer_shapes()[target].numel() };
            let out = r.random_range(1..=5);
            let weights: Vec<f64> = (0..out * flat).map(|_| r.random_range(-1.0..1.0)).collect();
            let bias: Vec<f64> = (0..out).map(|_| r.random_range(-1.0..1.0)).collect();
            layers.push(Layer::Dense { out_features: out, in_features: flat, weights, bias });
        }
        if let Ok(model) = ToyModelSpec::new((c, h, w), layers, target) {
            return model;
        }
    }
}

/// Uniform random image in `[0, 1]`.
pub fn random_image(seed: u64, channels: usize, height: usize, width: usize) -> ImageTensor {
    let mut r = rng(seed);
    let data = (0..channels * height * width).map(|_| r.random::<f64>()).collect();
    ImageTensor::new(channels, height, width, data).expect("values in range")
}

/// Random score set: `groups` groups with between 1 and `max_per_kind`
/// genuine and imposter scores each, drawn from a coarse grid of values so
/// ties are common.
pub fn random_scores(seed: u64, groups: usize, max_per_kind: usize) -> Vec<ScoreEntry> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for g in 0..groups {
        for kind in [PairKind::Genuine, PairKind::Imposter] {
            for k in 0..r.random_range(1..=max_per_kind) {
                let score = r.random_range(0..200) as f64 / 100.0 - 1.0;
                out.push(ScoreEntry { pair_id: format!("{g}-{kind:?}-{k}"), group: format!("g{g}"), kind, score });
            }
        }
    }
    out
}

/// Model and image whose Score-CAM should concentrate on the top-left
/// quadrant: the image is bright there and dim elsewhere; one target channel
/// responds to brightness, the other, more weakly, to dimness.
///
/// Returns the model, the image and the quadrant size `(w, h)`.
pub fn localization_fixture() -> (ToyModelSpec, ImageTensor, (usize, usize)) {
    let size = 32;
    let mut r = rng(5);
    let mut data = Vec::with_capacity(3 * size * size);
    for _ in 0..3 {
        for y in 0..size {
            for x in 0..size {
                let hot = x < size / 2 && y < size / 2;
                data.push(if hot { r.random_range(0.85..1.0) } else { r.random_range(0.1..0.3) });
            }
        }
    }
    let img = ImageTensor::new(3, size, size, data).expect("values in range");
    let tap = 1.0 / 27.0;
    let layers = vec![
        Layer::Conv {
            out_channels: 2,
            in_channels: 3,
            kernel_h: 3,
            kernel_w: 3,
            stride: 2,
            padding: 1,
            weights: [vec![tap; 27], vec![-0.5 * tap; 27]].concat(),
            bias: vec![-0.5, 0.25],
        },
        Layer::Relu,
        Layer::GlobalAvgPool,
        // The dimness channel pulls the embedding negative, so masking with
        // it alone scores a cosine of -1.
        Layer::Dense { out_features: 1, in_features: 2, weights: vec![1.0, -0.2], bias: vec![0.0] },
    ];
    let model = ToyModelSpec::new((3, size, size), layers, 1).expect("fixture model is consistent");
    (model, img, (size / 2, size / 2))
}

/// Fraction of a map's total mass inside the top-left `w × h` block.
pub fn top_left_mass(g: &Grid, (w, h): (usize, usize)) -> f64 {
    let total: f64 = g.values().iter().sum();
    let inside: f64 = g.rows().take(h).map(|row| row[..w].iter().sum::<f64>()).sum();
    inside / total
}
