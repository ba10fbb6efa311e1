//! Deliberately naive reference implementations.
//!
//! Each function recomputes a library result by the most direct route
//! available (explicit loops, exhaustive enumeration, compensated sums) and
//! is used to cross-check the optimized paths in tests, the acceptance suite
//! and `fairscope selftest`.

use crate::cam::{ImageTensor, Layer, ToyModelSpec};
use crate::fairness::{PairKind, ScoreEntry, ALL_GROUPS};
use crate::grid::Grid;

fn in_group(e: &ScoreEntry, group: &str) -> bool {
    group == ALL_GROUPS || e.group == group
}

/// Counts imposter entries of `group` with `score >= tau`.
pub fn fmr(entries: &[ScoreEntry], group: &str, tau: f64) -> Option<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for e in entries.iter().filter(|e| e.kind == PairKind::Imposter && in_group(e, group)) {
        total += 1;
        if e.score >= tau {
            hits += 1;
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Counts genuine entries of `group` with `score < tau`.
pub fn fnmr(entries: &[ScoreEntry], group: &str, tau: f64) -> Option<f64> {
    let (mut misses, mut total) = (0usize, 0usize);
    for e in entries.iter().filter(|e| e.kind == PairKind::Genuine && in_group(e, group)) {
        total += 1;
        if e.score < tau {
            misses += 1;
        }
    }
    (total > 0).then(|| misses as f64 / total as f64)
}

/// Tries every observed imposter score as a threshold and returns the least
/// one whose FMR does not exceed `target`, with that FMR.
pub fn calibrate(imposters: &[f64], target: f64) -> Option<(f64, f64)> {
    let n = imposters.len() as f64;
    imposters
        .iter()
        .map(|&t| (t, imposters.iter().filter(|&&s| s >= t).count() as f64 / n))
        .filter(|&(_, f)| f <= target)
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Per-pixel mean and population standard deviation via compensated sums.
pub fn mean_and_deviation(grids: &[&Grid]) -> (Grid, Grid) {
    let (w, h) = grids[0].dims();
    let n = grids.len() as f64;
    let mut mean = Vec::with_capacity(w * h);
    let mut dev = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let m = compensated_sum(grids.iter().map(|g| g.values()[i])) / n;
        let var = compensated_sum(grids.iter().map(|g| (g.values()[i] - m).powi(2))) / n;
        mean.push(m);
        dev.push(var.sqrt());
    }
    (Grid::new(w, h, mean).expect("finite"), Grid::new(w, h, dev).expect("finite"))
}

/// Activation tensor as `[channel][y][x]`.
pub type Planes = Vec<Vec<Vec<f64>>>;

/// Forward pass with one explicit loop nest per layer, reading padded inputs
/// through bounds checks. Returns the embedding and the target activations.
pub fn forward(model: &ToyModelSpec, img: &ImageTensor) -> (Vec<f64>, Planes) {
    let (c, h, w) = img.shape();
    let mut x: Planes = (0..c).map(|ch| (0..h).map(|y| (0..w).map(|xx| img.at(ch, y, xx)).collect()).collect()).collect();
    let mut flat: Option<Vec<f64>> = None;
    let mut target = Vec::new();
    for (i, layer) in model.layers().iter().enumerate() {
        match layer {
            Layer::Conv { out_channels, in_channels, kernel_h, kernel_w, stride, padding, weights, bias } => {
                let (ih, iw) = (x[0].len() as isize, x[0][0].len() as isize);
                let oh = ((ih + 2 * *padding as isize - *kernel_h as isize) / *stride as isize + 1) as usize;
                let ow = ((iw + 2 * *padding as isize - *kernel_w as isize) / *stride as isize + 1) as usize;
                let mut out = vec![vec![vec![0.0; ow]; oh]; *out_channels];
                for (o, plane) in out.iter_mut().enumerate() {
                    for (oy, row) in plane.iter_mut().enumerate() {
                        for (ox, cell) in row.iter_mut().enumerate() {
                            let mut acc = bias[o];
                            for ci in 0..*in_channels {
                                for ky in 0..*kernel_h {
                                    for kx in 0..*kernel_w {
                                        let iy = (oy * stride + ky) as isize - *padding as isize;
                                        let ixx = (ox * stride + kx) as isize - *padding as isize;
                                        if iy < 0 || ixx < 0 || iy >= ih || ixx >= iw {
                                            continue;
                                        }
                                        let wgt = weights[((o * in_channels + ci) * kernel_h + ky) * kernel_w + kx];
                                        acc += wgt * x[ci][iy as usize][ixx as usize];
                                    }
                                }
                            }
                            *cell = acc;
                        }
                    }
                }
                x = out;
            }
            Layer::Relu => match &mut flat {
                Some(v) => v.iter_mut().for_each(|a| *a = a.max(0.0)),
                None => x.iter_mut().flatten().flatten().for_each(|a| *a = a.max(0.0)),
            },
            Layer::MaxPool { window, stride } => {
                let (ih, iw) = (x[0].len(), x[0][0].len());
                let (oh, ow) = ((ih - window) / stride + 1, (iw - window) / stride + 1);
                x = x
                    .iter()
                    .map(|plane| {
                        (0..oh)
                            .map(|oy| {
                                (0..ow)
                                    .map(|ox| {
                                        let mut best = f64::NEG_INFINITY;
                                        for ky in 0..*window {
                                            for kx in 0..*window {
                                                best = best.max(plane[oy * stride + ky][ox * stride + kx]);
                                            }
                                        }
                                        best
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
            }
            Layer::GlobalAvgPool => {
                flat = Some(
                    x.iter()
                        .map(|plane| {
                            let n = (plane.len() * plane[0].len()) as f64;
                            plane.iter().flatten().sum::<f64>() / n
                        })
                        .collect(),
                );
            }
            Layer::Dense { out_features, in_features, weights, bias } => {
                let input: Vec<f64> = match &flat {
                    Some(v) => v.clone(),
                    None => x.iter().flatten().flatten().copied().collect(),
                };
                flat = Some(
                    (0..*out_features)
                        .map(|o| bias[o] + (0..*in_features).map(|k| weights[o * in_features + k] * input[k]).sum::<f64>())
                        .collect(),
                );
            }
        }
        if i == model.target_layer() {
            target = x.clone();
        }
    }
    (flat.expect("validated models end flat"), target)
}

/// Score-CAM with the model embedding taken from [`forward`] and bilinear
/// upsampling written out per pixel.
pub fn score_cam(model: &ToyModelSpec, img: &ImageTensor) -> Grid {
    let (c, h, w) = img.shape();
    let (original, target) = forward(model, img);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let on = norm(&original);
    let ups: Vec<Vec<f64>> = target.iter().map(|plane| upsample(plane, w, h)).collect();
    let mut scores = Vec::new();
    for up in &ups {
        let (lo, hi) = up.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mask: Vec<f64> = up.iter().map(|&v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect();
        let data: Vec<f64> = (0..c).flat_map(|ch| (0..h * w).map(move |p| (ch, p))).map(|(ch, p)| img.at(ch, p / w, p % w) * mask[p]).collect();
        let masked = ImageTensor::new(c, h, w, data).expect("masked image stays in range");
        let (e, _) = forward(model, &masked);
        let en = norm(&e);
        scores.push(if en == 0.0 { 0.0 } else { e.iter().zip(&original).map(|(a, b)| a * b).sum::<f64>() / (en * on) });
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut acc = vec![0.0; w * h];
    for (up, e) in ups.iter().zip(&exps) {
        for (a, v) in acc.iter_mut().zip(up) {
            *a += e / total * v;
        }
    }
    let acc: Vec<f64> = acc.into_iter().map(|v| v.max(0.0)).collect();
    let (lo, hi) = acc.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Grid::new(w, h, acc.into_iter().map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect()).expect("finite")
}

/// Corner-aligned bilinear resize of a `[y][x]` plane.
pub fn upsample(plane: &[Vec<f64>], w: usize, h: usize) -> Vec<f64> {
    let (sh, sw) = (plane.len(), plane[0].len());
    let coord = |o: usize, out: usize, src: usize| {
        if out == 1 || src == 1 {
            (src as f64 - 1.0) / 2.0
        } else {
            o as f64 * (src - 1) as f64 / (out - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let fy = coord(y, h, sh);
        let (y0, ty) = (fy.floor() as usize, fy - fy.floor());
        let y1 = (y0 + 1).min(sh - 1);
        for x in 0..w {
            let fx = coord(x, w, sw);
            let (x0, tx) = (fx.floor() as usize, fx - fx.floor());
            let x1 = (x0 + 1).min(sw - 1);
            let top = plane[y0][x0] * (1.0 - tx) + plane[y0][x1] * tx;
            let bottom = plane[y1][x0] * (1.0 - tx) + plane[y1][x1] * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}
