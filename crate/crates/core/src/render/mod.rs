//! Heatmaps, overlays and plots. Rasters are PNG, plots are SVG with a CSV
//! twin holding exactly the plotted values.

pub mod colormap;
pub mod svg;

use std::fmt::Write;

use crate::cam::ImageTensor;
use crate::error::{Error, Result};
use crate::fairness::FairnessReport;
use crate::grid::Grid;
use crate::io::image::encode_rgb8_png;
use crate::stats::{Histogram, SpatialProfile};

pub use colormap::Colormap;
use svg::{Chart, Series, Style};

/// Reference series color.
pub const REFERENCE_COLOR: &str = "#d62728";
/// Comparison series color.
pub const COMPARISON_COLOR: &str = "#1f77b4";
/// White columns between tiles of a multi-panel raster.
const TILE_GAP: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub colormap: Colormap,
    /// Heatmap weight in overlays.
    pub alpha: f64,
    /// Fixed value range for the colormap; otherwise the data range is used.
    pub value_range: Option<(f64, f64)>,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self { colormap: Colormap::Viridis, alpha: 0.5, value_range: None }
    }
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("overlay alpha {} must lie in [0, 1]", self.alpha)));
        }
        if let Some((lo, hi)) = self.value_range {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!("invalid value range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn with_range(&self, range: (f64, f64)) -> Self {
        Self { value_range: Some(range), ..self.clone() }
    }

    fn range_for<'a>(&self, grids: impl IntoIterator<Item = &'a Grid>) -> (f64, f64) {
        self.value_range.unwrap_or_else(|| {
            grids.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g.min()), hi.max(g.max())))
        })
    }
}

/// A plot and its CSV twin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plot {
    pub svg: String,
    pub csv: String,
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn scaled(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

fn heat_rgb(g: &Grid, spec: &RenderSpec, range: (f64, f64)) -> Vec<[f64; 3]> {
    g.values().iter().map(|&v| spec.colormap.color(scaled(v, range))).collect()
}

/// Colormapped grid as PNG; one pixel per element.
pub fn render_heatmap(g: &Grid, spec: &RenderSpec) -> Result<Vec<u8>> {
    render_heatmap_row(&[g], spec)
}

/// Grids side by side sharing one value range, separated by white columns.
pub fn render_heatmap_row(grids: &[&Grid], spec: &RenderSpec) -> Result<Vec<u8>> {
    spec.validate()?;
    let range = spec.range_for(grids.iter().copied());
    let tiles: Vec<Vec<[f64; 3]>> = grids.iter().map(|g| heat_rgb(g, spec, range)).collect();
    compose_row(grids, &tiles)
}

/// `(1 − α)·face + α·colormap(g)` per channel.
pub fn render_overlay(face: &ImageTensor, g: &Grid, spec: &RenderSpec) -> Result<Vec<u8>> {
    render_overlay_row(face, &[g], spec)
}

/// Overlays of several grids on the same face, side by side, sharing one
/// value range.
pub fn render_overlay_row(face: &ImageTensor, grids: &[&Grid], spec: &RenderSpec) -> Result<Vec<u8>> {
    spec.validate()?;
    if face.channels() != 3 {
        return Err(Error::Shape(format!("overlay face must have 3 channels, got {}", face.channels())));
    }
    for g in grids {
        if g.dims() != (face.width(), face.height()) {
            return Err(Error::Shape(format!(
                "grid {}x{} does not match face {}x{}",
                g.width(),
                g.height(),
                face.width(),
                face.height()
            )));
        }
    }
    let range = spec.range_for(grids.iter().copied());
    let a = spec.alpha;
    let tiles: Vec<Vec<[f64; 3]>> = grids
        .iter()
        .map(|g| {
            let heat = heat_rgb(g, spec, range);
            heat.iter()
                .enumerate()
                .map(|(p, h)| {
                    let (y, x) = (p / g.width(), p % g.width());
                    std::array::from_fn(|c| ((1.0 - a) * face.at(c, y, x) + a * h[c]).clamp(0.0, 1.0))
                })
                .collect()
        })
        .collect();
    compose_row(grids, &tiles)
}

fn compose_row(grids: &[&Grid], tiles: &[Vec<[f64; 3]>]) -> Result<Vec<u8>> {
    let Some(first) = grids.first() else {
        return Err(Error::Render("nothing to render".into()));
    };
    let h = first.height();
    if grids.iter().any(|g| g.height() != h) {
        return Err(Error::Shape("tiles in a row must share their height".into()));
    }
    let total_w: usize = grids.iter().map(|g| g.width()).sum::<usize>() + TILE_GAP * (grids.len() - 1);
    let mut pixels = vec![255u8; total_w * h * 3];
    let mut x_off = 0;
    for (g, tile) in grids.iter().zip(tiles) {
        for y in 0..h {
            for x in 0..g.width() {
                let px = &tile[y * g.width() + x];
                let o = (y * total_w + x_off + x) * 3;
                pixels[o..o + 3].copy_from_slice(&px.map(to_u8));
            }
        }
        x_off += g.width() + TILE_GAP;
    }
    encode_rgb8_png(total_w, h, &pixels)
}

/// Spatial-variation plots along x and y for a reference and a comparison
/// group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfilePlots {
    pub s_x: Plot,
    pub s_y: Plot,
}

pub fn render_profiles(reference: &SpatialProfile, other: &SpatialProfile) -> Result<ProfilePlots> {
    if reference.s_x.len() != other.s_x.len() || reference.s_y.len() != other.s_y.len() {
        return Err(Error::Shape(format!(
            "profile lengths differ: {}/{} vs {}/{}",
            reference.s_x.len(),
            reference.s_y.len(),
            other.s_x.len(),
            other.s_y.len()
        )));
    }
    let axis_plot = |axis: &str, position: &str, a: &[f64], b: &[f64]| {
        let series = |p: &SpatialProfile, v: &[f64], color| Series {
            name: p.group_label.clone(),
            color,
            points: v.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect(),
        };
        let chart = Chart {
            title: format!("spatial variation {axis}: {} vs {}", other.group_label, reference.group_label),
            x_label: position.into(),
            y_label: format!("summed AM-V ({axis})"),
            series: vec![series(reference, a, REFERENCE_COLOR), series(other, b, COMPARISON_COLOR)],
            style: Style::Lines,
            x_ticks: None,
        };
        let mut csv = format!("index,{},{}\n", reference.group_label, other.group_label);
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            let _ = writeln!(csv, "{i},{x},{y}");
        }
        Plot { svg: chart.to_svg(), csv }
    };
    Ok(ProfilePlots {
        s_x: axis_plot("s_x", "horizontal position (column)", &reference.s_x, &other.s_x),
        s_y: axis_plot("s_y", "vertical position (row)", &reference.s_y, &other.s_y),
    })
}

/// Bar chart of one or more histograms that share bin edges.
pub fn render_histograms(title: &str, series: &[(&str, &Histogram)]) -> Result<Plot> {
    let Some((_, first)) = series.first() else {
        return Err(Error::Render("no histograms to plot".into()));
    };
    if series.iter().any(|(_, h)| h.edges != first.edges) {
        return Err(Error::Render("histograms must share bin edges".into()));
    }
    let bins = first.counts.len();
    let width = (first.edges[bins] - first.edges[0]) / bins as f64;
    let colors = [REFERENCE_COLOR, COMPARISON_COLOR, "#2ca02c", "#ff7f0e"];
    let chart = Chart {
        title: title.into(),
        x_label: "value".into(),
        y_label: "pixel count".into(),
        series: series
            .iter()
            .enumerate()
            .map(|(k, (name, h))| Series {
                name: name.to_string(),
                color: colors[k % colors.len()],
                points: h.counts.iter().enumerate().map(|(b, &c)| (first.edges[b], c as f64)).collect(),
            })
            .collect(),
        style: Style::Bars { bar_width: if width > 0.0 { width } else { 1.0 } },
        x_ticks: None,
    };
    let mut csv = String::from("bin_lo,bin_hi");
    for (name, _) in series {
        let _ = write!(csv, ",{name}");
    }
    csv.push('\n');
    for b in 0..bins {
        let _ = write!(csv, "{},{}", first.edges[b], first.edges[b + 1]);
        for (_, h) in series {
            let _ = write!(csv, ",{}", h.counts[b]);
        }
        csv.push('\n');
    }
    Ok(Plot { svg: chart.to_svg(), csv })
}

/// FDR against the calibrated operating points, x labelled by FMR exponent.
pub fn render_fdr_curve(report: &FairnessReport) -> Result<Plot> {
    if report.curve.is_empty() {
        return Err(Error::Render("FDR curve is empty".into()));
    }
    let exponent = |t: f64| t.log10();
    let points: Vec<(f64, f64)> = report.curve.iter().map(|c| (-exponent(c.target_fmr), c.fdr)).collect();
    let ticks = report
        .curve
        .iter()
        .map(|c| {
            let e = exponent(c.target_fmr);
            let label = if (e - e.round()).abs() < 1e-9 { format!("1e{}", e.round() as i64) } else { format!("{}", c.target_fmr) };
            (-e, label)
        })
        .collect();
    let chart = Chart {
        title: format!("FDR (alpha={}) AUC={}", report.alpha, svg::fmt_num(report.fdr_auc)),
        x_label: "tau at target FMR".into(),
        y_label: "FDR".into(),
        series: vec![Series { name: "FDR".into(), color: COMPARISON_COLOR, points }],
        style: Style::Lines,
        x_ticks: Some(ticks),
    };
    let mut csv = String::from("target_fmr,tau,achieved_fmr,fdr\n");
    for p in &report.points {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            p.calibration.target_fmr, p.calibration.tau, p.calibration.achieved_fmr, p.point.fdr
        );
    }
    Ok(Plot { svg: chart.to_svg(), csv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::image::decode_rgb8_bytes;

    #[test]
    fn zero_grid_is_lowest_color() {
        let png = render_heatmap(&Grid::zeros(5, 4), &RenderSpec::default()).unwrap();
        let img = decode_rgb8_bytes(&png).unwrap();
        assert_eq!((img.width, img.height), (5, 4));
        assert!(img.pixels.chunks(3).all(|p| p == [68, 1, 84]));
    }

    #[test]
    fn fixed_range_clamps() {
        let g = Grid::from_rows(&[[0.0, 2.0]]).unwrap();
        let spec = RenderSpec { colormap: Colormap::Gray, value_range: Some((0.0, 1.0)), ..Default::default() };
        let img = decode_rgb8_bytes(&render_heatmap(&g, &spec).unwrap()).unwrap();
        assert_eq!(img.pixels, vec![0, 0, 0, 255, 255, 255]);
    }

    #[test]
    fn overlay_alpha_extremes() {
        let face = ImageTensor::from_interleaved(2, 2, 3, &[0.2, 0.4, 0.6, 1.0, 0.0, 0.5, 0.1, 0.1, 0.1, 0.9, 0.8, 0.7]).unwrap();
        let g = Grid::from_rows(&[[0.0, 1.0], [0.5, 0.25]]).unwrap();
        let gray = RenderSpec { colormap: Colormap::Gray, alpha: 0.0, value_range: None };
        let img = decode_rgb8_bytes(&render_overlay(&face, &g, &gray).unwrap()).unwrap();
        let expect: Vec<u8> = [0.2, 0.4, 0.6, 1.0, 0.0, 0.5, 0.1, 0.1, 0.1, 0.9, 0.8, 0.7].map(to_u8).to_vec();
        assert_eq!(img.pixels, expect);
        let pure = RenderSpec { alpha: 1.0, ..gray };
        let img = decode_rgb8_bytes(&render_overlay(&face, &g, &pure).unwrap()).unwrap();
        let heat = decode_rgb8_bytes(&render_heatmap(&g, &pure).unwrap()).unwrap();
        assert_eq!(img.pixels, heat.pixels);
        assert!(render_overlay(&face, &Grid::zeros(3, 2), &pure).is_err());
        assert!(RenderSpec { alpha: 1.5, ..gray }.validate().is_err());
    }

    #[test]
    fn profile_plots_csv_matches_data() {
        let a = SpatialProfile { group_label: "C".into(), s_x: vec![0.5, 1.25], s_y: vec![0.0, 0.1] };
        let b = SpatialProfile { group_label: "E".into(), s_x: vec![0.5, 1.25], s_y: vec![0.0, 0.1] };
        let p = render_profiles(&a, &b).unwrap();
        assert_eq!(p.s_x.csv, "index,C,E\n0,0.5,0.5\n1,1.25,1.25\n");
        assert!(p.s_y.svg.contains(REFERENCE_COLOR) && p.s_y.svg.contains(COMPARISON_COLOR));
        let short = SpatialProfile { s_x: vec![0.0], ..b };
        assert!(render_profiles(&a, &short).is_err());
    }

    #[test]
    fn empty_curve_rejected() {
        let report = FairnessReport { alpha: 0.5, epsilon: 0.0, groups: vec![], points: vec![], curve: vec![], fdr_auc: f64::NAN };
        assert!(render_fdr_curve(&report).is_err());
    }
}
