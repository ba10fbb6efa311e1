//! Minimal deterministic SVG line and bar charts.
//!
//! Coordinates are printed with three decimals and text uses a fixed
//! monospace font family, so identical data always yields identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const FONT: &str = "DejaVu Sans Mono, monospace";

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Lines,
    /// Side-by-side bars; each point's x is the left edge of a bin of width
    /// `bar_width`.
    Bars { bar_width: f64 },
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub style: Style,
    /// Explicit x tick positions and labels; numeric ticks otherwise.
    pub x_ticks: Option<Vec<(f64, String)>>,
}

pub fn fmt_num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let bar_width = match self.style {
            Style::Bars { bar_width } => bar_width,
            Style::Lines => 0.0,
        };
        let xs = self.series.iter().flat_map(|s| s.points.iter().flat_map(|p| [p.0, p.0 + bar_width]));
        let (x0, x1) = range(xs);
        let ys = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
        let (mut y0, y1) = range(ys);
        if matches!(self.style, Style::Bars { .. }) {
            y0 = y0.min(0.0);
        }
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="{FONT}" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            fmt_num(WIDTH / 2.0),
            escape(&self.title)
        );
        // axes
        let _ = writeln!(
            s,
            r#"<path d="M{} {} L{} {} L{} {}" fill="none" stroke="black" stroke-width="1"/>"#,
            fmt_num(LEFT),
            fmt_num(TOP),
            fmt_num(LEFT),
            fmt_num(TOP + ph),
            fmt_num(LEFT + pw),
            fmt_num(TOP + ph)
        );
        let x_ticks: Vec<(f64, String)> = match &self.x_ticks {
            Some(t) => t.clone(),
            None => (0..=5).map(|k| x0 + (x1 - x0) * k as f64 / 5.0).map(|v| (v, tick_label(v))).collect(),
        };
        for (v, label) in &x_ticks {
            let x = fmt_num(sx(*v));
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
                fmt_num(TOP + ph),
                fmt_num(TOP + ph + 5.0),
                fmt_num(TOP + ph + 20.0),
                escape(label)
            );
        }
        for k in 0..=5 {
            let v = y0 + (y1 - y0) * k as f64 / 5.0;
            let y = fmt_num(sy(v));
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/><text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
                fmt_num(LEFT - 5.0),
                fmt_num(LEFT),
                fmt_num(LEFT - 8.0),
                tick_label(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            fmt_num(LEFT + pw / 2.0),
            fmt_num(HEIGHT - 15.0),
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            fmt_num(TOP + ph / 2.0),
            fmt_num(TOP + ph / 2.0),
            escape(&self.y_label)
        );

        let n_series = self.series.len().max(1) as f64;
        for (k, series) in self.series.iter().enumerate() {
            match self.style {
                Style::Lines => {
                    let mut d = String::new();
                    for (i, &(x, y)) in series.points.iter().enumerate() {
                        let _ = write!(d, "{}{} {}", if i == 0 { "M" } else { " L" }, fmt_num(sx(x)), fmt_num(sy(y)));
                    }
                    let _ = writeln!(
                        s,
                        r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                        series.color
                    );
                }
                Style::Bars { .. } => {
                    let sub = bar_width / n_series;
                    for &(x, y) in &series.points {
                        let left = sx(x + sub * k as f64);
                        let right = sx(x + sub * (k as f64 + 1.0));
                        let top = sy(y.max(y0));
                        let base = sy(y0);
                        let _ = writeln!(
                            s,
                            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                            fmt_num(left),
                            fmt_num(top),
                            fmt_num((right - left).max(0.0)),
                            fmt_num((base - top).max(0.0)),
                            series.color
                        );
                    }
                }
            }
            let ly = TOP + 14.0 * k as f64 + 8.0;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                fmt_num(LEFT + pw - 120.0),
                fmt_num(ly - 9.0),
                series.color,
                fmt_num(LEFT + pw - 105.0),
                fmt_num(ly),
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
