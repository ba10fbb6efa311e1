//! Fixed-size 2-D grids of `f64` values.
//!
//! Elements are stored row-major: `values[i * width + j]` holds the element in
//! row `i` (vertical axis) and column `j` (horizontal axis). Every operation
//! here is a pure function returning a new grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default activation-map side length in pixels.
pub const FACE_SIZE: usize = 112;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Grid {
    /// Builds a grid, rejecting length mismatches and non-finite values.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("grid dimensions must be positive, got {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "grid {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: pos });
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        assert!(value.is_finite(), "grid values must be finite");
        Self { width, height, values: vec![value; width * height] }
    }

    /// Builds a grid from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(width, height, values)
    }

    /// Crate-internal constructor for values already known to be finite.
    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.width..(row + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Applies `f` elementwise. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        assert!(values.iter().all(|v| v.is_finite()), "map produced a non-finite value");
        Self::from_parts(self.width, self.height, values)
    }

    /// Combines two equally shaped grids elementwise.
    pub fn zip_with(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_dims(other)?;
        let values: Vec<f64> =
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: pos });
        }
        Ok(Self::from_parts(self.width, self.height, values))
    }

    pub fn ensure_same_dims(&self, other: &Grid) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "grid dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// `out[i][j] = self[i][width-1-j]`.
    pub fn flip_horizontal(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            values.extend(row.iter().rev());
        }
        Self::from_parts(self.width, self.height, values)
    }

    /// Average of the grid and its horizontal mirror.
    ///
    /// Each mirrored pair is combined as `0.5*a + 0.5*b`; IEEE addition is
    /// commutative, so both members of a pair receive the identical value and
    /// the result is an exact fixed point of [`Grid::flip_horizontal`].
    pub fn mirror_average(&self) -> Self {
        let w = self.width;
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            values.extend((0..w).map(|j| 0.5 * row[j] + 0.5 * row[w - 1 - j]));
        }
        Self::from_parts(self.width, self.height, values)
    }

    /// Bilinear interpolation with corner-aligned sampling: output corners
    /// coincide with input corners. A 1-pixel output axis samples the input
    /// centre.
    pub fn resize_bilinear(&self, out_w: usize, out_h: usize) -> Self {
        assert!(out_w >= 1 && out_h >= 1, "output dimensions must be positive");
        if (out_w, out_h) == self.dims() {
            return self.clone();
        }
        let xs = sample_positions(self.width, out_w);
        let ys = sample_positions(self.height, out_h);
        let mut values = Vec::with_capacity(out_w * out_h);
        for &(y0, y1, ty) in &ys {
            let r0 = self.row(y0);
            let r1 = self.row(y1);
            for &(x0, x1, tx) in &xs {
                let top = lerp(r0[x0], r0[x1], tx);
                let bottom = lerp(r1[x0], r1[x1], tx);
                values.push(lerp(top, bottom, ty));
            }
        }
        Self::from_parts(out_w, out_h, values)
    }

    /// Rescales to `[0, 1]` by `(v - min) / (max - min)`. A constant grid maps
    /// to all zeros.
    pub fn minmax_normalize(&self) -> Self {
        let lo = self.min();
        let hi = self.max();
        if hi <= lo {
            return Self::zeros(self.width, self.height);
        }
        let range = hi - lo;
        self.map(|v| ((v - lo) / range).clamp(0.0, 1.0))
    }

    /// Per-row sums: `out[i] = Σ_j g[i][j]` (integration along x).
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    /// Per-column sums: `out[j] = Σ_i g[i][j]` (integration along y).
    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.width];
        for row in self.rows() {
            for (acc, &v) in sums.iter_mut().zip(row) {
                *acc += v;
            }
        }
        sums
    }

    /// Elementwise `max(v, 0)`.
    pub fn relu(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }
}

/// Interpolates with `a + t*(b-a)`, clamped to the segment so constants are
/// preserved exactly and outputs never leave `[min(a,b), max(a,b)]`.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        return a;
    }
    let v = a + t * (b - a);
    v.clamp(a.min(b), a.max(b))
}

fn sample_positions(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    (0..out_len)
        .map(|k| {
            let src = if out_len == 1 {
                (in_len - 1) as f64 / 2.0
            } else {
                (k * (in_len - 1)) as f64 / (out_len - 1) as f64
            };
            let lo = (src.floor() as usize).min(in_len - 1);
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}
