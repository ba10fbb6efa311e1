//! Cohort-level statistics over activation maps: mean map (MAM), variation
//! map (AM-V), differential variation (D-AM-V), spatial-variation profiles and
//! value histograms.

use serde::{Deserialize, Serialize};

use crate::cam::ActivationMap;
use crate::demographics::{Ethnicity, Gender};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Histogram bin count used when none is configured.
pub const DEFAULT_BINS: usize = 64;

/// Activation maps of one demographic group.
#[derive(Debug, Clone)]
pub struct Cohort {
    label: String,
    maps: Vec<ActivationMap>,
}

impl Cohort {
    /// Requires at least two maps of identical dimensions. When `label` is an
    /// ethnicity or gender tag, every map must carry that tag.
    pub fn new(label: impl Into<String>, maps: Vec<ActivationMap>) -> Result<Self> {
        let label = label.into();
        if maps.len() < 2 {
            return Err(Error::CohortTooSmall { label, count: maps.len() });
        }
        let dims = maps[0].grid().dims();
        if let Some(k) = maps.iter().position(|m| m.grid().dims() != dims) {
            return Err(Error::InvalidCohort {
                label,
                message: format!("map {k} has dimensions {:?}, expected {dims:?}", maps[k].grid().dims()),
            });
        }
        let ethnicity = label.parse::<Ethnicity>().ok().filter(|e| *e != Ethnicity::Unknown);
        let gender = label.parse::<Gender>().ok().filter(|g| *g != Gender::Unknown);
        let mismatch = maps.iter().position(|m| {
            let d = m.demographics();
            ethnicity.is_some_and(|e| d.ethnicity != e) || gender.is_some_and(|g| d.gender != g)
        });
        if let Some(k) = mismatch {
            return Err(Error::InvalidCohort {
                label,
                message: format!("map {k} ({}) carries a different demographic tag", maps[k].sample_id()),
            });
        }
        Ok(Self { label, maps })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn maps(&self) -> &[ActivationMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.maps[0].grid().dims()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortStatistics {
    pub group_label: String,
    pub n: usize,
    pub mam: Grid,
    pub amv: Grid,
}

impl CohortStatistics {
    pub fn compute(cohort: &Cohort) -> Result<Self> {
        let mam = compute_mam(cohort)?;
        let amv = compute_amv(cohort, &mam)?;
        Ok(Self { group_label: cohort.label.clone(), n: cohort.len(), mam, amv })
    }
}

/// Per-pixel mean, accumulated in cohort order.
///
/// Pixels where every map agrees return that value exactly, and every mean is
/// clamped to the per-pixel `[min, max]` of the samples.
pub fn compute_mam(cohort: &Cohort) -> Result<Grid> {
    let n = cohort.len();
    if n < 2 {
        return Err(Error::CohortTooSmall { label: cohort.label.clone(), count: n });
    }
    let (w, h) = cohort.dims();
    let first = cohort.maps[0].grid().values();
    let mut sum = first.to_vec();
    let mut lo = first.to_vec();
    let mut hi = first.to_vec();
    for map in &cohort.maps[1..] {
        for (k, &v) in map.grid().values().iter().enumerate() {
            sum[k] += v;
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let values = sum
        .iter()
        .zip(lo.iter().zip(&hi))
        .map(|(&s, (&l, &u))| if l == u { l } else { (s / n as f64).clamp(l, u) })
        .collect();
    Ok(Grid::from_parts(w, h, values))
}

/// Per-pixel population standard deviation around `mam`:
/// `sqrt((1/N) Σ_k (a_k − mam)²)`.
pub fn compute_amv(cohort: &Cohort, mam: &Grid) -> Result<Grid> {
    let n = cohort.len();
    if n < 2 {
        return Err(Error::CohortTooSmall { label: cohort.label.clone(), count: n });
    }
    let (w, h) = cohort.dims();
    if mam.dims() != (w, h) {
        return Err(Error::Shape(format!(
            "mean map {}x{} does not match cohort maps {w}x{h}",
            mam.width(),
            mam.height()
        )));
    }
    let mut sq = vec![0.0; w * h];
    let mut lo = vec![f64::INFINITY; w * h];
    let mut hi = vec![f64::NEG_INFINITY; w * h];
    for map in &cohort.maps {
        for (k, (&v, &m)) in map.grid().values().iter().zip(mam.values()).enumerate() {
            let d = v - m;
            sq[k] += d * d;
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let values = sq
        .iter()
        .zip(lo.iter().zip(&hi))
        .map(|(&s, (&l, &u))| (s / n as f64).sqrt().clamp(0.0, 0.5 * (u - l)))
        .collect();
    Ok(Grid::from_parts(w, h, values))
}

/// `mirror_average(|a.amv − b.amv|)`.
pub fn compute_damv(a: &CohortStatistics, b: &CohortStatistics) -> Result<Grid> {
    damv_from_grids(&a.amv, &b.amv)
}

pub fn damv_from_grids(a: &Grid, b: &Grid) -> Result<Grid> {
    Ok(a.zip_with(b, |x, y| (x - y).abs())?.mirror_average())
}

/// AM-V integrated along each face axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialProfile {
    pub group_label: String,
    /// Column sums: one entry per horizontal position.
    pub s_x: Vec<f64>,
    /// Row sums: one entry per vertical position.
    pub s_y: Vec<f64>,
}

pub fn compute_spatial_profile(amv: &Grid, label: impl Into<String>) -> SpatialProfile {
    SpatialProfile { group_label: label.into(), s_x: amv.col_sums(), s_y: amv.row_sums() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Uniform histogram over `[min(0, min g), max g]`. Bins are right-open except
/// the last, which is closed; a zero-width range puts every value in the last
/// bin.
pub fn value_histogram(g: &Grid, bins: usize) -> Result<Histogram> {
    value_histogram_in(g, bins, g.min().min(0.0), g.max())
}

/// Histogram over an explicit `[lo, hi]`, e.g. shared across groups. Values
/// outside the range land in the first or last bin.
pub fn value_histogram_in(g: &Grid, bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!("invalid histogram range [{lo}, {hi}]")));
    }
    let width = hi - lo;
    let edges = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + width * k as f64 / bins as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    for &v in g.values() {
        let idx = if width > 0.0 { (((v - lo) / width).max(0.0) * bins as f64).floor() as usize } else { bins - 1 };
        counts[idx.min(bins - 1)] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demographics::Demographics;

    fn maps_from(values: &[&[f64]], w: usize, h: usize) -> Vec<ActivationMap> {
        values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                ActivationMap::new(format!("s{k}"), Grid::new(w, h, v.to_vec()).unwrap(), Demographics::default())
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn mean_and_deviation_of_two_values() {
        let cohort = Cohort::new("x", maps_from(&[&[0.2], &[0.6]], 1, 1)).unwrap();
        let stats = CohortStatistics::compute(&cohort).unwrap();
        assert_eq!(stats.mam.values(), &[0.4]);
        // (0.6 - 0.2) / 2 in binary64 rounds to one ulp below 0.2
        let amv = stats.amv.values()[0];
        assert!((amv - 0.2).abs() <= 0.2 * f64::EPSILON, "{amv}");
    }

    #[test]
    fn extreme_values_hit_upper_bound() {
        let cohort = Cohort::new("x", maps_from(&[&[0.0], &[1.0]], 1, 1)).unwrap();
        let stats = CohortStatistics::compute(&cohort).unwrap();
        assert_eq!(stats.amv.values(), &[0.5]);
    }

    #[test]
    fn identical_maps_are_exact() {
        let v = [0.1, 0.7, 0.3333, 0.9];
        let cohort = Cohort::new("x", maps_from(&[&v, &v, &v], 2, 2)).unwrap();
        let stats = CohortStatistics::compute(&cohort).unwrap();
        assert_eq!(stats.mam.values(), &v);
        assert!(stats.amv.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cohort_too_small() {
        let err = Cohort::new("C", maps_from(&[&[0.1]], 1, 1)).unwrap_err();
        assert!(matches!(err, Error::CohortTooSmall { count: 1, .. }));
    }

    #[test]
    fn cohort_label_must_match_tags() {
        let err = Cohort::new("C", maps_from(&[&[0.1], &[0.2]], 1, 1)).unwrap_err();
        assert!(matches!(err, Error::InvalidCohort { .. }));
    }

    #[test]
    fn damv_hand_case_and_symmetry() {
        let a = Grid::from_rows(&[[0.3, 0.1]]).unwrap();
        let b = Grid::from_rows(&[[0.1, 0.3]]).unwrap();
        let d = damv_from_grids(&a, &b).unwrap();
        let e = 0.5 * (0.3f64 - 0.1).abs() + 0.5 * (0.1f64 - 0.3).abs();
        assert_eq!(d.values(), &[e, e]);
        assert!((e - 0.2).abs() < 1e-15);
        assert_eq!(damv_from_grids(&b, &a).unwrap(), d);
        assert!(damv_from_grids(&a, &a).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(damv_from_grids(&a, &Grid::zeros(3, 1)).is_err());
    }

    #[test]
    fn profiles_are_axis_sums() {
        let g = Grid::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let p = compute_spatial_profile(&g, "C");
        assert_eq!(p.s_x, vec![4.0, 6.0]);
        assert_eq!(p.s_y, vec![3.0, 7.0]);
        let z = compute_spatial_profile(&Grid::zeros(3, 3), "C");
        assert!(z.s_x.iter().chain(&z.s_y).all(|&v| v == 0.0));
    }

    #[test]
    fn histogram_boundaries() {
        let h = value_histogram(&Grid::filled(3, 3, 0.4), 4).unwrap();
        assert_eq!(h.counts, vec![0, 0, 0, 9]);
        let h = value_histogram(&Grid::from_rows(&[[0.0, 1.0]]).unwrap(), 2).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
        let h = value_histogram(&Grid::zeros(2, 2), 3).unwrap();
        assert_eq!(h.counts, vec![0, 0, 4]);
        assert!(value_histogram(&Grid::zeros(2, 2), 0).is_err());
    }
}
