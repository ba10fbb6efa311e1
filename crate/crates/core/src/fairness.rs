//! Verification error rates and the fairness discrepancy rate (FDR).
//!
//! A comparison is a match when `score >= tau`. FMR is the fraction of
//! imposter scores that match; FNMR the fraction of genuine scores that do
//! not. Thresholds are calibrated on the pooled imposter scores of every group.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Group name selecting every entry of a score set.
pub const ALL_GROUPS: &str = "all";

/// Default FDR weight between the FMR and FNMR premises.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Relaxation constant of the fairness premises.
pub const EPSILON: f64 = 0.0;

/// Target FMRs of the FDR curve, descending.
pub const DEFAULT_TARGETS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Genuine,
    Imposter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub pair_id: String,
    pub group: String,
    pub kind: PairKind,
    pub score: f64,
}

#[derive(Debug, Default, Clone)]
struct SortedScores {
    genuine: Vec<f64>,
    imposter: Vec<f64>,
}

/// Labelled comparison scores, indexed by group for threshold queries.
#[derive(Debug, Clone)]
pub struct ComparisonScoreSet {
    entries: Vec<ScoreEntry>,
    by_group: BTreeMap<String, SortedScores>,
    pooled: SortedScores,
}

impl ComparisonScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        if let Some(k) = entries.iter().position(|e| !e.score.is_finite()) {
            return Err(Error::InvalidArgument(format!("score of entry {k} is not finite")));
        }
        if entries.iter().any(|e| e.group == ALL_GROUPS) {
            return Err(Error::InvalidArgument(format!("{ALL_GROUPS:?} is reserved for the pooled set")));
        }
        let mut by_group: BTreeMap<String, SortedScores> = BTreeMap::new();
        let mut pooled = SortedScores::default();
        for e in &entries {
            let bucket = by_group.entry(e.group.clone()).or_default();
            match e.kind {
                PairKind::Genuine => {
                    bucket.genuine.push(e.score);
                    pooled.genuine.push(e.score);
                }
                PairKind::Imposter => {
                    bucket.imposter.push(e.score);
                    pooled.imposter.push(e.score);
                }
            }
        }
        for s in by_group.values_mut().chain(std::iter::once(&mut pooled)) {
            s.genuine.sort_by(f64::total_cmp);
            s.imposter.sort_by(f64::total_cmp);
        }
        Ok(Self { entries, by_group, pooled })
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Group labels in sorted order.
    pub fn groups(&self) -> Vec<String> {
        self.by_group.keys().cloned().collect()
    }

    fn scores(&self, group: &str) -> Option<&SortedScores> {
        if group == ALL_GROUPS {
            Some(&self.pooled)
        } else {
            self.by_group.get(group)
        }
    }

    fn imposters(&self, group: &str) -> Result<&[f64]> {
        match self.scores(group) {
            Some(s) if !s.imposter.is_empty() => Ok(&s.imposter),
            _ => Err(Error::EmptyGroup { group: group.into(), kind: "imposter" }),
        }
    }

    fn genuines(&self, group: &str) -> Result<&[f64]> {
        match self.scores(group) {
            Some(s) if !s.genuine.is_empty() => Ok(&s.genuine),
            _ => Err(Error::EmptyGroup { group: group.into(), kind: "genuine" }),
        }
    }

    /// Fraction of the group's imposter scores with `score >= tau`.
    pub fn fmr(&self, group: &str, tau: f64) -> Result<f64> {
        let s = self.imposters(group)?;
        let below = s.partition_point(|&v| v < tau);
        Ok((s.len() - below) as f64 / s.len() as f64)
    }

    /// Fraction of the group's genuine scores with `score < tau`.
    pub fn fnmr(&self, group: &str, tau: f64) -> Result<f64> {
        let s = self.genuines(group)?;
        let below = s.partition_point(|&v| v < tau);
        Ok(below as f64 / s.len() as f64)
    }

    /// Least observed pooled imposter score whose FMR does not exceed
    /// `target_fmr`.
    pub fn calibrate_tau(&self, target_fmr: f64) -> Result<ThresholdCalibration> {
        if !(target_fmr > 0.0 && target_fmr <= 1.0) {
            return Err(Error::InvalidArgument(format!("target FMR {target_fmr} must lie in (0, 1]")));
        }
        let s = self.imposters(ALL_GROUPS)?;
        let n = s.len();
        let required = min_imposters(target_fmr);
        if (n as u64) < required {
            return Err(Error::UnresolvableTarget { target: target_fmr, required, available: n });
        }
        let fmr_at = |i: usize| (n - i) as f64 / n as f64;
        // Sorted ascending: the FMR at s[i] is over the count of scores >= s[i],
        // i.e. from the first index holding that value. Candidate thresholds are
        // the first index of each distinct value; FMR there is non-increasing.
        let mut starts: Vec<usize> = Vec::new();
        for i in 0..n {
            if i == 0 || s[i] != s[i - 1] {
                starts.push(i);
            }
        }
        let pos = starts.partition_point(|&i| fmr_at(i) > target_fmr);
        let Some(&idx) = starts.get(pos) else {
            let top = s[n - 1];
            let ties = n - s.partition_point(|&v| v < top);
            return Err(Error::TiedMaximum { target: target_fmr, ties, score: top });
        };
        Ok(ThresholdCalibration { target_fmr, tau: s[idx], achieved_fmr: fmr_at(idx) })
    }

    /// Per-group error rates and the FDR at `tau`.
    pub fn fdr(&self, groups: &[String], tau: f64, alpha: f64) -> Result<FdrPoint> {
        if groups.len() < 2 {
            return Err(Error::TooFewGroups(groups.len()));
        }
        let mut rates = BTreeMap::new();
        for g in groups {
            rates.insert(g.clone(), GroupRates { fmr: self.fmr(g, tau)?, fnmr: self.fnmr(g, tau)? });
        }
        FdrPoint::from_rates(tau, rates, alpha)
    }

    /// FDR at each calibrated target, ordered by target FMR descending, with
    /// the curve's normalized trapezoidal area.
    pub fn fdr_curve(&self, groups: &[String], targets: &[f64], alpha: f64) -> Result<FairnessReport> {
        if targets.is_empty() {
            return Err(Error::InvalidArgument("no target FMRs given".into()));
        }
        let mut targets = targets.to_vec();
        targets.sort_by(|a, b| b.total_cmp(a));
        targets.dedup();
        let mut points = Vec::with_capacity(targets.len());
        for &t in &targets {
            let calibration = self.calibrate_tau(t)?;
            let point = self.fdr(groups, calibration.tau, alpha)?;
            points.push(CalibratedPoint { calibration, point });
        }
        let curve: Vec<CurvePoint> =
            points.iter().map(|p| CurvePoint { target_fmr: p.calibration.target_fmr, fdr: p.point.fdr }).collect();
        let fdr_auc = fdr_auc(&curve.iter().map(|c| c.fdr).collect::<Vec<_>>());
        Ok(FairnessReport { alpha, epsilon: EPSILON, groups: groups.to_vec(), points, curve, fdr_auc })
    }
}

/// Minimum imposter count for a resolvable target: `ceil(1 / target)`.
pub fn min_imposters(target_fmr: f64) -> u64 {
    let inv = 1.0 / target_fmr;
    let rounded = inv.round();
    if (inv - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded as u64
    } else {
        inv.ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    pub target_fmr: f64,
    pub tau: f64,
    pub achieved_fmr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub fmr: f64,
    pub fnmr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrPoint {
    pub tau: f64,
    pub rates: BTreeMap<String, GroupRates>,
    /// Largest pairwise FMR gap.
    pub a_tau: f64,
    /// Largest pairwise FNMR gap.
    pub b_tau: f64,
    pub fdr: f64,
    /// Whether both gaps are within the relaxation constant.
    pub premises_hold: bool,
}

impl FdrPoint {
    pub fn from_rates(tau: f64, rates: BTreeMap<String, GroupRates>, alpha: f64) -> Result<Self> {
        if rates.len() < 2 {
            return Err(Error::TooFewGroups(rates.len()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha {alpha} must lie in [0, 1]")));
        }
        let fmrs: Vec<f64> = rates.values().map(|r| r.fmr).collect();
        let fnmrs: Vec<f64> = rates.values().map(|r| r.fnmr).collect();
        let a_tau = max_pairwise_gap(&fmrs);
        let b_tau = max_pairwise_gap(&fnmrs);
        Ok(Self {
            tau,
            rates,
            a_tau,
            b_tau,
            fdr: fdr_value(a_tau, b_tau, alpha),
            premises_hold: a_tau <= EPSILON && b_tau <= EPSILON,
        })
    }
}

/// `1 − (α·A + (1−α)·B)`.
pub fn fdr_value(a_tau: f64, b_tau: f64, alpha: f64) -> f64 {
    1.0 - (alpha * a_tau + (1.0 - alpha) * b_tau)
}

/// `max |x_i − x_j|` over unordered pairs.
pub fn max_pairwise_gap(values: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            best = best.max((a - b).abs());
        }
    }
    best
}

/// FDR from per-group (FMR, FNMR) pairs, e.g. published tables.
pub fn fdr_from_rates<'a>(rates: impl IntoIterator<Item = (&'a str, f64, f64)>, alpha: f64) -> Result<FdrPoint> {
    let rates = rates.into_iter().map(|(g, fmr, fnmr)| (g.to_string(), GroupRates { fmr, fnmr })).collect();
    FdrPoint::from_rates(f64::NAN, rates, alpha)
}

/// Trapezoidal area with the points spread uniformly over `[0, 1]`. A single
/// point yields its own value.
pub fn fdr_auc(fdrs: &[f64]) -> f64 {
    match fdrs.len() {
        0 => f64::NAN,
        1 => fdrs[0],
        n => {
            let step = 1.0 / (n - 1) as f64;
            fdrs.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPoint {
    pub calibration: ThresholdCalibration,
    pub point: FdrPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub target_fmr: f64,
    pub fdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub alpha: f64,
    pub epsilon: f64,
    pub groups: Vec<String>,
    pub points: Vec<CalibratedPoint>,
    pub curve: Vec<CurvePoint>,
    pub fdr_auc: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(genuine: &[(&str, f64)], imposter: &[(&str, f64)]) -> ComparisonScoreSet {
        let mut entries = Vec::new();
        for (k, &(g, s)) in genuine.iter().enumerate() {
            entries.push(ScoreEntry { pair_id: format!("g{k}"), group: g.into(), kind: PairKind::Genuine, score: s });
        }
        for (k, &(g, s)) in imposter.iter().enumerate() {
            entries.push(ScoreEntry { pair_id: format!("i{k}"), group: g.into(), kind: PairKind::Imposter, score: s });
        }
        ComparisonScoreSet::new(entries).unwrap()
    }

    #[test]
    fn fmr_examples() {
        let s = set(&[("x", 0.5)], &[("x", 0.1), ("x", 0.2), ("x", 0.3), ("x", 0.9)]);
        assert_eq!(s.fmr("x", 0.5).unwrap(), 0.25);
        assert_eq!(s.fmr("x", 0.91).unwrap(), 0.0);
        assert_eq!(s.fmr("x", 0.1).unwrap(), 1.0);
        assert_eq!(s.fmr("x", -3.0).unwrap(), 1.0);
    }

    #[test]
    fn fnmr_examples() {
        let s = set(&[("x", 0.4), ("x", 0.6), ("x", 0.8)], &[("x", 0.0)]);
        assert_eq!(s.fnmr("x", 0.5).unwrap(), 1.0 / 3.0);
        assert_eq!(s.fnmr("x", 0.4).unwrap(), 0.0);
        let eq = set(&[("x", 0.7), ("x", 0.7)], &[("x", 0.0)]);
        assert_eq!(eq.fnmr("x", 0.7).unwrap(), 0.0);
    }

    #[test]
    fn empty_groups_error() {
        let s = set(&[("x", 0.4)], &[("y", 0.1)]);
        assert!(matches!(s.fmr("x", 0.5), Err(Error::EmptyGroup { kind: "imposter", .. })));
        assert!(matches!(s.fnmr("y", 0.5), Err(Error::EmptyGroup { kind: "genuine", .. })));
        assert!(s.fmr("nope", 0.5).is_err());
    }

    #[test]
    fn calibration_examples() {
        let s = set(&[("x", 0.5)], &[("x", 0.1), ("x", 0.2), ("x", 0.3), ("x", 0.9)]);
        let c = s.calibrate_tau(0.25).unwrap();
        assert_eq!((c.tau, c.achieved_fmr), (0.9, 0.25));
        let c = s.calibrate_tau(1.0).unwrap();
        assert_eq!((c.tau, c.achieved_fmr), (0.1, 1.0));

        let ten: Vec<(&str, f64)> = (0..10).map(|i| ("x", i as f64 / 10.0)).collect();
        let s = set(&[("x", 0.5)], &ten);
        match s.calibrate_tau(1e-3) {
            Err(Error::UnresolvableTarget { required: 1000, available: 10, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(min_imposters(1e-5), 100_000);
        assert_eq!(min_imposters(0.3), 4);
    }

    #[test]
    fn calibration_with_ties_counts_them_together() {
        let s = set(&[("x", 0.5)], &[("x", 0.1), ("x", 0.4), ("x", 0.4), ("x", 0.8)]);
        // FMR(0.4) = 3/4, FMR(0.8) = 1/4
        let c = s.calibrate_tau(0.5).unwrap();
        assert_eq!((c.tau, c.achieved_fmr), (0.8, 0.25));
        let tied = set(&[("x", 0.5)], &[("x", 0.4); 4]);
        assert!(matches!(tied.calibrate_tau(0.5), Err(Error::TiedMaximum { ties: 4, .. })));
    }

    #[test]
    fn fdr_table_rows() {
        let p = fdr_from_rates(
            [("C", 0.007, 0.040), ("E", 0.026, 0.127), ("A", 0.017, 0.085), ("I", 0.022, 0.082)],
            0.5,
        )
        .unwrap();
        assert!((p.a_tau - 0.019).abs() < 1e-12);
        assert!((p.b_tau - 0.087).abs() < 1e-12);
        assert!((p.fdr - 0.947).abs() < 1e-12);

        let g = fdr_from_rates([("m", 0.011, 0.085), ("f", 0.016, 0.083)], 0.5).unwrap();
        assert!((g.fdr - 0.9965).abs() < 1e-12);
    }

    #[test]
    fn equal_rates_are_perfectly_fair() {
        let p = fdr_from_rates([("a", 0.01, 0.2), ("b", 0.01, 0.2), ("c", 0.01, 0.2)], 0.5).unwrap();
        assert_eq!((p.a_tau, p.b_tau, p.fdr), (0.0, 0.0, 1.0));
        assert!(p.premises_hold);
        assert!(matches!(fdr_from_rates([("a", 0.1, 0.1)], 0.5), Err(Error::TooFewGroups(1))));
    }

    #[test]
    fn auc_trapezoid() {
        assert_eq!(fdr_auc(&[1.0; 5]), 1.0);
        assert_eq!(fdr_auc(&[1.0, 1.0, 1.0, 1.0, 0.0]), 0.875);
        assert_eq!(fdr_auc(&[0.9]), 0.9);
    }
}
