//! Activation-map statistics and verification fairness metrics for face
//! recognition models.
//!
//! The pipeline runs Score-CAM over a face model to obtain one activation map
//! per sample ([`cam`]), aggregates maps per demographic cohort into mean and
//! variation maps ([`stats`]), and measures verification fairness with the
//! fairness discrepancy rate over calibrated thresholds ([`fairness`]).
//! [`render`] emits heatmaps, overlays and plots; [`pipeline`] drives the
//! whole run from a manifest.

pub mod cam;
pub mod demographics;
pub mod error;
pub mod fairness;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod render;
pub mod selftest;
pub mod stats;
pub mod synthetic;

pub use cam::{ActivationMap, ImageTensor, ToyModelSpec};
pub use demographics::{Demographics, Ethnicity, Gender};
pub use error::{Error, Result};
pub use fairness::{ComparisonScoreSet, FairnessReport, ThresholdCalibration};
pub use grid::Grid;
pub use stats::{Cohort, CohortStatistics, SpatialProfile};
