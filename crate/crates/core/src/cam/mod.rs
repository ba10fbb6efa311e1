//! CNN inference over `TMDL` toy models and Score-CAM activation maps.

pub mod format;
pub mod model;
pub mod score_cam;
pub mod tensor;

use serde::Serialize;

use crate::demographics::Demographics;
use crate::error::{Error, Result};
use crate::grid::Grid;

pub use format::{load_model, write_model};
pub use model::{ActShape, ForwardOutput, Layer, ToyModelSpec};
pub use score_cam::{score_cam, score_cam_symmetrized, softmax, CamResult, ChannelScoring, ScoreCam};
pub use tensor::{ImageTensor, Tensor};

/// Saliency map of one face sample, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationMap {
    sample_id: String,
    grid: Grid,
    demographics: Demographics,
}

impl ActivationMap {
    pub fn new(sample_id: impl Into<String>, grid: Grid, demographics: Demographics) -> Result<Self> {
        if let Some(index) = grid.values().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "activation value {} at element {index} is outside [0, 1]",
                grid.values()[index]
            )));
        }
        Ok(Self { sample_id: sample_id.into(), grid, demographics })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn demographics(&self) -> Demographics {
        self.demographics
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }
}
