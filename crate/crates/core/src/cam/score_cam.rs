//! Score-CAM for embedding models.
//!
//! Channel activations at the target layer are upsampled to the input size,
//! min-max normalized and used as masks on the input image. Each masked image
//! is re-embedded and scored against the unmasked embedding; the softmax of
//! those scores weights the upsampled channels. The weighted sum is ReLU'd and
//! normalized to `[0, 1]`.

use crate::cam::model::ToyModelSpec;
use crate::cam::tensor::ImageTensor;
use crate::cam::ActivationMap;
use crate::demographics::Demographics;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Scalar used to score a masked image against the original embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelScoring {
    /// Cosine similarity between masked and original embeddings. A zero
    /// masked embedding scores 0.
    #[default]
    Cosine,
    /// Negative Euclidean distance between masked and original embeddings.
    NegativeDistance,
}

impl ChannelScoring {
    fn score(self, masked: &[f64], original: &[f64], original_norm: f64) -> f64 {
        match self {
            ChannelScoring::Cosine => {
                let norm = l2(masked);
                if norm == 0.0 {
                    return 0.0;
                }
                dot(masked, original) / (norm * original_norm)
            }
            ChannelScoring::NegativeDistance => {
                -masked.iter().zip(original).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CamResult {
    /// Final map in `[0, 1]` at the input resolution.
    pub cam: Grid,
    /// Raw channel scores.
    pub scores: Vec<f64>,
    /// Softmax of `scores`.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreCam<'a> {
    model: &'a ToyModelSpec,
    scoring: ChannelScoring,
}

impl<'a> ScoreCam<'a> {
    pub fn new(model: &'a ToyModelSpec) -> Self {
        Self { model, scoring: ChannelScoring::default() }
    }

    pub fn with_scoring(mut self, scoring: ChannelScoring) -> Self {
        self.scoring = scoring;
        self
    }

    pub fn model(&self) -> &ToyModelSpec {
        self.model
    }

    pub fn compute(&self, img: &ImageTensor) -> Result<CamResult> {
        let forward = self.model.forward(img.tensor())?;
        let original = &forward.embedding;
        let original_norm = l2(original);
        if self.scoring == ChannelScoring::Cosine && original_norm == 0.0 {
            return Err(Error::ZeroEmbedding);
        }
        let (w, h) = (img.width(), img.height());
        let upsampled: Vec<Grid> =
            forward.target_activations.iter().map(|a| a.resize_bilinear(w, h)).collect();

        let mut scores = Vec::with_capacity(upsampled.len());
        for channel in &upsampled {
            let mask = channel.minmax_normalize();
            let masked = img.masked(&mask)?;
            let embedding = self.model.embed(masked.tensor())?;
            scores.push(self.scoring.score(&embedding, original, original_norm));
        }
        let weights = softmax(&scores);

        let mut acc = vec![0.0; w * h];
        for (channel, &wk) in upsampled.iter().zip(&weights) {
            for (a, &v) in acc.iter_mut().zip(channel.values()) {
                *a += wk * v;
            }
        }
        let cam = Grid::from_parts(w, h, acc).relu().minmax_normalize();
        Ok(CamResult { cam, scores, weights })
    }

    /// Average of the map for `img` and the mirrored map for the flipped
    /// image, clamped to `[0, 1]`.
    pub fn symmetrized(&self, img: &ImageTensor) -> Result<Grid> {
        let direct = self.compute(img)?.cam;
        let mirrored = self.compute(&img.flip_horizontal())?.cam.flip_horizontal();
        direct.zip_with(&mirrored, |a, b| (0.5 * a + 0.5 * b).clamp(0.0, 1.0))
    }

    pub fn activation_map(
        &self,
        img: &ImageTensor,
        sample_id: impl Into<String>,
        demographics: Demographics,
    ) -> Result<ActivationMap> {
        ActivationMap::new(sample_id, self.symmetrized(img)?, demographics)
    }
}

/// Convenience wrapper using cosine channel scoring.
pub fn score_cam(model: &ToyModelSpec, img: &ImageTensor) -> Result<CamResult> {
    ScoreCam::new(model).compute(img)
}

/// Convenience wrapper using cosine channel scoring.
pub fn score_cam_symmetrized(model: &ToyModelSpec, img: &ImageTensor) -> Result<Grid> {
    ScoreCam::new(model).symmetrized(img)
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
