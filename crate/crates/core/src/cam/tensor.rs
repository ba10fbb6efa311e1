use crate::error::{Error, Result};
use crate::grid::{Grid, FACE_SIZE};

/// Dense channel-major (`CHW`) tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub(crate) channels: usize,
    pub(crate) height: usize,
    pub(crate) width: usize,
    pub(crate) data: Vec<f64>,
}

impl Tensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "tensor {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_grid(&self, c: usize) -> Grid {
        Grid::from_parts(self.width, self.height, self.channel(c).to_vec())
    }
}

/// Input image in `[0, 1]`, stored channel-major.
///
/// Face images are 3×112×112; smaller shapes are accepted so toy models can
/// be exercised on tiny inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor(Tensor);

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let t = Tensor::new(channels, height, width, data)?;
        if let Some(index) = t.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "image value {} at element {index} is outside [0, 1]",
                t.data[index]
            )));
        }
        Ok(Self(t))
    }

    /// A 3×112×112 face image.
    pub fn face(data: Vec<f64>) -> Result<Self> {
        Self::new(3, FACE_SIZE, FACE_SIZE, data)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value));
        Self(Tensor { channels, height, width, data: vec![value; channels * height * width] })
    }

    /// Builds an image from interleaved `HWC` samples (e.g. decoded RGB).
    pub fn from_interleaved(height: usize, width: usize, channels: usize, hwc: &[f64]) -> Result<Self> {
        if hwc.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "interleaved image {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                hwc.len()
            )));
        }
        let mut data = vec![0.0; hwc.len()];
        let plane = height * width;
        for (p, px) in hwc.chunks_exact(channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[c * plane + p] = v;
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.0.shape()
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn channels(&self) -> usize {
        self.0.channels
    }

    /// Value of channel `c` at row `y`, column `x`.
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.0.data[(c * self.0.height + y) * self.0.width + x]
    }

    pub fn flip_horizontal(&self) -> Self {
        let t = &self.0;
        let mut data = Vec::with_capacity(t.data.len());
        for row in t.data.chunks_exact(t.width) {
            data.extend(row.iter().rev());
        }
        Self(Tensor { data, ..t.clone() })
    }

    /// Multiplies every channel by the same spatial mask.
    pub fn masked(&self, mask: &Grid) -> Result<Self> {
        let t = &self.0;
        if mask.dims() != (t.width, t.height) {
            return Err(Error::Shape(format!(
                "mask {}x{} does not match image {}x{}",
                mask.width(),
                mask.height(),
                t.width,
                t.height
            )));
        }
        let m = mask.values();
        let data = t
            .data
            .chunks_exact(m.len())
            .flat_map(|plane| plane.iter().zip(m).map(|(&v, &w)| v * w))
            .collect();
        Ok(Self(Tensor { data, ..t.clone() }))
    }
}
