//! Toy feed-forward CNN: layer definitions, shape validation and inference.

use crate::cam::tensor::Tensor;
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// Weights are `[out][in][kh][kw]` row-major, one bias per output channel.
    Conv {
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    MaxPool {
        window: usize,
        stride: usize,
    },
    GlobalAvgPool,
    /// Weights are `[out][in]` row-major; the input is flattened channel-major.
    Dense {
        out_features: usize,
        in_features: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::Relu => "relu",
            Layer::MaxPool { .. } => "maxpool",
            Layer::GlobalAvgPool => "gap",
            Layer::Dense { .. } => "fc",
        }
    }
}

/// Activation shape after a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActShape {
    Spatial { channels: usize, height: usize, width: usize },
    Flat(usize),
}

impl ActShape {
    pub fn numel(self) -> usize {
        match self {
            ActShape::Spatial { channels, height, width } => channels * height * width,
            ActShape::Flat(n) => n,
        }
    }
}

/// Validated model: input shape, layers, and the layer whose output channels
/// feed Score-CAM.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModelSpec {
    input: (usize, usize, usize),
    layers: Vec<Layer>,
    target_layer: usize,
    shapes: Vec<ActShape>,
}

/// Result of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub embedding: Vec<f64>,
    /// One grid per channel of the target layer output.
    pub target_activations: Vec<Grid>,
}

impl ToyModelSpec {
    /// Validates layer parameters and shape consistency.
    ///
    /// `input` is `(channels, height, width)`.
    pub fn new(input: (usize, usize, usize), layers: Vec<Layer>, target_layer: usize) -> Result<Self> {
        let (c, h, w) = input;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::ModelFormat(format!("input shape {c}x{h}x{w} must be positive")));
        }
        if layers.is_empty() {
            return Err(Error::ModelFormat("model has no layers".into()));
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut current = ActShape::Spatial { channels: c, height: h, width: w };
        for (i, layer) in layers.iter().enumerate() {
            current = infer_shape(i, layer, current)?;
            shapes.push(current);
        }
        if target_layer >= layers.len() {
            return Err(Error::ModelFormat(format!(
                "target layer index {target_layer} out of range for {} layers",
                layers.len()
            )));
        }
        if !matches!(shapes[target_layer], ActShape::Spatial { .. }) {
            return Err(Error::ModelLayer {
                layer: target_layer,
                message: "target layer must produce a spatial multi-channel output".into(),
            });
        }
        if !matches!(shapes.last(), Some(ActShape::Flat(_))) {
            return Err(Error::ModelFormat(
                "final layer must produce a flat embedding (gap or fc)".into(),
            ));
        }
        Ok(Self { input, layers, target_layer, shapes })
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn target_layer(&self) -> usize {
        self.target_layer
    }

    pub fn layer_shapes(&self) -> &[ActShape] {
        &self.shapes
    }

    pub fn embedding_dim(&self) -> usize {
        self.shapes.last().map(|s| s.numel()).unwrap_or(0)
    }

    /// Number of channels at the target layer.
    pub fn target_channels(&self) -> usize {
        match self.shapes[self.target_layer] {
            ActShape::Spatial { channels, .. } => channels,
            ActShape::Flat(_) => unreachable!("validated at construction"),
        }
    }

    pub fn forward(&self, img: &Tensor) -> Result<ForwardOutput> {
        let (embedding, captured) = self.run(img, true)?;
        let target = captured.expect("target layer is always reached");
        let target_activations = (0..target.channels).map(|k| target.channel_grid(k)).collect();
        Ok(ForwardOutput { embedding, target_activations })
    }

    /// Forward pass that only returns the embedding.
    pub fn embed(&self, img: &Tensor) -> Result<Vec<f64>> {
        Ok(self.run(img, false)?.0)
    }

    fn run(&self, img: &Tensor, capture: bool) -> Result<(Vec<f64>, Option<Tensor>)> {
        if img.shape() != self.input {
            let (c, h, w) = self.input;
            let (ic, ih, iw) = img.shape();
            return Err(Error::Shape(format!(
                "image {ic}x{ih}x{iw} does not match model input {c}x{h}x{w}"
            )));
        }
        let mut x = img.clone();
        let mut captured = None;
        for (i, layer) in self.layers.iter().enumerate() {
            x = apply(layer, &x);
            if capture && i == self.target_layer {
                captured = Some(x.clone());
            }
        }
        Ok((x.data, captured))
    }
}

fn infer_shape(index: usize, layer: &Layer, prev: ActShape) -> Result<ActShape> {
    let layer_err = |message: String| Error::ModelLayer { layer: index, message };
    let mismatch = |message: String| Error::LayerMismatch { from: index.saturating_sub(1), to: index, message };
    match layer {
        Layer::Conv { out_channels, in_channels, kernel_h, kernel_w, stride, padding, weights, bias } => {
            let ActShape::Spatial { channels, height, width } = prev else {
                return Err(mismatch("conv requires a spatial input, previous layer is flat".into()));
            };
            if *out_channels == 0 || *kernel_h == 0 || *kernel_w == 0 || *stride == 0 {
                return Err(layer_err("conv channels, kernel and stride must be positive".into()));
            }
            if *in_channels != channels {
                return Err(mismatch(format!(
                    "previous layer produces {channels} channels, conv expects {in_channels}"
                )));
            }
            if weights.len() != out_channels * in_channels * kernel_h * kernel_w || bias.len() != *out_channels {
                return Err(layer_err("conv weight or bias length does not match its shape".into()));
            }
            if weights.iter().chain(bias).any(|v| !v.is_finite()) {
                return Err(layer_err("non-finite conv weight".into()));
            }
            let ph = height + 2 * padding;
            let pw = width + 2 * padding;
            if *kernel_h > ph || *kernel_w > pw {
                return Err(layer_err(format!(
                    "kernel {kernel_h}x{kernel_w} larger than padded input {ph}x{pw}"
                )));
            }
            Ok(ActShape::Spatial {
                channels: *out_channels,
                height: (ph - kernel_h) / stride + 1,
                width: (pw - kernel_w) / stride + 1,
            })
        }
        Layer::Relu => Ok(prev),
        Layer::MaxPool { window, stride } => {
            let ActShape::Spatial { channels, height, width } = prev else {
                return Err(mismatch("maxpool requires a spatial input".into()));
            };
            if *window == 0 || *stride == 0 {
                return Err(layer_err("maxpool window and stride must be positive".into()));
            }
            if *window > height || *window > width {
                return Err(layer_err(format!("pool window {window} larger than input {height}x{width}")));
            }
            Ok(ActShape::Spatial {
                channels,
                height: (height - window) / stride + 1,
                width: (width - window) / stride + 1,
            })
        }
        Layer::GlobalAvgPool => match prev {
            ActShape::Spatial { channels, .. } => Ok(ActShape::Flat(channels)),
            ActShape::Flat(_) => Err(mismatch("gap requires a spatial input".into())),
        },
        Layer::Dense { out_features, in_features, weights, bias } => {
            if *out_features == 0 {
                return Err(layer_err("fc must have at least one output".into()));
            }
            if *in_features != prev.numel() {
                return Err(mismatch(format!(
                    "previous layer produces {} values, fc expects {in_features}",
                    prev.numel()
                )));
            }
            if weights.len() != out_features * in_features || bias.len() != *out_features {
                return Err(layer_err("fc weight or bias length does not match its shape".into()));
            }
            if weights.iter().chain(bias).any(|v| !v.is_finite()) {
                return Err(layer_err("non-finite fc weight".into()));
            }
            Ok(ActShape::Flat(*out_features))
        }
    }
}

/// Applies one layer; shapes were validated when the spec was built.
fn apply(layer: &Layer, x: &Tensor) -> Tensor {
    match layer {
        Layer::Conv { out_channels, in_channels, kernel_h, kernel_w, stride, padding, weights, bias } => conv2d(
            x,
            ConvParams {
                out_channels: *out_channels,
                in_channels: *in_channels,
                kernel_h: *kernel_h,
                kernel_w: *kernel_w,
                stride: *stride,
                padding: *padding,
            },
            weights,
            bias,
        ),
        Layer::Relu => Tensor { data: x.data.iter().map(|&v| v.max(0.0)).collect(), ..x.clone() },
        Layer::MaxPool { window, stride } => max_pool(x, *window, *stride),
        Layer::GlobalAvgPool => {
            let plane = (x.height * x.width) as f64;
            let data = (0..x.channels).map(|c| x.channel(c).iter().sum::<f64>() / plane).collect();
            Tensor { channels: x.channels, height: 1, width: 1, data }
        }
        Layer::Dense { out_features, in_features, weights, bias } => {
            let data = weights
                .chunks_exact(*in_features)
                .zip(bias)
                .map(|(row, &b)| b + row.iter().zip(&x.data).map(|(w, v)| w * v).sum::<f64>())
                .collect();
            Tensor { channels: *out_features, height: 1, width: 1, data }
        }
    }
}

#[derive(Clone, Copy)]
struct ConvParams {
    out_channels: usize,
    in_channels: usize,
    kernel_h: usize,
    kernel_w: usize,
    stride: usize,
    padding: usize,
}

/// Range of output indices `o` for which `o*stride + k - padding` lands in
/// `[0, len)`.
fn valid_outputs(out_len: usize, len: usize, k: usize, stride: usize, padding: usize) -> std::ops::Range<usize> {
    // o*stride + k >= padding
    let lo = if k >= padding { 0 } else { (padding - k).div_ceil(stride) };
    // o*stride + k - padding <= len - 1
    let hi = if len + padding > k { ((len + padding - 1 - k) / stride + 1).min(out_len) } else { 0 };
    lo.min(hi)..hi
}

/// Shift-and-accumulate convolution: for every kernel tap the contribution is
/// added across the whole output plane at once.
fn conv2d(x: &Tensor, p: ConvParams, weights: &[f64], bias: &[f64]) -> Tensor {
    let out_h = (x.height + 2 * p.padding - p.kernel_h) / p.stride + 1;
    let out_w = (x.width + 2 * p.padding - p.kernel_w) / p.stride + 1;
    let plane = out_h * out_w;
    let mut data = vec![0.0; p.out_channels * plane];
    let taps = p.kernel_h * p.kernel_w;
    for (o, out) in data.chunks_exact_mut(plane).enumerate() {
        out.fill(bias[o]);
        for c in 0..p.in_channels {
            let input = x.channel(c);
            let kernel = &weights[(o * p.in_channels + c) * taps..][..taps];
            for ky in 0..p.kernel_h {
                let rows = valid_outputs(out_h, x.height, ky, p.stride, p.padding);
                for kx in 0..p.kernel_w {
                    let wgt = kernel[ky * p.kernel_w + kx];
                    if wgt == 0.0 {
                        continue;
                    }
                    let cols = valid_outputs(out_w, x.width, kx, p.stride, p.padding);
                    for oy in rows.clone() {
                        let iy = oy * p.stride + ky - p.padding;
                        let in_row = &input[iy * x.width..][..x.width];
                        let out_row = &mut out[oy * out_w..][..out_w];
                        for ox in cols.clone() {
                            out_row[ox] += wgt * in_row[ox * p.stride + kx - p.padding];
                        }
                    }
                }
            }
        }
    }
    Tensor { channels: p.out_channels, height: out_h, width: out_w, data }
}

fn max_pool(x: &Tensor, window: usize, stride: usize) -> Tensor {
    let out_h = (x.height - window) / stride + 1;
    let out_w = (x.width - window) / stride + 1;
    let mut data = Vec::with_capacity(x.channels * out_h * out_w);
    for c in 0..x.channels {
        let input = x.channel(c);
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..window {
                    let row = &input[(oy * stride + ky) * x.width + ox * stride..][..window];
                    best = row.iter().copied().fold(best, f64::max);
                }
                data.push(best);
            }
        }
    }
    Tensor { channels: x.channels, height: out_h, width: out_w, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(out: usize, inp: usize, k: usize, stride: usize, padding: usize, w: f64) -> Layer {
        Layer::Conv {
            out_channels: out,
            in_channels: inp,
            kernel_h: k,
            kernel_w: k,
            stride,
            padding,
            weights: vec![w; out * inp * k * k],
            bias: vec![0.0; out],
        }
    }

    #[test]
    fn identity_1x1_conv_on_constant_image() {
        let layers = vec![
            Layer::Conv {
                out_channels: 1,
                in_channels: 3,
                kernel_h: 1,
                kernel_w: 1,
                stride: 1,
                padding: 0,
                weights: vec![1.0 / 3.0; 3],
                bias: vec![0.0],
            },
            Layer::GlobalAvgPool,
        ];
        let spec = ToyModelSpec::new((3, 6, 6), layers, 0).unwrap();
        let img = Tensor { channels: 3, height: 6, width: 6, data: vec![0.6; 108] };
        let out = spec.forward(&img).unwrap();
        assert_eq!(out.target_activations.len(), 1);
        let g = &out.target_activations[0];
        assert!(g.values().iter().all(|&v| (v - 0.6).abs() < 1e-15));
        assert_eq!(out.embedding.len(), spec.embedding_dim());
    }

    #[test]
    fn zero_weights_give_zero_embedding() {
        let layers = vec![
            conv(4, 3, 3, 1, 1, 0.0),
            Layer::Relu,
            Layer::GlobalAvgPool,
            Layer::Dense { out_features: 5, in_features: 4, weights: vec![0.0; 20], bias: vec![0.0; 5] },
        ];
        let spec = ToyModelSpec::new((3, 8, 8), layers, 1).unwrap();
        let img = Tensor { channels: 3, height: 8, width: 8, data: vec![0.9; 192] };
        let out = spec.forward(&img).unwrap();
        assert_eq!(out.embedding, vec![0.0; 5]);
    }

    #[test]
    fn conv_to_fc_mismatch_names_both_layers() {
        let layers = vec![
            conv(4, 3, 3, 1, 0, 0.1),
            Layer::Dense { out_features: 2, in_features: 5, weights: vec![0.0; 10], bias: vec![0.0; 2] },
        ];
        let err = ToyModelSpec::new((3, 4, 4), layers, 0).unwrap_err();
        assert!(matches!(err, Error::LayerMismatch { from: 0, to: 1, .. }), "{err}");
    }

    #[test]
    fn channel_mismatch_between_convs() {
        let layers = vec![conv(4, 3, 3, 1, 1, 0.1), conv(2, 5, 3, 1, 1, 0.1), Layer::GlobalAvgPool];
        let err = ToyModelSpec::new((3, 8, 8), layers, 1).unwrap_err();
        assert!(matches!(err, Error::LayerMismatch { from: 0, to: 1, .. }));
    }

    #[test]
    fn target_must_be_spatial() {
        let layers = vec![conv(2, 3, 1, 1, 0, 0.1), Layer::GlobalAvgPool];
        let err = ToyModelSpec::new((3, 4, 4), layers, 1).unwrap_err();
        assert!(matches!(err, Error::ModelLayer { layer: 1, .. }));
    }

    #[test]
    fn shapes_follow_stride_and_pool() {
        let layers = vec![
            conv(2, 3, 3, 2, 1, 0.1),
            Layer::MaxPool { window: 2, stride: 2 },
            Layer::GlobalAvgPool,
        ];
        let spec = ToyModelSpec::new((3, 9, 9), layers, 1).unwrap();
        assert_eq!(spec.layer_shapes()[0], ActShape::Spatial { channels: 2, height: 5, width: 5 });
        assert_eq!(spec.layer_shapes()[1], ActShape::Spatial { channels: 2, height: 2, width: 2 });
        assert_eq!(spec.embedding_dim(), 2);
    }

    #[test]
    fn rejects_wrong_image_shape() {
        let spec = ToyModelSpec::new((3, 4, 4), vec![Layer::GlobalAvgPool], 0);
        assert!(spec.is_err(), "gap output is not spatial");
        let spec = ToyModelSpec::new((3, 4, 4), vec![Layer::Relu, Layer::GlobalAvgPool], 0).unwrap();
        let img = Tensor::zeros(3, 5, 4);
        assert!(matches!(spec.forward(&img), Err(Error::Shape(_))));
    }

    #[test]
    fn valid_output_ranges() {
        // len 4, kernel tap 0, pad 1, stride 1, out 4: o - 1 >= 0 => o >= 1
        assert_eq!(valid_outputs(4, 4, 0, 1, 1), 1..4);
        assert_eq!(valid_outputs(4, 4, 2, 1, 1), 0..3);
        assert_eq!(valid_outputs(2, 4, 0, 2, 0), 0..2);
    }
}
