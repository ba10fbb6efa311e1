//! `TMDL` model files.
//!
//! ```text
//! magic        4 bytes  "TMDL"
//! version      u32      1
//! layer_count  u32
//! input_c      u32      input channels
//! input_h      u32
//! input_w      u32
//! target       u32      index of the Score-CAM target layer
//! layers       layer_count records:
//!   tag u8  1=conv 2=relu 3=maxpool 4=gap 5=fc
//!   conv:    u32 out, in, kernel_h, kernel_w, stride, padding;
//!            f32 weights[out*in*kh*kw]; f32 bias[out]
//!   maxpool: u32 window, stride
//!   fc:      u32 out, in; f32 weights[out*in]; f32 bias[out]
//! ```
//!
//! All integers and floats are little-endian; weight tensors are row-major.

use crate::cam::model::{Layer, ToyModelSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TMDL";
pub const VERSION: u32 = 1;

const TAG_CONV: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_MAXPOOL: u8 = 3;
const TAG_GAP: u8 = 4;
const TAG_FC: u8 = 5;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::UnexpectedEof)?;
        let slice = self.bytes.get(self.pos..end).ok_or(Error::UnexpectedEof)?;
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f64>> {
        let n = count.checked_mul(4).ok_or(Error::UnexpectedEof)?;
        let raw = self.take(n)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }
}

/// Parses and validates a `TMDL` model.
pub fn load_model(bytes: &[u8]) -> Result<ToyModelSpec> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::ModelFormat("bad magic, expected TMDL".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let count = r.usize()?;
    let input = (r.usize()?, r.usize()?, r.usize()?);
    let target = r.usize()?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for index in 0..count {
        let layer = match r.u8()? {
            TAG_CONV => {
                let (out_channels, in_channels) = (r.usize()?, r.usize()?);
                let (kernel_h, kernel_w) = (r.usize()?, r.usize()?);
                let (stride, padding) = (r.usize()?, r.usize()?);
                let n = out_channels
                    .checked_mul(in_channels)
                    .and_then(|v| v.checked_mul(kernel_h))
                    .and_then(|v| v.checked_mul(kernel_w))
                    .ok_or_else(|| Error::ModelLayer { layer: index, message: "conv shape overflows".into() })?;
                let weights = r.f32s(n)?;
                let bias = r.f32s(out_channels)?;
                Layer::Conv { out_channels, in_channels, kernel_h, kernel_w, stride, padding, weights, bias }
            }
            TAG_RELU => Layer::Relu,
            TAG_MAXPOOL => Layer::MaxPool { window: r.usize()?, stride: r.usize()? },
            TAG_GAP => Layer::GlobalAvgPool,
            TAG_FC => {
                let (out_features, in_features) = (r.usize()?, r.usize()?);
                let n = out_features
                    .checked_mul(in_features)
                    .ok_or_else(|| Error::ModelLayer { layer: index, message: "fc shape overflows".into() })?;
                let weights = r.f32s(n)?;
                let bias = r.f32s(out_features)?;
                Layer::Dense { out_features, in_features, weights, bias }
            }
            tag => {
                return Err(Error::ModelLayer { layer: index, message: format!("unsupported layer tag {tag}") })
            }
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat(format!("{} trailing bytes after last layer", bytes.len() - r.pos)));
    }
    ToyModelSpec::new(input, layers, target)
}

/// Serializes a model. Weights are narrowed to `f32`.
pub fn write_model(spec: &ToyModelSpec) -> Vec<u8> {
    let mut out = Vec::new();
    let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    let put_f = |out: &mut Vec<u8>, vs: &[f64]| {
        for &v in vs {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    };
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put(&mut out, spec.layers().len());
    let (c, h, w) = spec.input_shape();
    for v in [c, h, w, spec.target_layer()] {
        put(&mut out, v);
    }
    for layer in spec.layers() {
        match layer {
            Layer::Conv { out_channels, in_channels, kernel_h, kernel_w, stride, padding, weights, bias } => {
                out.push(TAG_CONV);
                for v in [*out_channels, *in_channels, *kernel_h, *kernel_w, *stride, *padding] {
                    put(&mut out, v);
                }
                put_f(&mut out, weights);
                put_f(&mut out, bias);
            }
            Layer::Relu => out.push(TAG_RELU),
            Layer::MaxPool { window, stride } => {
                out.push(TAG_MAXPOOL);
                put(&mut out, *window);
                put(&mut out, *stride);
            }
            Layer::GlobalAvgPool => out.push(TAG_GAP),
            Layer::Dense { out_features, in_features, weights, bias } => {
                out.push(TAG_FC);
                put(&mut out, *out_features);
                put(&mut out, *in_features);
                put_f(&mut out, weights);
                put_f(&mut out, bias);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_layer() -> ToyModelSpec {
        let layers = vec![
            Layer::Conv {
                out_channels: 2,
                in_channels: 3,
                kernel_h: 3,
                kernel_w: 3,
                stride: 1,
                padding: 1,
                weights: (0..54).map(|i| (i as f64 - 27.0) / 64.0).collect(),
                bias: vec![0.25, -0.5],
            },
            Layer::Relu,
            Layer::GlobalAvgPool,
        ];
        ToyModelSpec::new((3, 8, 8), layers, 1).unwrap()
    }

    #[test]
    fn round_trip_preserves_f32_exact_weights() {
        let spec = three_layer();
        let bytes = write_model(&spec);
        let back = load_model(&bytes).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.layers().len(), 3);
        assert_eq!(write_model(&back), bytes);
    }

    #[test]
    fn truncated_stream() {
        let bytes = write_model(&three_layer());
        for cut in [0, 3, 10, 30, bytes.len() - 1] {
            let err = load_model(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::UnexpectedEof), "cut {cut}: {err}");
            if cut == bytes.len() - 1 {
                assert_eq!(err.to_string(), "unexpected end of stream");
            }
        }
    }

    #[test]
    fn unsupported_tag_reports_layer() {
        let mut bytes = write_model(&three_layer());
        let relu_tag_pos = bytes.len() - 2;
        bytes[relu_tag_pos] = 9;
        let err = load_model(&bytes).unwrap_err();
        assert!(matches!(err, Error::ModelLayer { layer: 1, .. }), "{err}");
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = write_model(&three_layer());
        bytes[0] = b'X';
        assert!(matches!(load_model(&bytes), Err(Error::ModelFormat(_))));
        let mut bytes = write_model(&three_layer());
        bytes[4] = 2;
        assert!(matches!(load_model(&bytes), Err(Error::ModelFormat(_))));
    }
}
