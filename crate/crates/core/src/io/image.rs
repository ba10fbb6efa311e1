//! PNG face images.

use std::fs::File;
use std::io::{BufReader, Cursor};
use std::path::Path;

use crate::cam::ImageTensor;
use crate::error::{Error, IoContext, Result};
use crate::grid::FACE_SIZE;

/// Loads an 8-bit RGB PNG of exactly 112×112 pixels, scaled to `[0, 1]`.
pub fn load_face_image(path: &Path) -> Result<ImageTensor> {
    let file = File::open(path).io_context(|| format!("opening {}", path.display()))?;
    let img = decode_rgb8(BufReader::new(file), path)?;
    if (img.width, img.height) != (FACE_SIZE, FACE_SIZE) {
        return Err(Error::Image {
            path: path.to_path_buf(),
            message: format!("expected {FACE_SIZE}x{FACE_SIZE} pixels, got {}x{}", img.width, img.height),
        });
    }
    img.into_tensor()
}

/// Decoded interleaved RGB8 image.
pub struct Rgb8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Rgb8 {
    pub fn into_tensor(self) -> Result<ImageTensor> {
        let hwc: Vec<f64> = self.pixels.iter().map(|&p| p as f64 / 255.0).collect();
        ImageTensor::from_interleaved(self.height, self.width, 3, &hwc)
    }
}

pub fn decode_rgb8<R: std::io::BufRead + std::io::Seek>(reader: R, path: &Path) -> Result<Rgb8> {
    let fail = |message: String| Error::Image { path: path.to_path_buf(), message };
    let decoder = png::Decoder::new(reader);
    let mut reader = decoder.read_info().map_err(|e| fail(format!("not a readable PNG: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(fail(format!(
            "unsupported format {:?}/{:?}, expected 8-bit RGB",
            info.color_type, info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut pixels = vec![0u8; reader.output_buffer_size().ok_or_else(|| fail("image too large".into()))?];
    let frame = reader.next_frame(&mut pixels).map_err(|e| fail(format!("decode failed: {e}")))?;
    pixels.truncate(frame.buffer_size());
    Ok(Rgb8 { width, height, pixels })
}

pub fn decode_rgb8_bytes(bytes: &[u8]) -> Result<Rgb8> {
    decode_rgb8(Cursor::new(bytes), Path::new("<memory>"))
}

/// Encodes interleaved RGB8 pixels as a PNG with no ancillary chunks.
pub fn encode_rgb8_png(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    assert_eq!(pixels.len(), width * height * 3, "pixel buffer size");
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| Error::Render(e.to_string()))?;
        writer.write_image_data(pixels).map_err(|e| Error::Render(e.to_string()))?;
        writer.finish().map_err(|e| Error::Render(e.to_string()))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(dir: &Path, name: &str, w: usize, h: usize, value: u8) -> std::path::PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, encode_rgb8_png(w, h, &vec![value; w * h * 3]).unwrap()).unwrap();
        path
    }

    #[test]
    fn white_and_mid_gray() {
        let dir = tempfile::tempdir().unwrap();
        let img = load_face_image(&write_png(dir.path(), "w.png", 112, 112, 255)).unwrap();
        assert!(img.tensor().data().iter().all(|&v| v == 1.0));
        let img = load_face_image(&write_png(dir.path(), "g.png", 112, 112, 128)).unwrap();
        assert!((img.at(0, 5, 5) - 0.50196).abs() < 1e-5);
        assert_eq!(img.at(2, 111, 0), 128.0 / 255.0);
    }

    #[test]
    fn wrong_size_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_face_image(&write_png(dir.path(), "s.png", 100, 100, 10)).unwrap_err();
        assert!(err.to_string().contains("100x100"), "{err}");
    }

    #[test]
    fn non_png_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        std::fs::write(&p, b"not a png").unwrap();
        assert!(matches!(load_face_image(&p), Err(Error::Image { .. })));
    }
}
