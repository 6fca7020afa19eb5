//! Float image containers shared by rendering, aggregation, fusion and metrics.
//!
//! Colors are linear `[0, 1]` RGB stored as `f64`; 8-bit PNG is only the
//! exchange format. Pixel `(x, y)` has its center at `(x + 0.5, y + 0.5)` in
//! continuous image coordinates, with `y` pointing down.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

pub const WHITE: Rgb = [1.0, 1.0, 1.0];

/// Bilinear taps with clamp-to-edge addressing.
///
/// `x`, `y` are in texel-index space (texel centers at integer coordinates).
/// Returns four `(linear index, weight)` pairs whose weights sum to 1.
#[inline]
pub fn bilinear_taps(x: f64, y: f64, width: usize, height: usize) -> [(usize, f64); 4] {
    let max_x = (width - 1) as f64;
    let max_y = (height - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    [
        (y0 * width + x0, (1.0 - fx) * (1.0 - fy)),
        (y0 * width + x1, fx * (1.0 - fy)),
        (y1 * width + x0, (1.0 - fx) * fy),
        (y1 * width + x1, fx * fy),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Rgb) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Bilinear sample at continuous image coordinates (pixel centers at `i + 0.5`).
    pub fn sample_bilinear(&self, px: f64, py: f64) -> Rgb {
        let taps = bilinear_taps(px - 0.5, py - 0.5, self.width, self.height);
        let mut out = [0.0; 3];
        for (idx, w) in taps {
            let c = self.pixels[idx];
            for k in 0..3 {
                out[k] += w * c[k];
            }
        }
        out
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let pixels = img
            .pixels()
            .map(|p| [p.0[0] as f64 / 255.0, p.0[1] as f64 / 255.0, p.0[2] as f64 / 255.0])
            .collect();
        Self {
            width: w as usize,
            height: h as usize,
            pixels,
        }
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let mut out = image::RgbImage::new(self.width as u32, self.height as u32);
        for (dst, src) in out.pixels_mut().zip(&self.pixels) {
            dst.0 = [quantize(src[0]), quantize(src[1]), quantize(src[2])];
        }
        out
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Ok(Self::from_rgb8(&load_rgb8(path)?))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_png(&self.to_rgb8(), path)
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn load_rgb8(path: &Path) -> Result<image::RgbImage> {
    let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    Ok(img.to_rgb8())
}

pub fn load_gray8(path: &Path) -> Result<image::GrayImage> {
    let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    Ok(img.to_luma8())
}

pub fn save_png<P, C>(img: &image::ImageBuffer<P, C>, path: &Path) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

pub fn encode_png<P, C>(img: &image::ImageBuffer<P, C>) -> Result<Vec<u8>>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(buf.into_inner())
}

/// Binary per-pixel mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, fill: bool) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// 255 where set, 0 elsewhere.
    pub fn to_gray8(&self) -> image::GrayImage {
        let mut out = image::GrayImage::new(self.width as u32, self.height as u32);
        for (dst, &src) in out.pixels_mut().zip(&self.data) {
            dst.0 = [if src { 255 } else { 0 }];
        }
        out
    }

    /// Pixels at or above mid-gray count as set.
    pub fn from_gray8(img: &image::GrayImage) -> Self {
        let (w, h) = img.dimensions();
        Self {
            width: w as usize,
            height: h as usize,
            data: img.pixels().map(|p| p.0[0] >= 128).collect(),
        }
    }
}

/// Real-valued per-pixel field, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, fill: f64) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Rescales to 8-bit grayscale by the field maximum (all-zero fields stay black).
    pub fn to_gray8_normalized(&self) -> image::GrayImage {
        let max = self.data.iter().cloned().fold(0.0f64, f64::max);
        let mut out = image::GrayImage::new(self.width as u32, self.height as u32);
        for (dst, &v) in out.pixels_mut().zip(&self.data) {
            dst.0 = [if max > 0.0 { quantize(v / max) } else { 0 }];
        }
        out
    }
}

pub const FLOAT_DUMP_MAGIC: &[u8; 4] = b"TFD1";

/// Writes `data` as magic, width, height, channel count (all `u32` LE), then
/// row-major little-endian `f32` samples.
pub fn write_float_dump(path: &Path, width: usize, height: usize, channels: usize, data: &[f64]) -> Result<()> {
    if data.len() != width * height * channels {
        return Err(Error::DimensionMismatch(format!(
            "float dump expects {} samples, got {}",
            width * height * channels,
            data.len()
        )));
    }
    let mut buf = Vec::with_capacity(16 + data.len() * 4);
    buf.extend_from_slice(FLOAT_DUMP_MAGIC);
    for v in [width, height, channels] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Returns `(width, height, channels, samples)`.
pub fn read_float_dump(path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != FLOAT_DUMP_MAGIC {
        return Err(Error::Serialization(format!("{}: not a float dump", path.display())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (w, h, c) = (word(0), word(1), word(2));
    let body = &bytes[16..];
    if body.len() != w * h * c * 4 {
        return Err(Error::Serialization(format!(
            "{}: truncated float dump",
            path.display()
        )));
    }
    let samples = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((w, h, c, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_at_texel_center_is_identity() {
        let img = ColorImage::from_fn(4, 3, |x, y| [x as f64 / 3.0, y as f64 / 2.0, 0.25]);
        for y in 0..3 {
            for x in 0..4 {
                let s = img.sample_bilinear(x as f64 + 0.5, y as f64 + 0.5);
                assert_eq!(s, img.get(x, y));
            }
        }
    }

    #[test]
    fn bilinear_clamps_to_edge() {
        let img = ColorImage::from_fn(2, 2, |x, _| [x as f64, 0.0, 0.0]);
        assert_eq!(img.sample_bilinear(-10.0, 0.5)[0], 0.0);
        assert_eq!(img.sample_bilinear(10.0, 0.5)[0], 1.0);
        assert!((img.sample_bilinear(1.0, 0.5)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn float_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let data: Vec<f64> = (0..24).map(|i| i as f64 * 0.5).collect();
        write_float_dump(&path, 4, 3, 2, &data).unwrap();
        let (w, h, c, s) = read_float_dump(&path).unwrap();
        assert_eq!((w, h, c), (4, 3, 2));
        assert_eq!(s[5], 2.5);
    }

    #[test]
    fn quantize_rounds_and_clamps() {
        assert_eq!(quantize(-0.1), 0);
        assert_eq!(quantize(1.2), 255);
        assert_eq!(quantize(0.5), 128);
    }
}
