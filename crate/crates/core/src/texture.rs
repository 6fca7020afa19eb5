//! UV texture maps.
//!
//! UV `(0, 0)` is the bottom-left corner of the image and texel `(i, j)` has
//! its center at `((i + 0.5) / W, 1 - (j + 0.5) / H)`, matching how OBJ
//! texture coordinates address a PNG stored top row first.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image_buf::{bilinear_taps, ColorImage, Rgb};
use crate::mesh::Vec2;

#[derive(Clone, Debug, PartialEq)]
pub struct TextureMap {
    pub width: usize,
    pub height: usize,
    pub texels: Vec<Rgb>,
}

impl TextureMap {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Self {
            width,
            height,
            texels: vec![fill; width * height],
        }
    }

    pub fn from_image(img: ColorImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            texels: img.pixels,
        }
    }

    pub fn to_image(&self) -> ColorImage {
        ColorImage {
            width: self.width,
            height: self.height,
            pixels: self.texels.clone(),
        }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let tex = Self::from_image(ColorImage::load_png(path)?);
        if tex.texels.is_empty() {
            return Err(Error::Image(format!("{}: empty texture", path.display())));
        }
        Ok(tex)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image().save_png(path)
    }

    /// Continuous texel-index coordinates of a UV location.
    #[inline]
    pub fn uv_to_texel(&self, uv: Vec2) -> (f64, f64) {
        (uv.x * self.width as f64 - 0.5, (1.0 - uv.y) * self.height as f64 - 0.5)
    }

    #[inline]
    pub fn texel_center_uv(&self, x: usize, y: usize) -> Vec2 {
        Vec2::new(
            (x as f64 + 0.5) / self.width as f64,
            1.0 - (y as f64 + 0.5) / self.height as f64,
        )
    }

    /// Bilinear taps (clamp-to-edge) for a UV location.
    #[inline]
    pub fn taps(&self, uv: Vec2) -> [(usize, f64); 4] {
        let (x, y) = self.uv_to_texel(uv);
        bilinear_taps(x, y, self.width, self.height)
    }

    pub fn sample(&self, uv: Vec2) -> Rgb {
        let mut out = [0.0; 3];
        for (idx, w) in self.taps(uv) {
            let t = self.texels[idx];
            for k in 0..3 {
                out[k] += w * t[k];
            }
        }
        out
    }

    pub fn clamp_unit(&mut self) {
        for t in &mut self.texels {
            for c in t.iter_mut() {
                *c = c.clamp(0.0, 1.0);
            }
        }
    }
}
