//! Texture rendering as a sparse linear map from texels to pixels, so the
//! forward pass and its transpose share one precomputed footprint.

use crate::camera::Camera;
use crate::image_buf::{ColorImage, Mask, Rgb, WHITE};
use crate::mesh::TriangleMesh;
use crate::raster::{rasterize, ViewBuffers};
use crate::texture::TextureMap;

/// Pixel rectangle `[x0, x0 + width) × [y0, y0 + height)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            width,
            height,
        }
    }

    /// Bounding box of the set pixels, grown so the origin is a multiple of
    /// `align`. Empty masks give an empty rectangle.
    pub fn covering(mask: &Mask, align: usize) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..mask.height {
            for x in 0..mask.width {
                if mask.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        if x0 == usize::MAX {
            return Self {
                x0: 0,
                y0: 0,
                width: 0,
                height: 0,
            };
        }
        let align = align.max(1);
        let (x0, y0) = (x0 / align * align, y0 / align * align);
        Self {
            x0,
            y0,
            width: x1 - x0,
            height: y1 - y0,
        }
    }

    pub fn crop_image(&self, img: &ColorImage) -> ColorImage {
        ColorImage::from_fn(self.width, self.height, |x, y| img.get(self.x0 + x, self.y0 + y))
    }

    pub fn crop_mask(&self, mask: &Mask) -> Mask {
        Mask::from_fn(self.width, self.height, |x, y| mask.get(self.x0 + x, self.y0 + y))
    }
}

/// For every covered pixel of a view, the four texels its bilinear lookup
/// reads and their weights.
#[derive(Clone, Debug)]
pub struct Footprint {
    pub rect: Rect,
    pub texture_width: usize,
    pub texture_height: usize,
    /// Pixel index inside `rect`.
    pub pixels: Vec<usize>,
    pub taps: Vec<[(usize, f64); 4]>,
}

impl Footprint {
    pub fn new(buffers: &ViewBuffers, rect: Rect, texture_width: usize, texture_height: usize) -> Self {
        let probe = TextureMap::new(texture_width, texture_height, WHITE);
        let mut pixels = Vec::new();
        let mut taps = Vec::new();
        for y in 0..rect.height {
            for x in 0..rect.width {
                let idx = (rect.y0 + y) * buffers.width + rect.x0 + x;
                if buffers.covered(idx) {
                    pixels.push(y * rect.width + x);
                    taps.push(probe.taps(buffers.uv[idx]));
                }
            }
        }
        Self {
            rect,
            texture_width,
            texture_height,
            pixels,
            taps,
        }
    }

    pub fn full(buffers: &ViewBuffers, texture_width: usize, texture_height: usize) -> Self {
        Self::new(
            buffers,
            Rect::full(buffers.width, buffers.height),
            texture_width,
            texture_height,
        )
    }

    /// Renders into the footprint's rectangle; uncovered pixels are white.
    pub fn render(&self, texture: &TextureMap) -> ColorImage {
        debug_assert_eq!(
            (texture.width, texture.height),
            (self.texture_width, self.texture_height)
        );
        let mut out = ColorImage::new(self.rect.width, self.rect.height, WHITE);
        for (&p, taps) in self.pixels.iter().zip(&self.taps) {
            let mut c = [0.0; 3];
            for &(t, w) in taps {
                let texel = texture.texels[t];
                for k in 0..3 {
                    c[k] += w * texel[k];
                }
            }
            out.pixels[p] = c;
        }
        out
    }

    /// Adds the transpose of [`Footprint::render`] applied to `upstream`
    /// (one gradient per rectangle pixel) into `grad`.
    pub fn scatter(&self, upstream: &[Rgb], grad: &mut [Rgb]) {
        for (&p, taps) in self.pixels.iter().zip(&self.taps) {
            let g = upstream[p];
            if g == [0.0; 3] {
                continue;
            }
            for &(t, w) in taps {
                for k in 0..3 {
                    grad[t][k] += w * g[k];
                }
            }
        }
    }

    /// Adds each texel's total bilinear weight into `acc`.
    pub fn accumulate_weights(&self, acc: &mut [f64]) {
        for taps in &self.taps {
            for &(t, w) in taps {
                acc[t] += w;
            }
        }
    }
}

/// Renders `texture` and pulls `upstream` (per image pixel) back to texels.
pub fn render_with_gradient(
    mesh: &TriangleMesh,
    texture: &TextureMap,
    camera: &Camera,
    upstream: &ColorImage,
) -> (ColorImage, Vec<Rgb>) {
    let buffers = rasterize(mesh, camera);
    assert_eq!(
        upstream.dims(),
        (buffers.width, buffers.height),
        "upstream gradient must match the image size"
    );
    let footprint = Footprint::full(&buffers, texture.width, texture.height);
    let image = footprint.render(texture);
    let mut grad = vec![[0.0; 3]; texture.texels.len()];
    footprint.scatter(&upstream.pixels, &mut grad);
    (image, grad)
}
