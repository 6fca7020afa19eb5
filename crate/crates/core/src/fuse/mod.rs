//! Multi-view fusion: fit one UV texture to all accepted views by
//! minimizing `proxy + λ·L1` between differentiable renders and the views,
//! each masked to its silhouette.

mod adam;
mod bake;
mod loss;
mod render;

pub use adam::{Adam, AdamParams};
pub use bake::{bake_initial_texture, texel_samples, TexelSample, UNOBSERVED};
pub use loss::{blur_downsample, effective_levels, l1_loss, mask_pyramid, perceptual_proxy_loss, PyramidTarget};
pub use render::{render_with_gradient, Footprint, Rect};

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{BlendParams, SupportView};
use crate::error::{Error, Result};
use crate::image_buf::{Mask, Rgb};
use crate::mesh::{write_obj, TriangleMesh};
use crate::texture::TextureMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TextureInit {
    #[default]
    Baked,
    Gray,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseConfig {
    pub iterations: usize,
    pub lambda: f64,
    pub adam: AdamParams,
    pub resolution: usize,
    pub proxy_levels: usize,
    pub init: TextureInit,
    /// Write a texture PNG every this many iterations (0 = never).
    pub checkpoint_every: usize,
}

impl Default for FuseConfig {
    fn default() -> Self {
        Self {
            iterations: 400,
            lambda: 10.0,
            adam: AdamParams::default(),
            resolution: 1024,
            proxy_levels: 4,
            init: TextureInit::Baked,
            checkpoint_every: 0,
        }
    }
}

impl FuseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(Error::Config("fuse resolution must be positive".into()));
        }
        if self.proxy_levels == 0 {
            return Err(Error::Config("proxy_levels must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN fails
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config("adam.lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationLoss {
    pub iteration: usize,
    pub per_view: Vec<f64>,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    pub azimuths: Vec<f64>,
    pub entries: Vec<IterationLoss>,
}

impl LossTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration");
        for az in &self.azimuths {
            let _ = write!(out, ",view_{az}");
        }
        out.push_str(",total\n");
        for e in &self.entries {
            let _ = write!(out, "{}", e.iteration);
            for l in &e.per_view {
                let _ = write!(out, ",{l:.9}");
            }
            let _ = writeln!(out, ",{:.9}", e.total);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct FuseOutput {
    pub texture: TextureMap,
    pub trace: LossTrace,
}

/// One view's precomputed share of the objective.
struct ViewTerm {
    footprint: Footprint,
    target: PyramidTarget,
}

impl ViewTerm {
    fn new(view: &SupportView, texture_width: usize, texture_height: usize, proxy_levels: usize) -> Self {
        let (w, h) = (view.buffers.width, view.buffers.height);
        let levels = effective_levels(w, h, proxy_levels);
        let silhouette = view.buffers.silhouette();
        // Aligning the crop to the coarsest level keeps the pyramid identical
        // to the full-frame one on every masked pixel.
        let rect = Rect::covering(&silhouette, 1 << (levels - 1));
        let footprint = Footprint::new(&view.buffers, rect, texture_width, texture_height);
        let target = PyramidTarget::new(&rect.crop_image(&view.image), &rect.crop_mask(&silhouette), levels);
        Self { footprint, target }
    }

    fn evaluate(&self, texture: &TextureMap, lambda: f64) -> (f64, Vec<Rgb>) {
        if self.footprint.pixels.is_empty() {
            return (0.0, Vec::new());
        }
        let rendered = self.footprint.render(texture);
        let (proxy, l1, grad) = self.target.evaluate(&rendered.pixels, lambda);
        (proxy + lambda * l1, grad)
    }
}

/// Texels with nonzero bilinear weight in at least one view.
pub fn observed_texels(views: &[SupportView], width: usize, height: usize) -> Mask {
    let mut acc = vec![0.0; width * height];
    for v in views {
        Footprint::full(&v.buffers, width, height).accumulate_weights(&mut acc);
    }
    Mask {
        width,
        height,
        data: acc.into_iter().map(|w| w > 0.0).collect(),
    }
}

/// Objective value and texel gradient for a fixed texture (used by tests and
/// diagnostics; the optimizer uses the same code path).
pub fn objective(views: &[SupportView], texture: &TextureMap, lambda: f64, proxy_levels: usize) -> (f64, Vec<Rgb>) {
    let terms: Vec<ViewTerm> = views
        .iter()
        .map(|v| ViewTerm::new(v, texture.width, texture.height, proxy_levels))
        .collect();
    let mut grad = vec![[0.0; 3]; texture.texels.len()];
    let mut total = 0.0;
    for t in &terms {
        let (loss, g) = t.evaluate(texture, lambda);
        total += loss;
        if !g.is_empty() {
            t.footprint.scatter(&g, &mut grad);
        }
    }
    (total, grad)
}

/// Fits a texture to the views, starting from the configured initialization.
pub fn optimize_texture(
    mesh: &TriangleMesh,
    views: &[SupportView],
    config: &FuseConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<FuseOutput> {
    if views.is_empty() {
        return Err(Error::NoViews);
    }
    config.validate()?;
    let n = config.resolution;
    let init = match config.init {
        TextureInit::Baked => bake_initial_texture(mesh, views, n, n, &BlendParams::default()),
        TextureInit::Gray => TextureMap::new(n, n, [UNOBSERVED; 3]),
    };
    optimize_from(init, views, config, checkpoint_dir)
}

/// Fits `texture` to the views with Adam; texels stay in `[0, 1]`.
pub fn optimize_from(
    mut texture: TextureMap,
    views: &[SupportView],
    config: &FuseConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<FuseOutput> {
    if views.is_empty() {
        return Err(Error::NoViews);
    }
    config.validate()?;
    let terms: Vec<ViewTerm> = views
        .par_iter()
        .map(|v| ViewTerm::new(v, texture.width, texture.height, config.proxy_levels))
        .collect();
    let mut trace = LossTrace {
        azimuths: views.iter().map(|v| v.camera.azimuth).collect(),
        entries: Vec::with_capacity(config.iterations),
    };
    let mut adam = Adam::new(texture.texels.len() * 3, config.adam);
    let mut grad = vec![[0.0; 3]; texture.texels.len()];
    for iteration in 1..=config.iterations {
        let evaluated: Vec<(f64, Vec<Rgb>)> = terms.par_iter().map(|t| t.evaluate(&texture, config.lambda)).collect();
        grad.iter_mut().for_each(|g| *g = [0.0; 3]);
        // Fixed view order keeps the accumulation deterministic.
        for (t, (_, g)) in terms.iter().zip(&evaluated) {
            if !g.is_empty() {
                t.footprint.scatter(g, &mut grad);
            }
        }
        let per_view: Vec<f64> = evaluated.iter().map(|(l, _)| *l).collect();
        let total: f64 = per_view.iter().sum();
        if !total.is_finite() {
            let count = grad.as_flattened().iter().filter(|g| !g.is_finite()).count();
            return Err(Error::NonFinite { iteration, count });
        }
        trace.entries.push(IterationLoss {
            iteration,
            per_view,
            total,
        });
        adam.update(texture.texels.as_flattened_mut(), grad.as_flattened(), Some((0.0, 1.0)));
        let bad = texture.texels.as_flattened().iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            return Err(Error::NonFinite { iteration, count: bad });
        }
        if let Some(dir) = checkpoint_dir {
            if config.checkpoint_every > 0 && iteration % config.checkpoint_every == 0 {
                texture.save_png(&dir.join(format!("texture_{iteration:05}.png")))?;
            }
        }
    }
    Ok(FuseOutput { texture, trace })
}

/// Writes `mesh.obj`, `mesh.mtl` and `texture.png` into `dir`.
pub fn export_textured_mesh(mesh: &TriangleMesh, texture: &TextureMap, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    texture.save_png(&dir.join("texture.png"))?;
    let mtl = dir.join("mesh.mtl");
    std::fs::write(
        &mtl,
        "newmtl texture\nKa 1.000000 1.000000 1.000000\nKd 1.000000 1.000000 1.000000\nKs 0.000000 0.000000 0.000000\nmap_Kd texture.png\n",
    )
    .map_err(|e| Error::io(&mtl, e))?;
    write_obj(mesh, &dir.join("mesh.obj"), Some(("mesh.mtl", "texture")))
}
