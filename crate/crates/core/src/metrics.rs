//! PSNR/SSIM scoring and turntable evaluation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{make_turntable_camera, Camera, RenderSettings};
use crate::error::{Error, Result};
use crate::image_buf::{ColorImage, Mask};
use crate::mesh::TriangleMesh;
use crate::pipeline::azimuth_label;
use crate::raster::{rasterize, shade_textured};
use crate::texture::TextureMap;

/// Reported in place of +∞ for identical images.
pub const PSNR_CAP: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn check_dims(a: &ColorImage, b: &ColorImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Mean squared error over all channels of the masked pixels, `None` when
/// the mask selects nothing.
pub fn mse(a: &ColorImage, b: &ColorImage, mask: Option<&Mask>) -> Result<Option<f64>> {
    check_dims(a, b)?;
    if let Some(m) = mask {
        if (m.width, m.height) != a.dims() {
            return Err(Error::DimensionMismatch("mask does not match image".into()));
        }
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (p, q)) in a.pixels.iter().zip(&b.pixels).enumerate() {
        if mask.is_some_and(|m| !m.data[i]) {
            continue;
        }
        for k in 0..3 {
            let d = p[k] - q[k];
            sum += d * d;
        }
        count += 3;
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// `10·log10(1 / MSE)` on `[0, 1]` intensities, capped at [`PSNR_CAP`]. An
/// empty mask scores the cap (nothing differs).
pub fn psnr(a: &ColorImage, b: &ColorImage, mask: Option<&Mask>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b, mask)?.unwrap_or(0.0)))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

/// Rec. 601 luma.
pub fn luma(img: &ColorImage) -> Vec<f64> {
    img.pixels
        .iter()
        .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
        .collect()
}

pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable valid-mode filtering: output is `(w−k+1) × (h−k+1)`.
fn filter_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut horizontal = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horizontal[y * ow + x] = kernel.iter().zip(&row[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|j| kernel[j] * horizontal[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Per-window SSIM on luma; one value per window fully inside the image,
/// indexed by the window's top-left corner.
pub fn ssim_map(a: &ColorImage, b: &ColorImage) -> Result<(usize, usize, Vec<f64>)> {
    check_dims(a, b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::DimensionMismatch(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let kernel = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let (x, y) = (luma(a), luma(b));
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|f| filter_valid(f, w, h, &kernel));
    let map = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + C1) * (2.0 * cov + C2)) / ((ux * ux + uy * uy + C1) * (vx + vy + C2))
        })
        .collect();
    Ok((w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW, map))
}

/// Mean SSIM over all windows fully inside the image.
pub fn ssim(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    let (_, _, map) = ssim_map(a, b)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// Mean SSIM over windows whose center pixel lies in `mask`; 1 when none do.
pub fn ssim_masked(a: &ColorImage, b: &ColorImage, mask: &Mask) -> Result<f64> {
    let (mw, mh, map) = ssim_map(a, b)?;
    let r = SSIM_WINDOW / 2;
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..mh {
        for x in 0..mw {
            if mask.get(x + r, y + r) {
                sum += map[y * mw + x];
                n += 1;
            }
        }
    }
    Ok(if n == 0 { 1.0 } else { sum / n as f64 })
}

/// Source of reference images for turntable evaluation.
pub trait GroundTruthProvider: Sync {
    fn ground_truth(&self, camera: &Camera) -> Result<ColorImage>;
}

/// Reads `view_<azimuth>.png` files, e.g. `view_4.png`, `view_-90.png`.
#[derive(Clone, Debug)]
pub struct DirectoryGroundTruth {
    pub dir: PathBuf,
}

impl DirectoryGroundTruth {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, azimuth: f64) -> PathBuf {
        self.dir.join(format!("view_{}.png", azimuth_label(azimuth)))
    }
}

impl GroundTruthProvider for DirectoryGroundTruth {
    fn ground_truth(&self, camera: &Camera) -> Result<ColorImage> {
        let path = self.path_for(camera.azimuth);
        if !path.is_file() {
            return Err(Error::MissingGroundTruth(camera.azimuth));
        }
        let img = ColorImage::load_png(&path)?;
        if img.dims() != (camera.width, camera.height) {
            return Err(Error::DimensionMismatch(format!(
                "{} is {}x{}, expected {}x{}",
                path.display(),
                img.width,
                img.height,
                camera.width,
                camera.height
            )));
        }
        Ok(img)
    }
}

/// Renders a reference mesh and texture on demand.
pub struct RenderedGroundTruth<'a> {
    pub mesh: &'a TriangleMesh,
    pub texture: &'a TextureMap,
}

impl GroundTruthProvider for RenderedGroundTruth<'_> {
    fn ground_truth(&self, camera: &Camera) -> Result<ColorImage> {
        Ok(shade_textured(&rasterize(self.mesh, camera), self.texture))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub n_views: usize,
    /// Degrees between consecutive turntable views.
    pub spacing: f64,
    pub image_size: usize,
    /// Score only pixels covered by the mesh instead of the full frame.
    pub masked: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            n_views: 90,
            spacing: 4.0,
            image_size: 512,
            masked: false,
        }
    }
}

impl EvalSettings {
    pub fn azimuths(&self) -> Vec<f64> {
        (0..self.n_views).map(|i| i as f64 * self.spacing).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewScore {
    pub azimuth: f64,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub views: Vec<ViewScore>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Minimum acceptable means; `None` disables a check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub min_psnr: Option<f64>,
    pub min_ssim: Option<f64>,
}

impl EvalReport {
    pub fn from_scores(views: Vec<ViewScore>) -> Self {
        let n = views.len().max(1) as f64;
        let mean_psnr = views.iter().map(|v| v.psnr).sum::<f64>() / n;
        let mean_ssim = views.iter().map(|v| v.ssim).sum::<f64>() / n;
        Self {
            views,
            mean_psnr,
            mean_ssim,
        }
    }

    /// Columns `lpips`, `fid` and `clip_score` are left empty for an external
    /// scorer to fill.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("azimuth,psnr,ssim,lpips,fid,clip_score\n");
        for v in &self.views {
            let _ = writeln!(out, "{},{:.6},{:.6},,,", v.azimuth, v.psnr, v.ssim);
        }
        let _ = writeln!(out, "mean,{:.6},{:.6},,,", self.mean_psnr, self.mean_ssim);
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:>9}  {:>9}  {:>7}\n", "azimuth", "PSNR dB", "SSIM");
        for v in &self.views {
            let _ = writeln!(out, "{:>9}  {:>9.3}  {:>7.4}", v.azimuth, v.psnr, v.ssim);
        }
        let _ = writeln!(out, "{:>9}  {:>9.3}  {:>7.4}", "mean", self.mean_psnr, self.mean_ssim);
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Human-readable descriptions of every violated threshold. A NaN mean
    /// violates any threshold.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn violations(&self, thresholds: &Thresholds) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(min) = thresholds.min_psnr {
            if !(self.mean_psnr >= min) {
                out.push(format!("mean PSNR {:.3} dB below {min} dB", self.mean_psnr));
            }
        }
        if let Some(min) = thresholds.min_ssim {
            if !(self.mean_ssim >= min) {
                out.push(format!("mean SSIM {:.4} below {min}", self.mean_ssim));
            }
        }
        out
    }
}

/// Renders `settings.n_views` turntable views of the textured mesh and
/// scores each against the provider. Views are scored in parallel; the
/// report is ordered by azimuth.
pub fn turntable_eval(
    mesh: &TriangleMesh,
    texture: &TextureMap,
    provider: &dyn GroundTruthProvider,
    settings: &EvalSettings,
) -> Result<EvalReport> {
    let render = RenderSettings::square(settings.image_size);
    let scores: Vec<ViewScore> = settings
        .azimuths()
        .into_par_iter()
        .map(|azimuth| {
            let camera = make_turntable_camera(azimuth, &render);
            let reference = provider.ground_truth(&camera)?;
            let buffers = rasterize(mesh, &camera);
            let rendered = shade_textured(&buffers, texture);
            let (psnr, ssim) = if settings.masked {
                let sil = buffers.silhouette();
                (
                    psnr(&rendered, &reference, Some(&sil))?,
                    ssim_masked(&rendered, &reference, &sil)?,
                )
            } else {
                (psnr(&rendered, &reference, None)?, ssim(&rendered, &reference)?)
            };
            Ok(ViewScore { azimuth, psnr, ssim })
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport::from_scores(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_test_mesh, MeshKind};

    fn image(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> ColorImage {
        ColorImage::from_fn(w, h, |x, y| {
            let v = f(x, y);
            [v, (v * 0.5 + 0.2).min(1.0), 1.0 - v]
        })
    }

    #[test]
    fn identical_images_hit_the_caps() {
        let a = image(20, 16, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
        assert_eq!(psnr(&a, &a, None).unwrap(), PSNR_CAP);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_offset_is_twenty_db() {
        let a = ColorImage::new(8, 8, [0.3, 0.5, 0.2]);
        let b = ColorImage::new(8, 8, [0.4, 0.6, 0.3]);
        assert!((psnr(&a, &b, None).unwrap() - 20.0).abs() < 1e-6);
    }

    #[test]
    fn black_against_white_ssim_is_near_zero() {
        let a = ColorImage::new(16, 16, [0.0; 3]);
        let b = ColorImage::new(16, 16, [1.0; 3]);
        assert!(ssim(&a, &b).unwrap() < 0.01);
    }

    #[test]
    fn masked_psnr_ignores_outside_pixels() {
        let a = ColorImage::new(4, 4, [0.5; 3]);
        let mut b = a.clone();
        b.set(0, 0, [1.0; 3]);
        let mask = Mask::from_fn(4, 4, |x, y| (x, y) != (0, 0));
        assert_eq!(psnr(&a, &b, Some(&mask)).unwrap(), PSNR_CAP);
        assert_eq!(psnr(&a, &b, Some(&Mask::new(4, 4, false))).unwrap(), PSNR_CAP);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = ColorImage::new(4, 4, [0.5; 3]);
        let b = ColorImage::new(4, 5, [0.5; 3]);
        assert!(psnr(&a, &b, None).is_err());
        assert!(ssim(&ColorImage::new(8, 8, [0.0; 3]), &ColorImage::new(8, 8, [0.0; 3])).is_err());
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..5 {
            assert_eq!(k[i], k[10 - i]);
        }
    }

    #[test]
    fn self_eval_is_at_cap_and_has_one_row_per_view() {
        let mesh = generate_test_mesh(MeshKind::UvSphere, 6).unwrap();
        let tex = TextureMap::from_image(image(16, 16, |x, y| ((x + y) % 2) as f64));
        let settings = EvalSettings {
            n_views: 6,
            spacing: 60.0,
            image_size: 32,
            masked: false,
        };
        let provider = RenderedGroundTruth {
            mesh: &mesh,
            texture: &tex,
        };
        let report = turntable_eval(&mesh, &tex, &provider, &settings).unwrap();
        assert_eq!(report.views.len(), 6);
        assert_eq!(
            report.views.iter().map(|v| v.azimuth).collect::<Vec<_>>(),
            vec![0.0, 60.0, 120.0, 180.0, 240.0, 300.0]
        );
        assert!(report
            .views
            .iter()
            .all(|v| v.psnr == PSNR_CAP && (v.ssim - 1.0).abs() < 1e-12));
        assert!(report
            .violations(&Thresholds {
                min_psnr: Some(30.0),
                min_ssim: Some(0.9)
            })
            .is_empty());
        assert_eq!(
            report
                .violations(&Thresholds {
                    min_psnr: Some(200.0),
                    min_ssim: None
                })
                .len(),
            1
        );
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.starts_with("azimuth,psnr,ssim,lpips,fid,clip_score\n"));
    }

    #[test]
    fn perturbed_texture_scores_twenty_db_masked() {
        let mesh = generate_test_mesh(MeshKind::Cube, 1).unwrap();
        let tex = TextureMap::from_image(image(16, 16, |x, y| 0.2 + 0.05 * ((x + y) % 3) as f64));
        let mut shifted = tex.clone();
        for t in &mut shifted.texels {
            for c in t.iter_mut() {
                *c += 0.1;
            }
        }
        let settings = EvalSettings {
            n_views: 4,
            spacing: 90.0,
            image_size: 48,
            masked: true,
        };
        let provider = RenderedGroundTruth {
            mesh: &mesh,
            texture: &tex,
        };
        let report = turntable_eval(&mesh, &shifted, &provider, &settings).unwrap();
        assert!((report.mean_psnr - 20.0).abs() < 1e-6, "{}", report.mean_psnr);
    }

    #[test]
    fn directory_provider_reports_missing_views() {
        let dir = tempfile::tempdir().unwrap();
        let provider = DirectoryGroundTruth::new(dir.path());
        let cam = make_turntable_camera(4.0, &RenderSettings::square(16));
        assert!(matches!(provider.ground_truth(&cam), Err(Error::MissingGroundTruth(a)) if a == 4.0));
        ColorImage::new(16, 16, [0.5; 3])
            .save_png(&provider.path_for(4.0))
            .unwrap();
        assert_eq!(provider.ground_truth(&cam).unwrap().dims(), (16, 16));
    }
}
