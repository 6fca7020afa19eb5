use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use image::{GrayImage, RgbImage};
use serde::Serialize;

use super::prompt::normalize_azimuth;
use super::{BackViewRequest, BackendError, InpaintBackend, InpaintRequest, InpaintResponse};
use crate::error::Error;
use crate::image_buf::load_rgb8;

/// Azimuth key with millidegree resolution.
fn azimuth_key(azimuth: f64) -> i64 {
    (normalize_azimuth(azimuth) * 1000.0).round() as i64
}

/// Answers every request with a pre-rendered ground-truth view, composited
/// under the request's known region.
pub struct OracleBackend {
    views: BTreeMap<i64, RgbImage>,
}

impl OracleBackend {
    pub fn new(views: impl IntoIterator<Item = (f64, RgbImage)>) -> Self {
        Self {
            views: views.into_iter().map(|(a, img)| (azimuth_key(a), img)).collect(),
        }
    }

    /// Loads every `view_<azimuth>.png` in `dir`.
    pub fn from_dir(dir: &Path) -> crate::Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut views = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(az) = name
                .strip_prefix("view_")
                .and_then(|r| r.strip_suffix(".png"))
                .and_then(|a| a.parse::<f64>().ok())
            else {
                continue;
            };
            views.push((az, load_rgb8(&path)?));
        }
        if views.is_empty() {
            return Err(Error::Config(format!(
                "{}: no view_<azimuth>.png files for the oracle backend",
                dir.display()
            )));
        }
        Ok(Self::new(views))
    }

    pub fn view(&self, azimuth: f64) -> Result<&RgbImage, BackendError> {
        self.views
            .get(&azimuth_key(azimuth))
            .ok_or(BackendError::MissingView(azimuth))
    }

    pub fn azimuths(&self) -> Vec<f64> {
        self.views.keys().map(|&k| k as f64 / 1000.0).collect()
    }
}

impl InpaintBackend for OracleBackend {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn inpaint(&self, request: &InpaintRequest) -> Result<InpaintResponse, BackendError> {
        let mut image = self.view(request.view_azimuth)?.clone();
        if image.dimensions() == request.dimensions() {
            super::composite_known(request, &mut image);
        }
        Ok(InpaintResponse {
            image,
            backend_id: self.id(),
            elapsed_ms: 0,
        })
    }

    fn back_view(&self, _request: &BackViewRequest) -> Result<RgbImage, BackendError> {
        self.view(180.0).cloned()
    }
}

/// Fills unknown silhouette pixels by Jacobi neighbor averaging from the
/// known ones. Background stays white.
#[derive(Clone, Debug)]
pub struct DiffuseFillBackend {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for DiffuseFillBackend {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1.0 / 255.0,
        }
    }
}

impl DiffuseFillBackend {
    pub fn fill(&self, blended: &RgbImage, known: &GrayImage, silhouette: &GrayImage) -> RgbImage {
        let (w, h) = blended.dimensions();
        let (w, h) = (w as usize, h as usize);
        let is_known: Vec<bool> = known.pixels().map(|p| p.0[0] >= 128).collect();
        let inside: Vec<bool> = silhouette.pixels().map(|p| p.0[0] >= 128).collect();
        let mut color: Vec<[f64; 3]> = blended.pixels().map(|p| p.0.map(|c| c as f64 / 255.0)).collect();

        let mut seed = [0.0; 3];
        let mut n_known = 0usize;
        for i in 0..w * h {
            if is_known[i] && inside[i] {
                for k in 0..3 {
                    seed[k] += color[i][k];
                }
                n_known += 1;
            }
        }
        let seed = if n_known > 0 {
            seed.map(|s| s / n_known as f64)
        } else {
            [1.0; 3]
        };
        let unknown: Vec<usize> = (0..w * h).filter(|&i| inside[i] && !is_known[i]).collect();
        for &i in &unknown {
            color[i] = seed;
        }
        for i in 0..w * h {
            if !inside[i] && !is_known[i] {
                color[i] = [1.0; 3];
            }
        }

        let mut next = color.clone();
        for _ in 0..self.max_iterations {
            let mut max_change = 0.0f64;
            for &i in &unknown {
                let (x, y) = (i % w, i / w);
                let mut acc = [0.0; 3];
                let mut n = 0;
                let mut visit = |j: usize| {
                    if inside[j] {
                        for k in 0..3 {
                            acc[k] += color[j][k];
                        }
                        n += 1;
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
                if n > 0 {
                    let v = acc.map(|a| a / n as f64);
                    for k in 0..3 {
                        max_change = max_change.max((v[k] - color[i][k]).abs());
                    }
                    next[i] = v;
                }
            }
            for &i in &unknown {
                color[i] = next[i];
            }
            if max_change < self.tolerance {
                break;
            }
        }
        let mut out = RgbImage::new(w as u32, h as u32);
        for (p, c) in out.pixels_mut().zip(&color) {
            p.0 = c.map(crate::image_buf::quantize);
        }
        out
    }
}

impl InpaintBackend for DiffuseFillBackend {
    fn id(&self) -> String {
        "diffuse-fill".into()
    }

    fn inpaint(&self, request: &InpaintRequest) -> Result<InpaintResponse, BackendError> {
        request.validate()?;
        Ok(InpaintResponse {
            image: self.fill(&request.blended, &request.known_mask, &request.silhouette),
            backend_id: self.id(),
            elapsed_ms: 0,
        })
    }

    /// Flat back view in the mean foreground color of the input image.
    fn back_view(&self, request: &BackViewRequest) -> Result<RgbImage, BackendError> {
        let (w, h) = request.silhouette.dimensions();
        if request.input_image.dimensions() != (w, h) {
            return Err(BackendError::InvalidRequest(
                "input image and silhouette differ in size".into(),
            ));
        }
        // Input foreground: anything that is not pure white background.
        let mut acc = [0u64; 3];
        let mut n = 0u64;
        for p in request.input_image.pixels() {
            if p.0 != [255, 255, 255] {
                for k in 0..3 {
                    acc[k] += p.0[k] as u64;
                }
                n += 1;
            }
        }
        let mean = if n > 0 {
            acc.map(|a| ((a as f64) / n as f64).round() as u8)
        } else {
            [128; 3]
        };
        let mut out = RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]));
        for (o, s) in out.pixels_mut().zip(request.silhouette.pixels()) {
            if s.0[0] >= 128 {
                o.0 = mean;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecordedRequest {
    pub endpoint: &'static str,
    pub azimuth: f64,
    pub prompt: String,
    pub seed: u64,
}

/// Wraps a backend and logs every call in order.
pub struct RecordingBackend<B> {
    pub inner: B,
    log: Mutex<Vec<RecordedRequest>>,
}

impl<B> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn log(&self) -> Vec<RecordedRequest> {
        self.log.lock().expect("request log poisoned").clone()
    }
}

impl<B: InpaintBackend> InpaintBackend for RecordingBackend<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn inpaint(&self, request: &InpaintRequest) -> Result<InpaintResponse, BackendError> {
        self.log.lock().expect("request log poisoned").push(RecordedRequest {
            endpoint: "/inpaint",
            azimuth: request.view_azimuth,
            prompt: request.prompt.clone(),
            seed: request.seed,
        });
        self.inner.inpaint(request)
    }

    fn back_view(&self, request: &BackViewRequest) -> Result<RgbImage, BackendError> {
        self.log.lock().expect("request log poisoned").push(RecordedRequest {
            endpoint: "/backview",
            azimuth: 180.0,
            prompt: request.prompt.clone(),
            seed: request.seed,
        });
        self.inner.back_view(request)
    }
}
