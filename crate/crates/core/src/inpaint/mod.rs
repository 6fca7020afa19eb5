//! Shape-guided inpainting boundary.
//!
//! Requests carry the blended view, a known-region mask (255 = keep, 0 =
//! synthesize), and the normal and silhouette guidance images. Any backend
//! (remote diffusion service, ground-truth oracle, neighbor-averaging fill)
//! sits behind [`InpaintBackend`]; [`inpaint`] validates what comes back.

mod backends;
pub mod prompt;
pub mod protocol;
mod remote;
pub mod server;

pub use backends::{DiffuseFillBackend, OracleBackend, RecordedRequest, RecordingBackend};
pub use prompt::{view_prompt, PromptStyle, BACK_INIT_PROMPT};
pub use remote::RemoteBackend;
pub use server::MockServer;

use std::time::Instant;

use image::{GrayImage, ImageBuffer, Luma, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type DepthImage = ImageBuffer<Luma<u16>, Vec<u16>>;

pub const DEFAULT_GUIDANCE_SCALE: f64 = 15.0;
pub const DEFAULT_STEPS: u32 = 25;

/// Largest per-channel deviation (8-bit levels) tolerated on known pixels.
pub const KNOWN_REGION_TOLERANCE: u8 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend timed out after {0} ms")]
    Timeout(u64),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend payload: {0}")]
    MalformedPayload(String),
    #[error("backend returned {got:?} but the request was {expected:?}")]
    SizeMismatch { expected: (u32, u32), got: (u32, u32) },
    #[error("backend altered {pixels} known pixels (max deviation {max_deviation}/255)")]
    KnownRegionViolation { pixels: usize, max_deviation: u8 },
    #[error("no ground-truth view for azimuth {0}")]
    MissingView(f64),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Guidance {
    None,
    Normal,
    Silhouette,
    #[default]
    Both,
}

impl std::str::FromStr for Guidance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Guidance::None),
            "normal" => Ok(Guidance::Normal),
            "silhouette" => Ok(Guidance::Silhouette),
            "both" => Ok(Guidance::Both),
            other => Err(format!("unknown guidance `{other}` (none|normal|silhouette|both)")),
        }
    }
}

impl Guidance {
    pub fn uses_normal(self) -> bool {
        matches!(self, Guidance::Normal | Guidance::Both)
    }

    pub fn uses_silhouette(self) -> bool {
        matches!(self, Guidance::Silhouette | Guidance::Both)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InpaintRequest {
    pub blended: RgbImage,
    pub known_mask: GrayImage,
    pub normal_map: RgbImage,
    pub silhouette: GrayImage,
    pub prompt: String,
    pub negative_prompt: String,
    pub seed: u64,
    pub guidance_scale: f64,
    pub steps: u32,
    pub view_azimuth: f64,
}

impl InpaintRequest {
    pub fn dimensions(&self) -> (u32, u32) {
        self.blended.dimensions()
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let dims = self.dimensions();
        let others = [
            ("known_mask", self.known_mask.dimensions()),
            ("normal", self.normal_map.dimensions()),
            ("silhouette", self.silhouette.dimensions()),
        ];
        for (name, d) in others {
            if d != dims {
                return Err(BackendError::InvalidRequest(format!(
                    "{name} is {d:?} but the image is {dims:?}"
                )));
            }
        }
        if self.steps == 0 {
            return Err(BackendError::InvalidRequest("steps must be positive".into()));
        }
        Ok(())
    }

    /// Blanks the guidance channels an ablation disables: the normal map
    /// becomes uniform background gray, the silhouette all zero.
    pub fn with_guidance(mut self, guidance: Guidance) -> Self {
        if !guidance.uses_normal() {
            self.normal_map.pixels_mut().for_each(|p| p.0 = [128, 128, 128]);
        }
        if !guidance.uses_silhouette() {
            self.silhouette.pixels_mut().for_each(|p| p.0 = [0]);
        }
        self
    }

    pub fn all_known(&self) -> bool {
        self.known_mask.pixels().all(|p| p.0[0] >= 128)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InpaintResponse {
    pub image: RgbImage,
    pub backend_id: String,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackViewRequest {
    pub input_image: RgbImage,
    pub normal: RgbImage,
    /// 16-bit, nearer = brighter, 0 = background.
    pub depth: DepthImage,
    pub silhouette: GrayImage,
    pub prompt: String,
    pub seed: u64,
}

pub trait InpaintBackend: Send + Sync {
    fn id(&self) -> String;

    fn inpaint(&self, request: &InpaintRequest) -> Result<InpaintResponse, BackendError>;

    fn back_view(&self, request: &BackViewRequest) -> Result<RgbImage, BackendError>;
}

impl<B: InpaintBackend + ?Sized> InpaintBackend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn inpaint(&self, request: &InpaintRequest) -> Result<InpaintResponse, BackendError> {
        (**self).inpaint(request)
    }

    fn back_view(&self, request: &BackViewRequest) -> Result<RgbImage, BackendError> {
        (**self).back_view(request)
    }
}

/// What to do when a backend changes pixels it was told to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KnownRegionPolicy {
    /// Reject the response.
    #[default]
    Strict,
    /// Paste the known pixels back over the response.
    Lenient,
}

/// Dispatches to `backend` and enforces the response contract.
pub fn inpaint(
    request: &InpaintRequest,
    backend: &dyn InpaintBackend,
    policy: KnownRegionPolicy,
) -> Result<InpaintResponse, BackendError> {
    request.validate()?;
    let start = Instant::now();
    let mut response = backend.inpaint(request)?;
    let measured = start.elapsed().as_millis() as u64;
    if response.elapsed_ms == 0 {
        response.elapsed_ms = measured;
    }
    let expected = request.dimensions();
    let got = response.image.dimensions();
    if got != expected {
        return Err(BackendError::SizeMismatch { expected, got });
    }
    let (pixels, max_deviation) = known_region_deviation(request, &response.image);
    if pixels > 0 {
        match policy {
            KnownRegionPolicy::Strict => return Err(BackendError::KnownRegionViolation { pixels, max_deviation }),
            KnownRegionPolicy::Lenient => composite_known(request, &mut response.image),
        }
    }
    Ok(response)
}

/// Number of known pixels off by more than the tolerance, and the worst deviation.
pub fn known_region_deviation(request: &InpaintRequest, image: &RgbImage) -> (usize, u8) {
    let mut count = 0;
    let mut worst = 0u8;
    for ((m, a), b) in request
        .known_mask
        .pixels()
        .zip(request.blended.pixels())
        .zip(image.pixels())
    {
        if m.0[0] < 128 {
            continue;
        }
        let dev = (0..3).map(|k| a.0[k].abs_diff(b.0[k])).max().unwrap_or(0);
        if dev > KNOWN_REGION_TOLERANCE {
            count += 1;
            worst = worst.max(dev);
        }
    }
    (count, worst)
}

pub fn composite_known(request: &InpaintRequest, image: &mut RgbImage) {
    for ((m, a), b) in request
        .known_mask
        .pixels()
        .zip(request.blended.pixels())
        .zip(image.pixels_mut())
    {
        if m.0[0] >= 128 {
            *b = *a;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn request(w: u32, h: u32) -> InpaintRequest {
        InpaintRequest {
            blended: RgbImage::from_pixel(w, h, image::Rgb([255, 0, 0])),
            known_mask: GrayImage::from_pixel(w, h, Luma([255])),
            normal_map: RgbImage::from_pixel(w, h, image::Rgb([128, 128, 255])),
            silhouette: GrayImage::from_pixel(w, h, Luma([255])),
            prompt: "p".into(),
            negative_prompt: String::new(),
            seed: 7,
            guidance_scale: DEFAULT_GUIDANCE_SCALE,
            steps: DEFAULT_STEPS,
            view_azimuth: 45.0,
        }
    }

    struct Fixed(RgbImage);

    impl InpaintBackend for Fixed {
        fn id(&self) -> String {
            "fixed".into()
        }
        fn inpaint(&self, _: &InpaintRequest) -> Result<InpaintResponse, BackendError> {
            Ok(InpaintResponse {
                image: self.0.clone(),
                backend_id: self.id(),
                elapsed_ms: 0,
            })
        }
        fn back_view(&self, _: &BackViewRequest) -> Result<RgbImage, BackendError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn strict_rejects_and_lenient_composites() {
        let req = request(4, 4);
        let backend = Fixed(RgbImage::from_pixel(4, 4, image::Rgb([250, 0, 0])));
        let err = inpaint(&req, &backend, KnownRegionPolicy::Strict).unwrap_err();
        assert_eq!(
            err,
            BackendError::KnownRegionViolation {
                pixels: 16,
                max_deviation: 5
            }
        );
        let ok = inpaint(&req, &backend, KnownRegionPolicy::Lenient).unwrap();
        assert_eq!(ok.image, req.blended);
    }

    #[test]
    fn small_drift_is_tolerated() {
        let req = request(4, 4);
        let backend = Fixed(RgbImage::from_pixel(4, 4, image::Rgb([253, 2, 0])));
        assert!(inpaint(&req, &backend, KnownRegionPolicy::Strict).is_ok());
    }

    #[test]
    fn size_mismatch_rejected() {
        let req = request(4, 4);
        let backend = Fixed(RgbImage::new(5, 4));
        assert_eq!(
            inpaint(&req, &backend, KnownRegionPolicy::Lenient).unwrap_err(),
            BackendError::SizeMismatch {
                expected: (4, 4),
                got: (5, 4)
            }
        );
    }

    #[test]
    fn mismatched_request_rejected_before_dispatch() {
        let mut req = request(4, 4);
        req.silhouette = GrayImage::new(3, 3);
        let backend = Fixed(RgbImage::new(4, 4));
        assert!(matches!(
            inpaint(&req, &backend, KnownRegionPolicy::Strict),
            Err(BackendError::InvalidRequest(_))
        ));
    }

    #[test]
    fn guidance_blanking() {
        let req = request(2, 2).with_guidance(Guidance::None);
        assert!(req.normal_map.pixels().all(|p| p.0 == [128, 128, 128]));
        assert!(req.silhouette.pixels().all(|p| p.0 == [0]));
        let req = request(2, 2).with_guidance(Guidance::Both);
        assert!(req.normal_map.pixels().all(|p| p.0 == [128, 128, 255]));
    }
}
