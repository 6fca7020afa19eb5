//! JSON payloads of the inpainting HTTP protocol. Images travel as
//! base64-encoded PNG.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use super::{BackViewRequest, BackendError, DepthImage, InpaintRequest, InpaintResponse};
use crate::image_buf::encode_png;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InpaintPayload {
    pub image: String,
    pub known_mask: String,
    pub normal: String,
    pub silhouette: String,
    pub prompt: String,
    #[serde(default)]
    pub negative_prompt: String,
    pub seed: u64,
    pub guidance_scale: f64,
    pub steps: u32,
    pub azimuth: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InpaintReply {
    pub image: String,
    pub backend_id: String,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackViewPayload {
    pub input_image: String,
    pub normal: String,
    pub depth: String,
    pub silhouette: String,
    pub prompt: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BackViewReply {
    pub image: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HealthReply {
    pub status: String,
    pub model: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: String,
}

fn encode<P, C>(img: &image::ImageBuffer<P, C>) -> String
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    // In-memory PNG encoding of a well-formed buffer cannot fail.
    STANDARD.encode(encode_png(img).expect("in-memory PNG encoding"))
}

fn decode_dynamic(field: &str, data: &str) -> Result<image::DynamicImage, BackendError> {
    let bytes = STANDARD
        .decode(data.trim())
        .map_err(|e| BackendError::MalformedPayload(format!("{field}: bad base64: {e}")))?;
    image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| BackendError::MalformedPayload(format!("{field}: bad PNG: {e}")))
}

pub fn encode_rgb(img: &RgbImage) -> String {
    encode(img)
}

pub fn encode_gray(img: &GrayImage) -> String {
    encode(img)
}

pub fn encode_depth(img: &DepthImage) -> String {
    encode(img)
}

pub fn decode_rgb(field: &str, data: &str) -> Result<RgbImage, BackendError> {
    Ok(decode_dynamic(field, data)?.to_rgb8())
}

pub fn decode_gray(field: &str, data: &str) -> Result<GrayImage, BackendError> {
    Ok(decode_dynamic(field, data)?.to_luma8())
}

pub fn decode_depth(field: &str, data: &str) -> Result<DepthImage, BackendError> {
    Ok(decode_dynamic(field, data)?.to_luma16())
}

impl InpaintPayload {
    pub fn from_request(r: &InpaintRequest) -> Self {
        Self {
            image: encode_rgb(&r.blended),
            known_mask: encode_gray(&r.known_mask),
            normal: encode_rgb(&r.normal_map),
            silhouette: encode_gray(&r.silhouette),
            prompt: r.prompt.clone(),
            negative_prompt: r.negative_prompt.clone(),
            seed: r.seed,
            guidance_scale: r.guidance_scale,
            steps: r.steps,
            azimuth: r.view_azimuth,
        }
    }

    pub fn into_request(self) -> Result<InpaintRequest, BackendError> {
        Ok(InpaintRequest {
            blended: decode_rgb("image", &self.image)?,
            known_mask: decode_gray("known_mask", &self.known_mask)?,
            normal_map: decode_rgb("normal", &self.normal)?,
            silhouette: decode_gray("silhouette", &self.silhouette)?,
            prompt: self.prompt,
            negative_prompt: self.negative_prompt,
            seed: self.seed,
            guidance_scale: self.guidance_scale,
            steps: self.steps,
            view_azimuth: self.azimuth,
        })
    }
}

impl InpaintReply {
    pub fn from_response(r: &InpaintResponse) -> Self {
        Self {
            image: encode_rgb(&r.image),
            backend_id: r.backend_id.clone(),
            elapsed_ms: r.elapsed_ms,
        }
    }

    pub fn into_response(self) -> Result<InpaintResponse, BackendError> {
        Ok(InpaintResponse {
            image: decode_rgb("image", &self.image)?,
            backend_id: self.backend_id,
            elapsed_ms: self.elapsed_ms,
        })
    }
}

impl BackViewPayload {
    pub fn from_request(r: &BackViewRequest) -> Self {
        Self {
            input_image: encode_rgb(&r.input_image),
            normal: encode_rgb(&r.normal),
            depth: encode_depth(&r.depth),
            silhouette: encode_gray(&r.silhouette),
            prompt: r.prompt.clone(),
            seed: r.seed,
        }
    }

    pub fn into_request(self) -> Result<BackViewRequest, BackendError> {
        Ok(BackViewRequest {
            input_image: decode_rgb("input_image", &self.input_image)?,
            normal: decode_rgb("normal", &self.normal)?,
            depth: decode_depth("depth", &self.depth)?,
            silhouette: decode_gray("silhouette", &self.silhouette)?,
            prompt: self.prompt,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Luma, Rgb};

    #[test]
    fn inpaint_payload_round_trip() {
        let mut req = crate::inpaint::tests::request(5, 3);
        req.blended.put_pixel(1, 1, Rgb([1, 2, 3]));
        req.known_mask.put_pixel(0, 0, Luma([0]));
        let json = serde_json::to_string(&InpaintPayload::from_request(&req)).unwrap();
        let back: InpaintPayload = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_request().unwrap(), req);
    }

    #[test]
    fn depth_keeps_sixteen_bits() {
        let depth = DepthImage::from_fn(4, 4, |x, y| Luma([(x * 1000 + y * 7 + 40000) as u16]));
        let back = decode_depth("depth", &encode_depth(&depth)).unwrap();
        assert_eq!(back, depth);
    }

    #[test]
    fn missing_field_rejected() {
        let err = serde_json::from_str::<BackViewPayload>(
            r#"{"input_image":"","normal":"","silhouette":"","prompt":"","seed":1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("depth"));
    }

    #[test]
    fn garbage_image_is_malformed() {
        assert!(matches!(
            decode_rgb("image", "not base64!"),
            Err(BackendError::MalformedPayload(_))
        ));
        let not_png = STANDARD.encode(b"hello");
        assert!(matches!(
            decode_rgb("image", &not_png),
            Err(BackendError::MalformedPayload(_))
        ));
    }
}
