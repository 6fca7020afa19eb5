//! Multi-view visible texture aggregation.
//!
//! Every support view is reprojected into the target view through the shared
//! geometry. For each target pixel, a support view contributes only if the
//! pixel's face is visible in that view and lands inside its image (the
//! visibility mask). Its weight then decays exponentially with the angle
//! between the surface normal seen from the support camera and from the
//! target camera, and grows as a power of the pixel's distance to the edge of
//! the visibility mask. Pixels on a thin ring along that edge are dropped
//! when no other view covers them. Weights are normalized per pixel.
//!
//! Colors are reprojected with a bilinear sample restricted to covered
//! support pixels. Pixels whose total weight is negligible are left unknown
//! for the inpainter.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::distance::distance_transform;
use crate::error::{Error, Result};
use crate::image_buf::{bilinear_taps, ColorImage, Mask, Rgb, ScalarField, WHITE};
use crate::mesh::TriangleMesh;
use crate::raster::{face_membership, rasterize, visible_face_set, ViewBuffers};

/// Division guard inside the angle and the weight normalization.
pub const EPSILON: f64 = 1e-8;

/// Weight sums below this (before adding [`EPSILON`]) are treated as unknown.
pub const MIN_WEIGHT_SUM: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendParams {
    pub alpha: f64,
    pub beta: f64,
    pub boundary_radius: f64,
    /// Keep every per-view map in the result (memory heavy at full size).
    #[serde(skip)]
    pub keep_diagnostics: bool,
}

impl Default for BlendParams {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            beta: 3.0,
            boundary_radius: 2.0,
            keep_diagnostics: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SupportView {
    pub camera: Camera,
    pub image: ColorImage,
    pub buffers: ViewBuffers,
    pub visible_faces: BTreeSet<usize>,
}

impl SupportView {
    pub fn new(mesh: &TriangleMesh, camera: Camera, image: ColorImage) -> Result<Self> {
        Self::from_buffers(camera, image, rasterize(mesh, &camera))
    }

    pub fn from_buffers(camera: Camera, image: ColorImage, buffers: ViewBuffers) -> Result<Self> {
        if image.dims() != (buffers.width, buffers.height) {
            return Err(Error::DimensionMismatch(format!(
                "support image is {}x{} but the view renders at {}x{}",
                image.width, image.height, buffers.width, buffers.height
            )));
        }
        let visible_faces = visible_face_set(&buffers);
        Ok(Self {
            camera,
            image,
            buffers,
            visible_faces,
        })
    }
}

impl SupportView {
    /// Bilinear sample of the view's image using only taps that land on the
    /// surface, renormalized. Keeps background color from bleeding into
    /// silhouette-edge reprojections; falls back to the plain sample when no
    /// tap is covered.
    pub fn sample_surface(&self, px: f64, py: f64) -> Rgb {
        let taps = bilinear_taps(px - 0.5, py - 0.5, self.image.width, self.image.height);
        let mut out = [0.0; 3];
        let mut total = 0.0;
        for (idx, w) in taps {
            if w > 0.0 && self.buffers.covered(idx) {
                let c = self.image.pixels[idx];
                for k in 0..3 {
                    out[k] += w * c[k];
                }
                total += w;
            }
        }
        if total > 0.0 {
            out.map(|v| v / total)
        } else {
            self.image.sample_bilinear(px, py)
        }
    }
}

#[derive(Clone, Debug)]
pub struct ViewDiagnostics {
    pub visibility: Mask,
    pub distance: ScalarField,
    pub angle: ScalarField,
    pub boundary: Mask,
}

#[derive(Clone, Debug)]
pub struct BlendResult {
    pub blended: ColorImage,
    pub known_mask: Mask,
    pub per_view_weights: Vec<ScalarField>,
    pub diagnostics: Option<Vec<ViewDiagnostics>>,
}

pub fn cross_view_visibility(support: &SupportView, target: &ViewBuffers) -> Mask {
    let max_face = target
        .face_id
        .iter()
        .filter(|&&f| f != crate::raster::SENTINEL_EMPTY)
        .map(|&f| f as usize + 1)
        .max()
        .unwrap_or(0);
    let member = face_membership(&support.visible_faces, max_face);
    let rot = support.camera.rotation();
    let data = (0..target.pixel_count())
        .map(|i| {
            if !target.covered(i) || !member[target.face_id[i] as usize] {
                return false;
            }
            let (px, py, _) = support.camera.project_with(&rot, &target.world_pos[i]);
            support.camera.in_bounds(px, py)
        })
        .collect();
    Mask {
        width: target.width,
        height: target.height,
        data,
    }
}

/// Angle between the same world normal seen from the support and the
/// target camera; zero outside `visibility`.
pub fn angular_difference(
    support: &SupportView,
    target: &ViewBuffers,
    target_camera: &Camera,
    visibility: &Mask,
) -> ScalarField {
    let rot_v = support.camera.rotation();
    let rot_c = target_camera.rotation();
    let mut out = ScalarField::new(target.width, target.height, 0.0);
    for (i, o) in out.data.iter_mut().enumerate() {
        if visibility.data[i] {
            let n = target.world_normal[i];
            *o = normal_angle(&(rot_v * n), &(rot_c * n));
        }
    }
    out
}

#[inline]
pub fn normal_angle(a: &crate::mesh::Vec3, b: &crate::mesh::Vec3) -> f64 {
    let cos = a.dot(b) / (a.norm() * b.norm()).max(EPSILON);
    cos.clamp(-1.0, 1.0).acos()
}

pub fn boundary_exclusion(visibility: &[Mask], radius: f64) -> Vec<Mask> {
    let distances: Vec<ScalarField> = visibility.iter().map(distance_transform).collect();
    boundary_exclusion_with(visibility, &distances, radius)
}

/// Per view, clears the pixels that are visible in that view, lie within
/// `radius` of its visibility edge and are covered by no other view. Pixels
/// outside the visibility mask stay set; visibility already zeroes them.
pub fn boundary_exclusion_with(visibility: &[Mask], distances: &[ScalarField], radius: f64) -> Vec<Mask> {
    let Some(first) = visibility.first() else {
        return Vec::new();
    };
    let n = first.data.len();
    let coverage: Vec<u32> = (0..n)
        .map(|i| visibility.iter().filter(|m| m.data[i]).count() as u32)
        .collect();
    visibility
        .iter()
        .zip(distances)
        .map(|(m, d)| Mask {
            width: m.width,
            height: m.height,
            data: (0..n)
                .map(|i| !(m.data[i] && d.data[i] <= radius && coverage[i] == 1))
                .collect(),
        })
        .collect()
}

/// One view's inputs to the weight at a single pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelTerm {
    pub visible: bool,
    pub kept: bool,
    pub angle: f64,
    pub distance: f64,
}

/// Normalized weights at one pixel. Returns `false` (and all-zero weights)
/// when the pixel has too little total weight to count as known.
pub fn pixel_weights(terms: &[PixelTerm], alpha: f64, beta: f64, out: &mut [f64]) -> bool {
    let mut sum = 0.0;
    for (t, o) in terms.iter().zip(out.iter_mut()) {
        *o = if t.visible && t.kept {
            (-alpha * t.angle).exp() * t.distance.powf(beta)
        } else {
            0.0
        };
        sum += *o;
    }
    if sum < MIN_WEIGHT_SUM {
        out.iter_mut().for_each(|o| *o = 0.0);
        return false;
    }
    let denom = sum + EPSILON;
    out.iter_mut().for_each(|o| *o /= denom);
    true
}

pub fn blend_weights(
    visibility: &[Mask],
    boundary: &[Mask],
    angle: &[ScalarField],
    distance: &[ScalarField],
    alpha: f64,
    beta: f64,
) -> Vec<ScalarField> {
    let views = visibility.len();
    let Some(first) = visibility.first() else {
        return Vec::new();
    };
    let (w, h) = (first.width, first.height);
    let mut out: Vec<ScalarField> = (0..views).map(|_| ScalarField::new(w, h, 0.0)).collect();
    let mut terms = vec![
        PixelTerm {
            visible: false,
            kept: true,
            angle: 0.0,
            distance: 0.0
        };
        views
    ];
    let mut weights = vec![0.0; views];
    for i in 0..w * h {
        for v in 0..views {
            terms[v] = PixelTerm {
                visible: visibility[v].data[i],
                kept: boundary[v].data[i],
                angle: angle[v].data[i],
                distance: distance[v].data[i],
            };
        }
        pixel_weights(&terms, alpha, beta, &mut weights);
        for v in 0..views {
            out[v].data[i] = weights[v];
        }
    }
    out
}

/// Rasterizes the target view and blends the support set into it.
pub fn aggregate_views(
    support: &[SupportView],
    target_camera: &Camera,
    mesh: &TriangleMesh,
    params: &BlendParams,
) -> Result<BlendResult> {
    let target = rasterize(mesh, target_camera);
    aggregate_into(support, target_camera, &target, params)
}

/// Same as [`aggregate_views`] with precomputed target buffers.
pub fn aggregate_into(
    support: &[SupportView],
    target_camera: &Camera,
    target: &ViewBuffers,
    params: &BlendParams,
) -> Result<BlendResult> {
    if support.is_empty() {
        return Err(Error::EmptySupportSet);
    }
    let (w, h) = (target.width, target.height);
    let per_view: Vec<(Mask, ScalarField, ScalarField)> = support
        .par_iter()
        .map(|sv| {
            let m = cross_view_visibility(sv, target);
            let d = distance_transform(&m);
            let phi = angular_difference(sv, target, target_camera, &m);
            (m, d, phi)
        })
        .collect();
    let (masks, rest): (Vec<Mask>, Vec<(ScalarField, ScalarField)>) =
        per_view.into_iter().map(|(m, d, p)| (m, (d, p))).unzip();
    let (distances, angles): (Vec<ScalarField>, Vec<ScalarField>) = rest.into_iter().unzip();
    let boundary = boundary_exclusion_with(&masks, &distances, params.boundary_radius);
    let weights = blend_weights(&masks, &boundary, &angles, &distances, params.alpha, params.beta);

    let rotations: Vec<_> = support.iter().map(|sv| sv.camera.rotation()).collect();
    let mut blended = ColorImage::new(w, h, WHITE);
    let mut known = Mask::new(w, h, false);
    for i in 0..w * h {
        let mut acc = [0.0; 3];
        let mut any = false;
        for (v, sv) in support.iter().enumerate() {
            let wv = weights[v].data[i];
            if wv == 0.0 {
                continue;
            }
            any = true;
            let (px, py, _) = sv.camera.project_with(&rotations[v], &target.world_pos[i]);
            let c = sv.sample_surface(px, py);
            for k in 0..3 {
                acc[k] += wv * c[k];
            }
        }
        if any {
            blended.pixels[i] = acc;
            known.data[i] = true;
        }
    }

    let diagnostics = params.keep_diagnostics.then(|| {
        masks
            .into_iter()
            .zip(distances)
            .zip(angles)
            .zip(boundary)
            .map(|(((visibility, distance), angle), boundary)| ViewDiagnostics {
                visibility,
                distance,
                angle,
                boundary,
            })
            .collect()
    });
    Ok(BlendResult {
        blended,
        known_mask: known,
        per_view_weights: weights,
        diagnostics,
    })
}
