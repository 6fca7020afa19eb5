//! Weak-perspective turntable cameras.
//!
//! World frame: +Y up, the subject faces +Z. Camera frame: +X right, +Y up,
//! +Z toward the viewer, so the view axis is −Z. Azimuth rotates the camera
//! about world +Y; azimuth 0 is the input view and positive azimuths move
//! toward the subject's left (+X).

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::mesh::Vec3;

/// Fraction of the smaller image side covered by the projection of `[-1, 1]³`.
pub const DEFAULT_COVERAGE: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub width: usize,
    pub height: usize,
    /// Pixels per world unit; `None` picks [`DEFAULT_COVERAGE`].
    pub scale: Option<f64>,
    pub elevation: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            scale: None,
            elevation: 0.0,
        }
    }
}

impl RenderSettings {
    pub fn square(size: usize) -> Self {
        Self {
            width: size,
            height: size,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub azimuth: f64,
    pub elevation: f64,
    pub scale: f64,
    pub width: usize,
    pub height: usize,
    pub principal_point: (f64, f64),
}

pub fn make_turntable_camera(azimuth: f64, settings: &RenderSettings) -> Camera {
    let scale = settings
        .scale
        .unwrap_or(0.5 * DEFAULT_COVERAGE * settings.width.min(settings.height) as f64);
    Camera {
        azimuth,
        elevation: settings.elevation,
        scale,
        width: settings.width,
        height: settings.height,
        principal_point: (settings.width as f64 / 2.0, settings.height as f64 / 2.0),
    }
}

impl Camera {
    /// World-to-camera rotation.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (sa, ca) = (-self.azimuth.to_radians()).sin_cos();
        let ry = Matrix3::new(ca, 0.0, sa, 0.0, 1.0, 0.0, -sa, 0.0, ca);
        let (se, ce) = self.elevation.to_radians().sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ce, -se, 0.0, se, ce);
        rx * ry
    }

    /// Unit world-space direction the camera looks along.
    pub fn view_direction(&self) -> Vec3 {
        self.rotation().transpose() * Vec3::new(0.0, 0.0, -1.0)
    }

    pub fn to_camera_frame(&self, v: &Vec3) -> Vec3 {
        self.rotation() * v
    }

    /// Continuous pixel coordinates and depth (distance along the view axis).
    #[inline]
    pub fn project_with(&self, rot: &Matrix3<f64>, p: &Vec3) -> (f64, f64, f64) {
        let q = rot * p;
        (
            self.principal_point.0 + self.scale * q.x,
            self.principal_point.1 - self.scale * q.y,
            -q.z,
        )
    }

    pub fn project(&self, p: &Vec3) -> (f64, f64, f64) {
        self.project_with(&self.rotation(), p)
    }

    pub fn in_bounds(&self, px: f64, py: f64) -> bool {
        px >= 0.0 && py >= 0.0 && px < self.width as f64 && py < self.height as f64
    }
}
