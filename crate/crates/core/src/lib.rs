//! Single-view 360° texture completion for triangle meshes.
//!
//! A posed input view is extended to a full turntable by aggregating already
//! known views into each new camera, inpainting what is left through a
//! pluggable backend, and finally fusing every view into one UV texture by
//! inverse rendering.

// Per-channel loops over parallel arrays read better indexed.
#![allow(clippy::needless_range_loop)]

pub mod aggregate;
pub mod camera;
pub mod cli;
pub mod config;
pub mod distance;
pub mod error;
pub mod fuse;
pub mod image_buf;
pub mod inpaint;
pub mod mesh;
pub mod metrics;
pub mod patterns;
pub mod pipeline;
pub mod raster;
pub mod texture;

pub use error::{Error, Result};
