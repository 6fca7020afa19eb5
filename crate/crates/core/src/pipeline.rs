//! Auto-regressive view synthesis: grow the support set one scheduled
//! azimuth at a time by aggregating what is known and inpainting the rest.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::{aggregate_into, BlendParams, BlendResult, SupportView};
use crate::camera::{make_turntable_camera, Camera, RenderSettings};
use crate::error::{Error, Result};
use crate::image_buf::{save_png, ColorImage};
use crate::inpaint::prompt::normalize_azimuth;
use crate::inpaint::{
    inpaint, view_prompt, BackViewRequest, DepthImage, Guidance, InpaintBackend, InpaintRequest, KnownRegionPolicy,
    PromptStyle, DEFAULT_GUIDANCE_SCALE, DEFAULT_STEPS,
};
use crate::mesh::TriangleMesh;
use crate::raster::{rasterize, render_normal_map, render_silhouette, ViewBuffers};

pub const DEFAULT_SCHEDULE: [f64; 7] = [45.0, -45.0, 90.0, -90.0, 135.0, -135.0, 180.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "path")]
pub enum BackViewSource {
    /// A user-supplied image of the azimuth-180 view.
    File(PathBuf),
    /// Ask the inpainting backend's back-view endpoint.
    #[default]
    Backend,
    /// Start from the input view alone.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schedule: Vec<f64>,
    pub blend: BlendParams,
    pub image_size: usize,
    pub base_seed: u64,
    pub back_view: BackViewSource,
    pub guidance: Guidance,
    pub guidance_scale: f64,
    pub steps: u32,
    pub negative_prompt: String,
    pub known_region_policy: KnownRegionPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schedule: DEFAULT_SCHEDULE.to_vec(),
            blend: BlendParams::default(),
            image_size: 512,
            base_seed: 0,
            back_view: BackViewSource::default(),
            guidance: Guidance::Both,
            guidance_scale: DEFAULT_GUIDANCE_SCALE,
            steps: DEFAULT_STEPS,
            negative_prompt: String::new(),
            known_region_policy: KnownRegionPolicy::Strict,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &az in &self.schedule {
            if !az.is_finite() {
                return Err(Error::Config(format!("schedule entry {az} is not finite")));
            }
            let key = (normalize_azimuth(az) * 1000.0).round() as i64;
            if key == 0 {
                return Err(Error::Config("schedule must not contain the input azimuth 0".into()));
            }
            if !seen.insert(key) {
                return Err(Error::Config(format!("schedule repeats azimuth {az}")));
            }
        }
        if self.image_size == 0 {
            return Err(Error::Config("image_size must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        Ok(())
    }

    pub fn render_settings(&self) -> RenderSettings {
        RenderSettings::square(self.image_size)
    }

    pub fn camera(&self, azimuth: f64) -> Camera {
        make_turntable_camera(azimuth, &self.render_settings())
    }

    /// Seed of schedule step `index` (0-based). The back view uses the base seed.
    pub fn step_seed(&self, index: usize) -> u64 {
        self.base_seed.wrapping_add(index as u64 + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Input,
    BackInit,
    Synthesized,
}

#[derive(Clone, Debug)]
pub struct MultiViewSet {
    pub views: Vec<SupportView>,
    pub provenance: Vec<Provenance>,
}

impl MultiViewSet {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn azimuths(&self) -> Vec<f64> {
        self.views.iter().map(|v| v.camera.azimuth).collect()
    }

    pub fn covered_faces(&self) -> BTreeSet<usize> {
        self.views
            .iter()
            .flat_map(|v| v.visible_faces.iter().copied())
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTimings {
    pub aggregate_ms: u64,
    pub inpaint_ms: u64,
}

/// Everything recorded about one scheduled view.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub azimuth: f64,
    pub seed: u64,
    pub prompt: String,
    pub backend_id: String,
    pub blend: BlendResult,
    /// The request as built, before any guidance blanking.
    pub request: InpaintRequest,
    pub result: RgbImage,
    pub timings: StepTimings,
}

impl StepRecord {
    /// Silhouette pixels the aggregation could not fill.
    pub fn unknown_pixels(&self) -> usize {
        self.request
            .silhouette
            .pixels()
            .zip(self.request.known_mask.pixels())
            .filter(|(s, k)| s.0[0] >= 128 && k.0[0] < 128)
            .count()
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub views: MultiViewSet,
    pub steps: Vec<StepRecord>,
}

/// 16-bit depth with nearer surfaces brighter; background 0.
pub fn render_depth_map(buffers: &ViewBuffers) -> DepthImage {
    // Normalized meshes sit inside the unit cube, so |depth| <= √3.
    let range = 3f64.sqrt();
    let mut out = DepthImage::new(buffers.width as u32, buffers.height as u32);
    for (i, p) in out.pixels_mut().enumerate() {
        if buffers.covered(i) {
            let t = ((range - buffers.depth[i]) / (2.0 * range)).clamp(0.0, 1.0);
            p.0 = [1 + (t * 65534.0).round() as u16];
        }
    }
    out
}

/// Produces the azimuth-180 view that seeds the support set.
pub fn initialize_back_view(
    mesh: &TriangleMesh,
    input: &SupportView,
    config: &PipelineConfig,
    backend: &dyn InpaintBackend,
) -> Result<SupportView> {
    let camera = config.camera(180.0);
    let buffers = rasterize(mesh, &camera);
    let image = match &config.back_view {
        BackViewSource::File(path) => {
            let img = ColorImage::load_png(path)?;
            if img.dims() != (camera.width, camera.height) {
                return Err(Error::DimensionMismatch(format!(
                    "back view {} is {}x{} but views render at {}x{}",
                    path.display(),
                    img.width,
                    img.height,
                    camera.width,
                    camera.height
                )));
            }
            img
        }
        BackViewSource::Backend => {
            let request = BackViewRequest {
                input_image: input.image.to_rgb8(),
                normal: render_normal_map(&buffers, &camera),
                depth: render_depth_map(&buffers),
                silhouette: render_silhouette(&buffers),
                prompt: view_prompt(180.0, PromptStyle::BackInit),
                seed: config.base_seed,
            };
            let img = backend
                .back_view(&request)
                .map_err(|e| Error::BackViewUnavailable(e.to_string()))?;
            if img.dimensions() != (camera.width as u32, camera.height as u32) {
                return Err(Error::BackViewUnavailable(format!(
                    "provider returned {:?} for a {}x{} view",
                    img.dimensions(),
                    camera.width,
                    camera.height
                )));
            }
            ColorImage::from_rgb8(&img)
        }
        BackViewSource::None => {
            return Err(Error::BackViewUnavailable("no back-view source configured".into()));
        }
    };
    SupportView::from_buffers(camera, image, buffers)
}

/// Runs the full schedule. When `run` is given, every accepted view is
/// written as soon as it exists, so a failing backend leaves the partial
/// run on disk.
pub fn synthesize_all_views(
    mesh: &TriangleMesh,
    input_image: &ColorImage,
    config: &PipelineConfig,
    backend: &dyn InpaintBackend,
    run: Option<&RunWriter>,
) -> Result<PipelineOutput> {
    config.validate()?;
    let size = config.image_size;
    if input_image.dims() != (size, size) {
        return Err(Error::DimensionMismatch(format!(
            "input image is {}x{} but image_size is {size}",
            input_image.width, input_image.height
        )));
    }
    let input = SupportView::new(mesh, config.camera(0.0), input_image.clone())?;
    if let Some(run) = run {
        run.write_fixed_view("view_0", &input, Provenance::Input)?;
    }
    let mut views = vec![input];
    let mut provenance = vec![Provenance::Input];

    if config.back_view != BackViewSource::None {
        let back = initialize_back_view(mesh, &views[0], config, backend)?;
        if let Some(run) = run {
            run.write_fixed_view("back_init", &back, Provenance::BackInit)?;
        }
        views.push(back);
        provenance.push(Provenance::BackInit);
    }

    let mut steps = Vec::with_capacity(config.schedule.len());
    for (index, &azimuth) in config.schedule.iter().enumerate() {
        let camera = config.camera(azimuth);
        let target = rasterize(mesh, &camera);

        let start = Instant::now();
        let blend = aggregate_into(&views, &camera, &target, &config.blend)?;
        let aggregate_ms = start.elapsed().as_millis() as u64;

        let seed = config.step_seed(index);
        let prompt = view_prompt(azimuth, PromptStyle::FrontPipeline);
        let request = InpaintRequest {
            blended: blend.blended.to_rgb8(),
            known_mask: blend.known_mask.to_gray8(),
            normal_map: render_normal_map(&target, &camera),
            silhouette: render_silhouette(&target),
            prompt: prompt.clone(),
            negative_prompt: config.negative_prompt.clone(),
            seed,
            guidance_scale: config.guidance_scale,
            steps: config.steps,
            view_azimuth: azimuth,
        };
        // Fully known targets still go through the backend so every
        // scheduled view is requested; the composite keeps them unchanged.
        let start = Instant::now();
        let guided = request.clone().with_guidance(config.guidance);
        let response = inpaint(&guided, backend, config.known_region_policy)?;
        let (result, backend_id) = (response.image, response.backend_id);
        let inpaint_ms = start.elapsed().as_millis() as u64;

        let view = SupportView::from_buffers(camera, ColorImage::from_rgb8(&result), target)?;
        let record = StepRecord {
            azimuth,
            seed,
            prompt,
            backend_id,
            blend,
            request,
            result,
            timings: StepTimings {
                aggregate_ms,
                inpaint_ms,
            },
        };
        if let Some(run) = run {
            run.write_step(&record)?;
        }
        steps.push(record);

        let replaces = provenance
            .iter()
            .position(|&p| p == Provenance::BackInit)
            .filter(|&i| (normalize_azimuth(azimuth) - normalize_azimuth(views[i].camera.azimuth)).abs() < 1e-9);
        if let Some(i) = replaces {
            views.remove(i);
            provenance.remove(i);
        }
        views.push(view);
        provenance.push(Provenance::Synthesized);
    }
    Ok(PipelineOutput {
        views: MultiViewSet { views, provenance },
        steps,
    })
}

/// Formats an azimuth for file names: `45`, `-45`, `22.5`.
pub fn azimuth_label(azimuth: f64) -> String {
    format!("{azimuth}")
}

#[derive(Serialize)]
struct ViewMeta<'a> {
    azimuth: f64,
    provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prompt: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    negative_prompt: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    backend_id: Option<&'a str>,
    known_pixels: usize,
    unknown_pixels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<&'a StepTimings>,
}

/// Writes run artifacts under one directory.
#[derive(Clone, Debug)]
pub struct RunWriter {
    root: PathBuf,
}

impl RunWriter {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let dir = self.root.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    pub fn write_json<T: Serialize>(&self, relative: &str, value: &T) -> Result<()> {
        let path = self.root.join(relative);
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    fn write_meta(&self, dir: &Path, meta: &ViewMeta) -> Result<()> {
        let path = dir.join("meta.json");
        let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    fn write_fixed_view(&self, name: &str, view: &SupportView, provenance: Provenance) -> Result<()> {
        let dir = self.dir(name)?;
        view.image.save_png(&dir.join("result.png"))?;
        save_png(&render_silhouette(&view.buffers), &dir.join("silhouette.png"))?;
        self.write_meta(
            &dir,
            &ViewMeta {
                azimuth: view.camera.azimuth,
                provenance,
                seed: None,
                prompt: None,
                negative_prompt: None,
                backend_id: None,
                known_pixels: view.buffers.silhouette().count(),
                unknown_pixels: 0,
                timings: None,
            },
        )
    }

    pub fn write_step(&self, step: &StepRecord) -> Result<()> {
        let dir = self.dir(&format!("view_{}", azimuth_label(step.azimuth)))?;
        save_png(&step.request.blended, &dir.join("blend.png"))?;
        save_png(&step.request.known_mask, &dir.join("known_mask.png"))?;
        save_png(&step.request.normal_map, &dir.join("normal.png"))?;
        save_png(&step.request.silhouette, &dir.join("silhouette.png"))?;
        save_png(&step.result, &dir.join("result.png"))?;
        let unknown = step.unknown_pixels();
        self.write_meta(
            &dir,
            &ViewMeta {
                azimuth: step.azimuth,
                provenance: Provenance::Synthesized,
                seed: Some(step.seed),
                prompt: Some(&step.prompt),
                negative_prompt: Some(&step.request.negative_prompt),
                backend_id: Some(&step.backend_id),
                known_pixels: step.blend.known_mask.count(),
                unknown_pixels: unknown,
                timings: Some(&step.timings),
            },
        )
    }
}

/// Content address of a run: hex SHA-256 over the given byte parts.
pub fn content_id(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hex::encode(hasher.finalize())
}

/// Hash of every file under `dir` (sorted by relative path). JSON files are
/// hashed with any top-level `timings` key removed, so wall-clock noise does
/// not change the digest.
pub fn run_digest(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let mut hasher = Sha256::new();
    for rel in files {
        let path = dir.join(&rel);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let bytes = if rel.ends_with(".json") {
            strip_timings(&bytes).unwrap_or(bytes)
        } else {
            bytes
        };
        hasher.update(rel.as_bytes());
        hasher.update([0]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn strip_timings(bytes: &[u8]) -> Option<Vec<u8>> {
    let mut value: serde_json::Value = serde_json::from_slice(bytes).ok()?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("timings");
    }
    serde_json::to_vec(&value).ok()
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("walked path under root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}
