//! Command-line surface: `gen-mesh`, `synthesize`, `eval`, `serve-mock`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error, 3 backend failure, 4 evaluation threshold violated.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Error;
use crate::fuse::{export_textured_mesh, optimize_texture};
use crate::image_buf::ColorImage;
use crate::inpaint::{
    DiffuseFillBackend, Guidance, InpaintBackend, MockServer, OracleBackend, RecordedRequest, RecordingBackend,
    RemoteBackend,
};
use crate::mesh::{generate_test_mesh, load_mesh, MeshKind};
use crate::metrics::{turntable_eval, DirectoryGroundTruth, GroundTruthProvider, RenderedGroundTruth, Thresholds};
use crate::patterns::TexturePattern;
use crate::pipeline::{azimuth_label, content_id, synthesize_all_views, BackViewSource, RunWriter};
use crate::raster::render_textured;
use crate::texture::TextureMap;

pub const BACKEND_URL_ENV: &str = "TEXFUSE_BACKEND_URL";

pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const BACKEND: u8 = 3;
    pub const THRESHOLD: u8 = 4;
}

#[derive(Debug, Parser)]
#[command(
    name = "texfuse",
    version,
    about = "Single-view 360° texture completion for triangle meshes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a test mesh, its ground-truth texture and oracle views.
    GenMesh(GenMeshArgs),
    /// Synthesize the turntable views for one input image and fuse a texture.
    Synthesize(SynthesizeArgs),
    /// Score a textured mesh on a turntable against ground truth.
    Eval(EvalArgs),
    /// Serve the inpainting HTTP protocol from oracle views or diffuse fill.
    ServeMock(ServeMockArgs),
}

#[derive(Debug, Args)]
pub struct GenMeshArgs {
    /// uv_sphere, cube or capsule
    pub kind: MeshKind,
    pub subdivision: usize,
    /// checker, stripes or solid
    pub pattern: TexturePattern,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub texture_size: usize,
    /// Overrides `pipeline.image_size`.
    #[arg(long)]
    pub image_size: Option<usize>,
    /// Schedule and image size are read from here when given.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Input view at azimuth 0, `image_size` square.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `oracle:DIR`, `fill`, `remote:URL` or `remote` (URL from TEXFUSE_BACKEND_URL).
    #[arg(long)]
    pub backend: Option<BackendSpec>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// The run is written to `<out>/<run id>/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Stop after view synthesis.
    #[arg(long)]
    pub views_only: bool,
    /// Start the support set from the input view alone.
    #[arg(long, conflicts_with = "back_view")]
    pub no_back_init: bool,
    /// Use this image as the initial back view instead of the backend.
    #[arg(long)]
    pub back_view: Option<PathBuf>,
    #[arg(long)]
    pub guidance: Option<Guidance>,
    /// Overrides `fuse.resolution`.
    #[arg(long)]
    pub texture_size: Option<usize>,
    /// Overrides `fuse.iterations`.
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub texture: PathBuf,
    /// Directory of `view_<azimuth>.png` references.
    #[arg(long, conflicts_with = "gt_texture", required_unless_present = "gt_texture")]
    pub gt_dir: Option<PathBuf>,
    /// Reference texture rendered on the same mesh.
    #[arg(long)]
    pub gt_texture: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub image_size: Option<usize>,
    /// Score silhouette pixels only.
    #[arg(long)]
    pub masked: bool,
    #[arg(long)]
    pub min_psnr: Option<f64>,
    #[arg(long)]
    pub min_ssim: Option<f64>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeMockArgs {
    /// 0 picks a free port; the chosen URL is printed on stdout.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Answer from these oracle views; diffuse fill when absent.
    #[arg(long)]
    pub gt_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendSpec {
    Oracle(PathBuf),
    Fill,
    Remote(Option<String>),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            _ if s == "fill" => Ok(Self::Fill),
            _ if s == "remote" => Ok(Self::Remote(None)),
            Some(("oracle", dir)) if !dir.is_empty() => Ok(Self::Oracle(dir.into())),
            Some(("remote", url)) if !url.is_empty() => Ok(Self::Remote(Some(url.to_string()))),
            _ => Err(format!(
                "unknown backend `{s}` (oracle:DIR, fill, remote:URL or remote)"
            )),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(Error),
    #[error("evaluation thresholds violated: {}", .0.join("; "))]
    Threshold(Vec<String>),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => CliError::Usage(msg),
            other => CliError::Failed(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Failed(Error::Backend(_) | Error::BackViewUnavailable(_)) => exit::BACKEND,
            CliError::Failed(_) => exit::FAILURE,
            CliError::Threshold(_) => exit::THRESHOLD,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenMesh(args) => gen_mesh(&args),
        Command::Synthesize(args) => synthesize(&args).map(|_| ()),
        Command::Eval(args) => eval(&args),
        Command::ServeMock(args) => serve_mock(&args),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) if !p.is_file() => Err(CliError::Usage(format!("config file {} not found", p.display()))),
        Some(p) => Ok(RunConfig::load(p)?),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Failed(Error::io(path, e)))
}

pub fn gen_mesh(args: &GenMeshArgs) -> Result<(), CliError> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(size) = args.image_size {
        config.pipeline.image_size = size;
    }
    config.validate()?;
    if args.texture_size == 0 {
        return Err(CliError::Usage("--texture-size must be positive".into()));
    }
    let mesh = generate_test_mesh(args.kind, args.subdivision)?;
    let texture = args.pattern.render(args.texture_size);
    export_textured_mesh(&mesh, &texture, &args.out)?;
    // Views come from the reloaded file so they match what `synthesize` sees.
    let mesh = load_mesh(&args.out.join("mesh.obj"))?;
    let views = args.out.join("views");
    std::fs::create_dir_all(&views).map_err(|e| Error::io(&views, e))?;
    let mut azimuths = vec![0.0];
    azimuths.extend(&config.pipeline.schedule);
    for az in azimuths {
        let img = render_textured(&mesh, &texture, &config.pipeline.camera(az));
        img.save_png(&views.join(format!("view_{}.png", azimuth_label(az))))?;
    }
    println!("{}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct BackendIdentity {
    spec: String,
    id: String,
}

#[derive(Serialize, Default)]
struct RunTimings {
    pipeline_ms: u64,
    fuse_ms: u64,
    total_ms: u64,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    run_id: &'a str,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    config: &'a RunConfig,
    inputs: Vec<FileDigest>,
    backend: BackendIdentity,
    requests: Vec<RecordedRequest>,
    artifacts: Vec<String>,
    timings: RunTimings,
}

fn describe_backend(spec: &BackendSpec) -> String {
    match spec {
        BackendSpec::Oracle(dir) => format!("oracle:{}", dir.display()),
        BackendSpec::Fill => "fill".into(),
        BackendSpec::Remote(url) => format!("remote:{}", url.as_deref().unwrap_or("")),
    }
}

fn resolve_backend(spec: Option<&BackendSpec>) -> Result<BackendSpec, CliError> {
    let env_url = std::env::var(BACKEND_URL_ENV).ok().filter(|u| !u.is_empty());
    match spec {
        Some(BackendSpec::Remote(None)) | None => match env_url {
            Some(url) => Ok(BackendSpec::Remote(Some(url))),
            None => Err(CliError::Usage(format!(
                "no backend: pass --backend oracle:DIR|fill|remote:URL or set {BACKEND_URL_ENV}"
            ))),
        },
        Some(other) => Ok(other.clone()),
    }
}

fn build_backend(spec: &BackendSpec, config: &RunConfig) -> Result<Box<dyn InpaintBackend>, CliError> {
    Ok(match spec {
        BackendSpec::Oracle(dir) => Box::new(OracleBackend::from_dir(dir)?),
        BackendSpec::Fill => Box::new(DiffuseFillBackend::default()),
        BackendSpec::Remote(url) => {
            let url = url.as_deref().unwrap_or_default();
            let remote = RemoteBackend::new(url, config.remote.timeout_ms, config.remote.retries);
            remote.health().map_err(|e| CliError::Failed(Error::Backend(e)))?;
            Box::new(remote)
        }
    })
}

/// Runs `synthesize` and returns the run directory.
pub fn synthesize(args: &SynthesizeArgs) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.pipeline.base_seed = seed;
    }
    if let Some(g) = args.guidance {
        config.pipeline.guidance = g;
    }
    if args.no_back_init {
        config.pipeline.back_view = BackViewSource::None;
    }
    if let Some(path) = &args.back_view {
        config.pipeline.back_view = BackViewSource::File(path.clone());
    }
    if let Some(n) = args.texture_size {
        config.fuse.resolution = n;
    }
    if let Some(n) = args.iterations {
        config.fuse.iterations = n;
    }
    config.validate()?;
    let spec = resolve_backend(args.backend.as_ref())?;

    let mesh_bytes = read_bytes(&args.mesh)?;
    let input_bytes = read_bytes(&args.input)?;
    let mesh = load_mesh(&args.mesh)?;
    let input = ColorImage::load_png(&args.input)?;
    let mut inputs = vec![
        FileDigest {
            path: args.mesh.display().to_string(),
            sha256: content_id(&[&mesh_bytes]),
        },
        FileDigest {
            path: args.input.display().to_string(),
            sha256: content_id(&[&input_bytes]),
        },
    ];
    if let BackViewSource::File(path) = &config.pipeline.back_view {
        inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: content_id(&[&read_bytes(path)?]),
        });
    }

    let backend = RecordingBackend::new(build_backend(&spec, &config)?);
    let config_toml = config.to_toml()?;
    let spec_text = describe_backend(&spec);
    let hashes: Vec<&str> = inputs.iter().map(|d| d.sha256.as_str()).collect();
    let run_id = content_id(&[
        hashes.join(",").as_bytes(),
        config_toml.as_bytes(),
        spec_text.as_bytes(),
    ])[..16]
        .to_string();
    let root = args.out.join(&run_id);
    if root.exists() {
        std::fs::remove_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    }
    let run = RunWriter::create(&root)?;
    std::fs::write(root.join("config.toml"), &config_toml).map_err(|e| Error::io(root.join("config.toml"), e))?;

    let mut timings = RunTimings::default();
    let mut artifacts = vec!["config.toml".to_string()];
    let manifest = |status: &str, error: Option<String>, artifacts: &[String], timings: RunTimings| {
        run.write_json(
            "manifest.json",
            &RunManifest {
                run_id: &run_id,
                status,
                error,
                config: &config,
                inputs: inputs
                    .iter()
                    .map(|d| FileDigest {
                        path: d.path.clone(),
                        sha256: d.sha256.clone(),
                    })
                    .collect(),
                backend: BackendIdentity {
                    spec: spec_text.clone(),
                    id: backend.id(),
                },
                requests: backend.log(),
                artifacts: artifacts.to_vec(),
                timings,
            },
        )
    };

    eprintln!("run {run_id}: synthesizing {} views", config.pipeline.schedule.len());
    let t = Instant::now();
    let output = match synthesize_all_views(&mesh, &input, &config.pipeline, &backend, Some(&run)) {
        Ok(o) => o,
        Err(e) => {
            timings.total_ms = started.elapsed().as_millis() as u64;
            manifest("failed", Some(e.to_string()), &artifacts, timings)?;
            return Err(e.into());
        }
    };
    timings.pipeline_ms = t.elapsed().as_millis() as u64;
    artifacts.push("view_0".into());
    if config.pipeline.back_view != BackViewSource::None {
        artifacts.push("back_init".into());
    }
    for step in &output.steps {
        artifacts.push(format!("view_{}", azimuth_label(step.azimuth)));
    }

    if !args.views_only {
        eprintln!(
            "run {run_id}: fusing {} views into a {}² texture ({} iterations)",
            output.views.len(),
            config.fuse.resolution,
            config.fuse.iterations
        );
        let t = Instant::now();
        let checkpoints = (config.fuse.checkpoint_every > 0).then(|| root.join("checkpoints"));
        if let Some(dir) = &checkpoints {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            artifacts.push("checkpoints".into());
        }
        let fused = optimize_texture(&mesh, &output.views.views, &config.fuse, checkpoints.as_deref())?;
        export_textured_mesh(&mesh, &fused.texture, &root.join("textured"))?;
        fused.trace.write_csv(&root.join("loss.csv"))?;
        timings.fuse_ms = t.elapsed().as_millis() as u64;
        artifacts.extend(
            [
                "textured/mesh.obj",
                "textured/mesh.mtl",
                "textured/texture.png",
                "loss.csv",
            ]
            .map(String::from),
        );
    }
    timings.total_ms = started.elapsed().as_millis() as u64;
    manifest("complete", None, &artifacts, timings)?;
    println!("{}", root.display());
    Ok(root)
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let mut settings = config.eval.clone();
    if let Some(n) = args.views {
        settings.n_views = n;
    }
    if let Some(s) = args.spacing {
        settings.spacing = s;
    }
    if let Some(s) = args.image_size {
        settings.image_size = s;
    }
    settings.masked |= args.masked;
    if settings.n_views == 0 || settings.image_size == 0 {
        return Err(CliError::Usage("--views and --image-size must be positive".into()));
    }
    let mesh = load_mesh(&args.mesh)?;
    let texture = TextureMap::load_png(&args.texture)?;
    let reference;
    let provider: Box<dyn GroundTruthProvider + '_> = match (&args.gt_dir, &args.gt_texture) {
        (Some(dir), _) => Box::new(DirectoryGroundTruth::new(dir)),
        (None, Some(path)) => {
            reference = TextureMap::load_png(path)?;
            Box::new(RenderedGroundTruth {
                mesh: &mesh,
                texture: &reference,
            })
        }
        (None, None) => return Err(CliError::Usage("pass --gt-dir or --gt-texture".into())),
    };
    let report = turntable_eval(&mesh, &texture, provider.as_ref(), &settings)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.csv {
        report.write_csv(path)?;
    }
    let violations = report.violations(&Thresholds {
        min_psnr: args.min_psnr,
        min_ssim: args.min_ssim,
    });
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(violations))
    }
}

pub fn serve_mock(args: &ServeMockArgs) -> Result<(), CliError> {
    let backend: Arc<dyn InpaintBackend> = match &args.gt_dir {
        Some(dir) => Arc::new(OracleBackend::from_dir(dir)?),
        None => Arc::new(DiffuseFillBackend::default()),
    };
    let addr = format!("{}:{}", args.host, args.port);
    let server = MockServer::spawn(&addr, backend).map_err(|e| CliError::Failed(Error::io(&addr, e)))?;
    println!("listening on {}", server.url());
    let _ = std::io::stdout().flush();
    server.join();
    Ok(())
}
