use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("non-triangular face at line {line} ({corners} corners); triangulate the mesh before loading")]
    NonTriangularFace { line: usize, corners: usize },

    #[error("mesh has no texture coordinates; export it with a UV atlas (`vt` records and `f v/vt` faces)")]
    MissingUvs,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unknown test mesh kind `{0}` (expected uv_sphere, cube or capsule)")]
    UnknownMeshKind(String),

    #[error("image error: {0}")]
    Image(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("support set is empty")]
    EmptySupportSet,

    #[error("no views to fuse")]
    NoViews,

    #[error("non-finite texel values at iteration {iteration} ({count} channels affected)")]
    NonFinite { iteration: usize, count: usize },

    #[error(transparent)]
    Backend(#[from] crate::inpaint::BackendError),

    #[error("back-view provider unavailable: {0}")]
    BackViewUnavailable(String),

    #[error("ground truth missing for azimuth {0}")]
    MissingGroundTruth(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
