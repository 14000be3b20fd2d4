use std::path::PathBuf;

/// Errors produced anywhere in the extraction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is not SPD (min eigenvalue {min_eigenvalue:e}) at {context}")]
    NotSpd { min_eigenvalue: f64, context: String },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("no seeds detected at quantile p = {quantile}; lower the quantile to keep more detail")]
    NoSeeds { quantile: f64 },

    #[error("descent stuck at voxel {voxel:?} (u = {u}) before reaching a source")]
    DescentStuck { voxel: [usize; 3], u: f64 },

    #[error("iteration cap {cap} exceeded: {diagnostic}")]
    IterationCap { cap: usize, diagnostic: String },

    #[error("phantom generation failed: {0}")]
    Phantom(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("nifti error on {path}: {source}")]
    Nifti {
        path: PathBuf,
        #[source]
        source: nifti::NiftiError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
