use std::path::PathBuf;

/// Errors produced by channel synthesis and capacity evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-positive input: {0}")]
    NonPositiveInput(&'static str),

    #[error("spacing {spacing} does not divide aperture {aperture} into an integer grid")]
    NonIntegerGrid { aperture: f64, spacing: f64 },

    #[error("element index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("angular spread {0} deg outside the validity range (0, 21)")]
    SpreadOutOfRange(f64),

    #[error("cluster table is empty")]
    EmptyTable,

    #[error("harmonic ({ix}, {iy}) lies outside the lattice ellipse")]
    IndexOutsideEllipse { ix: i64, iy: i64 },

    #[error("quadrature did not converge (relative change {0:.3e})")]
    QuadratureNotConverged(f64),

    #[error("angular spectrum carries no power over the visible hemisphere")]
    DegenerateSpectrum,

    #[error("malformed {kind} file {path}: {reason}")]
    MalformedFile {
        kind: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error("file {0} contains no data rows")]
    EmptyFile(PathBuf),

    #[error("S-parameter row {row} has power sum {power} > 1")]
    NonPassive { row: usize, power: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no gains to water-fill")]
    EmptyGains,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("channel matrix is numerically zero")]
    ZeroChannel,

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn malformed(kind: &'static str, path: &std::path::Path, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            kind,
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
