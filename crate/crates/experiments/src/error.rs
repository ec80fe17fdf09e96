use std::path::PathBuf;

/// Failure of a scenario, grouped by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("input file error: {0}")]
    Input(holo_core::Error),

    #[error("numerical failure: {0}")]
    Numerical(holo_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::UnknownPreset(_) => 2,
            ExperimentError::Input(_) | ExperimentError::Io { .. } => 3,
            ExperimentError::Numerical(_) => 4,
        }
    }
}

impl From<holo_core::Error> for ExperimentError {
    fn from(e: holo_core::Error) -> Self {
        use holo_core::Error as E;
        match e {
            E::MalformedFile { .. } | E::EmptyFile(_) | E::Io { .. } | E::NonPassive { .. } | E::DimensionMismatch { .. } => {
                ExperimentError::Input(e)
            }
            E::QuadratureNotConverged(_) | E::DegenerateSpectrum | E::ZeroChannel | E::EmptyGains => {
                ExperimentError::Numerical(e)
            }
            other => ExperimentError::Config(other.to_string()),
        }
    }
}
