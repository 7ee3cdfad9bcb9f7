use std::path::PathBuf;

use clebsch_geodesic::error::GeoError;
use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),

    #[error("error[{kind}]: {0}", kind = .0.kind())]
    Geo(#[from] GeoError),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 2 for configuration and validation problems, 3 for
    /// numerical non-convergence, 4 for integrator failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Geo(e) => match e {
                GeoError::NonPositiveAxis { .. }
                | GeoError::DuplicateAxis { .. }
                | GeoError::DimensionTooSmall(_)
                | GeoError::DimensionMismatch { .. }
                | GeoError::DegenerateForm(_)
                | GeoError::InvalidControl(_)
                | GeoError::PoleAtAxis { .. }
                | GeoError::InvalidProblem(_) => 2,
                GeoError::NoConvergence { .. } | GeoError::DegenerateChord => 3,
                GeoError::ConstraintViolation { .. }
                | GeoError::ZeroVelocity { .. }
                | GeoError::ResamplingFailure(_)
                | GeoError::NonFiniteState { .. }
                | GeoError::StepUnderflow { .. }
                | GeoError::MaxStepsExceeded(_)
                | GeoError::NonMonotoneTime(_) => 4,
            },
            CliError::Io { .. } => 1,
        }
    }
}
