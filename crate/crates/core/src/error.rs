use thiserror::Error;

/// Errors raised by the geodesic, Clebsch and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("axis parameter a[{index}] = {value} is not positive")]
    NonPositiveAxis { index: usize, value: f64 },

    #[error("axis parameters a[{first}] and a[{second}] coincide ({value}); operation needs distinct axes")]
    DuplicateAxis {
        first: usize,
        second: usize,
        value: f64,
    },

    #[error("ellipsoid needs dimension >= 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate scalar form: {0}")]
    DegenerateForm(&'static str),

    #[error("constraint violated: |Q0 - 1| = {q0_residual:e}, |tangency| = {tangency_residual:e}")]
    ConstraintViolation {
        q0_residual: f64,
        tangency_residual: f64,
    },

    #[error("velocity vanishes (B = {b:e}); reconstruction undefined")]
    ZeroVelocity { b: f64 },

    #[error("tangent velocity resampling failed after {0} attempts")]
    ResamplingFailure(usize),

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("step size {h:e} fell below h_min at t = {t}")]
    StepUnderflow { t: f64, h: f64 },

    #[error("exceeded {0} integration steps")]
    MaxStepsExceeded(usize),

    #[error("invalid step control: {0}")]
    InvalidControl(String),

    #[error("lambda = {lambda} is within 1e-12 of axis a[{index}]")]
    PoleAtAxis { lambda: f64, index: usize },

    #[error("physical time not strictly increasing at sample {0}")]
    NonMonotoneTime(usize),

    #[error("shooting did not converge after {iterations} iterations (miss = {miss:e})")]
    NoConvergence { iterations: usize, miss: f64 },

    #[error("chord q - p has no tangent component at p; initial direction is ambiguous")]
    DegenerateChord,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

impl GeoError {
    /// Short stable identifier, used in machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            GeoError::NonPositiveAxis { .. } => "NonPositiveAxis",
            GeoError::DuplicateAxis { .. } => "DuplicateAxis",
            GeoError::DimensionTooSmall(_) => "DimensionTooSmall",
            GeoError::DimensionMismatch { .. } => "DimensionMismatch",
            GeoError::DegenerateForm(_) => "DegenerateForm",
            GeoError::ConstraintViolation { .. } => "ConstraintViolation",
            GeoError::ZeroVelocity { .. } => "ZeroVelocity",
            GeoError::ResamplingFailure(_) => "ResamplingFailure",
            GeoError::NonFiniteState { .. } => "NonFiniteState",
            GeoError::StepUnderflow { .. } => "StepUnderflow",
            GeoError::MaxStepsExceeded(_) => "MaxStepsExceeded",
            GeoError::InvalidControl(_) => "InvalidControl",
            GeoError::PoleAtAxis { .. } => "PoleAtAxis",
            GeoError::NonMonotoneTime(_) => "NonMonotoneTime",
            GeoError::NoConvergence { .. } => "NoConvergence",
            GeoError::DegenerateChord => "DegenerateChord",
            GeoError::InvalidProblem(_) => "InvalidProblem",
        }
    }
}

pub type Result<T> = std::result::Result<T, GeoError>;
