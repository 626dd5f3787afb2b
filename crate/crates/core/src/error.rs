use std::path::PathBuf;

/// Errors produced by the planning library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("attitude singularity: |pitch| = {pitch:.6} rad is within the Euler guard band")]
    AttitudeSingularity { pitch: f64 },

    #[error("spacecraft inertia is near-singular (condition number {condition:.3e})")]
    NearSingularInertia { condition: f64 },

    #[error("target unreachable after {iterations} iterations (position residual {position_residual:.3e} m, orientation residual {orientation_residual:.3e} rad)")]
    UnreachableTarget {
        iterations: usize,
        position_residual: f64,
        orientation_residual: f64,
    },

    #[error("mass matrix is singular or not positive definite")]
    DynamicsSingular,

    #[error("integration failed at step {step}: {reason}")]
    IntegrationFailure { step: usize, reason: String },

    #[error("LQR cost is degenerate at step {step} (R + B'PB not positive definite)")]
    CostDegenerate { step: usize },

    #[error("closed-loop rollout diverged at step {step}")]
    RolloutDivergence { step: usize },

    #[error("elastic band did not clear the obstacles after {iterations} iterations")]
    DeformationFailure { iterations: usize },

    #[error("demo {demo} could not be generated after {attempts} attempts: {last}")]
    GenerationFailed {
        demo: usize,
        attempts: usize,
        last: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("time {t} s is outside the phase domain [0, {duration}] s")]
    PhaseDomain { t: f64, duration: f64 },

    #[error("need at least 2 demonstrations, got {0}")]
    InsufficientData(usize),

    #[error("conditioning system is numerically singular")]
    ConditioningSingular,

    #[error("cost propagation failed at step {step}: {source}")]
    CostPropagation {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("planning failed: every sampled trajectory failed cost evaluation")]
    PlanningFailed,

    #[error("{path}: output directory is not empty (pass overwrite to replace its contents)")]
    OutputNotEmpty { path: PathBuf },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
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

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
