use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("rank decision is ambiguous: singular value {value:.3e} lies in the band around threshold {threshold:.3e}")]
    ToleranceAmbiguity { value: f64, threshold: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not antisymmetric (max |A + Aᵀ| = {deviation:.3e})")]
    NotAntisymmetric { deviation: f64 },

    #[error("point {point:?} lies within {distance:.3e} of excluded set `{set}`")]
    DomainGuardViolation {
        set: String,
        point: Vec<f64>,
        distance: f64,
    },

    #[error("flat map is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularFlat { condition: f64 },

    #[error("cocycle component {index} is not constant over the samples (spread {spread:.3e})")]
    NonConstant { index: usize, spread: f64 },

    #[error("function is not invariant under the action (max deviation {deviation:.3e})")]
    NotInvariant { deviation: f64 },

    #[error("supplied Reeb flow does not integrate the Reeb field (max deviation {deviation:.3e})")]
    FlowMismatch { deviation: f64 },

    #[error("Reeb field is tangent to the group orbit at {} sample point(s)", points.len())]
    TangencyDetected { points: Vec<Vec<f64>> },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("constraint differentials are linearly dependent (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("slice is not transverse to the orbits (condition estimate {condition:.3e})")]
    SliceNotTransverse { condition: f64 },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("parse error{}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), key.as_ref().map(|k| format!(" in `{k}`")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("validation failed for `{invariant}`: {detail}")]
    Validation { invariant: String, detail: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("at step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },
}

impl Error {
    pub fn parse(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            key: Some(key.into()),
            message: message.into(),
        }
    }

    pub fn validation(invariant: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Validation {
            invariant: invariant.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code for this error class: 1 for failed invariants,
    /// 2 for bad input, 3 for numerical breakdown.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io(_) | Error::DimensionMismatch { .. } => 2,
            Error::NoConvergence { .. }
            | Error::NonFinite { .. }
            | Error::RankDeficient { .. }
            | Error::SingularFlat { .. }
            | Error::SliceNotTransverse { .. }
            | Error::ToleranceAmbiguity { .. } => 3,
            Error::AtStep { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
