use thiserror::Error;

pub type Result<T> = std::result::Result<T, HcrError>;

/// Coarse error categories, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Geometry,
    Numeric,
    Feasibility,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 3,
            ErrorCategory::Geometry => 4,
            ErrorCategory::Numeric => 5,
            ErrorCategory::Feasibility => 6,
            ErrorCategory::Io => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Input => "input",
            ErrorCategory::Geometry => "geometry",
            ErrorCategory::Numeric => "numeric",
            ErrorCategory::Feasibility => "feasibility",
            ErrorCategory::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum HcrError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("origin is not strictly feasible: constraint {index} evaluates to {value}")]
    OriginNotStrictlyFeasible { index: usize, value: f64 },

    #[error("constraint {index} returned a non-finite value")]
    NonFiniteConstraint { index: usize },

    #[error(
        "no frontier crossing below escape bound {bound:e}; region is unbounded along this ray"
    )]
    EscapeBoundExceeded { bound: f64 },

    #[error("function does not change sign over [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("root finder did not converge within {iterations} iterations")]
    MaxIterExceeded { iterations: usize },

    #[error("point is outside the feasible region (violated constraints: {violated:?})")]
    InfeasibleInput { violated: Vec<usize> },

    #[error("invalid hyperspherical coordinate: {0}")]
    InvalidCoordinate(String),

    #[error("projection did not converge within {sweeps} sweeps")]
    NotConverged {
        sweeps: usize,
        /// Feasible (but possibly suboptimal) point recovered by the radial safeguard.
        best: Vec<f64>,
    },

    #[error(
        "{count} training targets are infeasible; project them before hyperspherical training"
    )]
    InfeasibleTargets { count: usize },

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("{method} produced infeasible outputs (inside ratio {ratio})")]
    FeasibilityViolated { method: String, ratio: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HcrError {
    pub fn category(&self) -> ErrorCategory {
        use HcrError::*;
        match self {
            DimensionMismatch { .. }
            | InvalidConstraint(_)
            | InvalidConfig(_)
            | InvalidCoordinate(_)
            | ShapeMismatch(_)
            | Unsupported(_)
            | Parse { .. }
            | Json(_) => ErrorCategory::Input,
            OriginNotStrictlyFeasible { .. } | EscapeBoundExceeded { .. } | DegenerateRegion(_) => {
                ErrorCategory::Geometry
            }
            NonFiniteConstraint { .. }
            | NoSignChange { .. }
            | MaxIterExceeded { .. }
            | NotConverged { .. }
            | NonFiniteLoss { .. } => ErrorCategory::Numeric,
            InfeasibleInput { .. } | InfeasibleTargets { .. } | FeasibilityViolated { .. } => {
                ErrorCategory::Feasibility
            }
            Io(_) => ErrorCategory::Io,
        }
    }
}
