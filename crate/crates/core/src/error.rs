use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Malformed radial grid (structural, distinct from a failed validation).
    #[error("malformed grid: {0}")]
    Grid(String),

    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inadmissible family parameters for `{family}`: {reason}")]
    Family { family: String, reason: String },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("solver configuration: {0}")]
    SolverConfig(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("no convergence after {iterations} iterations (last update {last:.3e})")]
    NoConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("potential rejected: residual {residual:.3e} exceeds {tolerance:.3e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("grid too coarse: {0}")]
    Refinement(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
