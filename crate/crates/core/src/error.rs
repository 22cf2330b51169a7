use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("improper filter: numerator degree {num_degree} exceeds denominator degree {den_degree}")]
    ImproperFilter { num_degree: usize, den_degree: usize },

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid plant: {0}")]
    InvalidPlant(String),

    #[error("system is unstable (spectral radius {spectral_radius:.12}); {context}")]
    Unstable { spectral_radius: f64, context: String },

    #[error("negative delay {0}")]
    NegativeDelay(i64),

    #[error("ill-posed interconnection: algebraic loop through {0} is singular")]
    IllPosed(String),

    #[error("pair (A, B) is not stabilizable: mode {mode:.6} is uncontrollable")]
    NotStabilizable { mode: f64 },

    #[error("riccati iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    RiccatiNonConvergence { iterations: usize, residual: f64 },

    #[error("no stabilizing riccati solution (closed-loop spectral radius {spectral_radius:.6})")]
    NoStabilizingSolution { spectral_radius: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("singular matrix in {0}")]
    Singular(String),

    #[error("performance level D = {d:.6e} is infeasible: floor D_inf = {floor:.6e}")]
    Infeasible { d: f64, floor: f64 },

    #[error("simulation diverged at step {step} (|state| = {magnitude:.3e})")]
    Divergence { step: usize, magnitude: f64 },

    #[error("empty trace")]
    EmptyTrace,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular regression: {0}")]
    SingularRegression(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
