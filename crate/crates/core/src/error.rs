//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: points per dimension must be even and >= 8, got {0}")]
    BadGrid(usize),

    #[error("spatial dimension must be 1 or 2, got {0}")]
    BadDimension(usize),

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error(
        "tube violation at node {node}: jet deviation {deviation:.6e} exceeds radius {radius:.6e}"
    )]
    TubeViolation {
        node: usize,
        deviation: f64,
        radius: f64,
    },

    #[error("principal symbol is undefined for the zero covector")]
    ZeroCovector,

    #[error("operator is not strongly elliptic: lambda = {lambda:.6e}")]
    NotElliptic { lambda: f64 },

    #[error("jet derivative fallback produced non-finite entries at node {node}")]
    DerivativeFallback { node: usize },

    #[error("time axis needs at least two levels")]
    TooFewTimeLevels,

    #[error("time step underflow: dt = {dt:.6e}")]
    StepUnderflow { dt: f64 },

    #[error("linear solver instability persists at dt = {dt:.6e} after {halvings} halvings")]
    Instability { dt: f64, halvings: u32 },

    #[error("residual {residual:.6e} exceeds tolerance {tol:.6e}; not a solution")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("initial level must vanish, |u(.,0)| = {norm:.6e}")]
    NonzeroInitial { norm: f64 },

    #[error("section is not a member of the iteration ball: {reason}")]
    NotInBall { reason: String },

    #[error("no contraction horizon found after {halvings} halvings (last delta = {delta:.6e})")]
    NoContractionHorizon { halvings: u32, delta: f64 },

    #[error("offset {h:.6e} is not a positive integer multiple of the grid spacing {dx:.6e}")]
    NotGridMultiple { h: f64, dx: f64 },

    #[error("aliasing detected: relative energy {energy:.3e} in the top Fourier modes")]
    Aliased { energy: f64 },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("{0}")]
    Invalid(String),
}
