//! Crate-wide error type. Numeric payloads are reported as `f64` regardless of
//! the working scalar so the type stays object-safe and serializable.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("chart violation: |x|^2 = {norm2:.6e} >= R0^2 = {r0_sq:.6e} (north chart of the sphere)")]
    ChartViolation { norm2: f64, r0_sq: f64 },

    #[error("equator singularity: |x0| = {x0_abs:.6e} <= floor {floor:.6e}")]
    EquatorSingularity { x0_abs: f64, floor: f64 },

    #[error("origin singularity: |x| = {r:.6e} <= floor {floor:.6e}")]
    OriginSingularity { r: f64, floor: f64 },

    #[error("invalid anisotropy matrix: {0}")]
    InvalidT(String),

    #[error("constraint solve diverged: residual {residual:.3e} after {iters} Newton iterations")]
    NewtonDivergence { residual: f64, iters: usize },

    #[error("step {step} failed: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fiber momentum violation: |phi| = {value:.3e} > tol {tol:.3e} at sample {sample}")]
    FiberViolation { value: f64, tol: f64, sample: usize },

    #[error("no phase-space return below threshold {threshold:.3e}; closest approach {best:.3e} at t = {at:.6}")]
    NoReturnFound { threshold: f64, best: f64, at: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid specification: {0}")]
    Invalid(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
