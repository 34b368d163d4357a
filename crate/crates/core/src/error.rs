use thiserror::Error;

/// Errors raised by the dynamics, simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("motor index {0} out of range (expected 1..=4)")]
    InvalidMotorIndex(usize),

    #[error("matrix is not a rotation: orthonormality error {orthonormality:.3e}, det {det:.12}")]
    NotARotation { orthonormality: f64, det: f64 },

    #[error("matrix is degenerate and has no nearby rotation: {0}")]
    Degenerate(String),

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("outside model validity: {0}")]
    ModelValidity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hover trim failed after {iterations} iterations: force residual {force_residual:.3e} N, torque residual {torque_residual:.3e} N·m")]
    TrimFailure {
        iterations: usize,
        force_residual: f64,
        torque_residual: f64,
    },

    #[error("integration diverged at t = {time:.6} s: {reason}")]
    Divergence { time: f64, reason: String },

    #[error("at t = {time:.6} s: {source}")]
    AtTime { time: f64, source: Box<Error> },

    #[error("invalid time step {dt} s (must satisfy 0 < dt <= {max} s)")]
    InvalidStep { dt: f64, max: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
