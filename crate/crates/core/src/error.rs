use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("spectrum length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("stage violation at mode {mode}: {reason}")]
    StageViolation { mode: usize, reason: String },

    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },

    #[error("quadrature failure: {detail}")]
    QuadratureFailure { detail: String },

    #[error("no feasible starting point: {detail}")]
    InfeasibleStart { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}
