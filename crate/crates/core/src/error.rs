use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("state ({x}, {y}) lies outside the feasible set")]
    Infeasible { x: f64, y: f64 },

    #[error("inadmissible profile: h = {h} <= 0 at t = {t}")]
    Inadmissible { t: f64, h: f64 },

    #[error("cubic form undefined at corner t = {t} of a C2 profile")]
    CubicFormUndefined { t: f64 },

    #[error("radicand {value} is negative beyond clamping tolerance at (t, x, y) = ({t}, {x}, {y})")]
    Radicand { t: f64, x: f64, y: f64, value: f64 },

    #[error("integration fault at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("smoothing window {window} exceeds segment length {length}")]
    Smoothing { window: f64, length: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}
