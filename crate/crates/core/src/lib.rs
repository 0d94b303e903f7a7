//! Sharp comparison of Hilbert distance and centro-affine length on the
//! projective line: closed-form bounds, the value functions that certify
//! them, optimal trajectory synthesis and a command-line harness.

pub mod bellman;
pub mod bounds;
pub mod centroaffine;
pub mod cli;
pub mod control;
pub mod error;
pub mod par;
pub mod projective;
pub mod quad;

pub use error::{Error, Result};

/// Formatting used in every CSV: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
