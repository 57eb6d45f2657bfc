//! Linearised cooling of a mechanical mode by cascaded optomechanically
//! induced transparency.
//!
//! Units: κ = 1, ħ = 1. All frequencies, rates and times are in units of
//! κ and 1/κ respectively.

pub mod dynamics;
pub mod error;
pub mod meanfield;
pub mod ode;
pub mod oracle;
pub mod params;
pub mod rates;
pub mod response;
pub mod sweep;

/// Crate version recorded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use params::{SystemParams, Tone, ToneSet};

/// Round-trippable scientific formatting used in every CSV artifact.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
