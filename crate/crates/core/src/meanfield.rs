//! Classical intracavity amplitudes from physical drive strengths.
//!
//! Each drive j is treated as an independent steady-state response of the
//! cavity at its shifted detuning,
//!
//! ```text
//! α_j = −i Ω_j / (κ/2 − i Δ′_j),    Δ′_j = Δ_j + Δ_om,
//! Δ_om = 2 (g²/ω_m + g_c²/ω_mc) Σ_j |α_j|²,
//! ```
//!
//! solved jointly for Δ_om by damped fixed-point iteration. Beat-note terms
//! between tones (mean-field components oscillating at the two-photon
//! detuning) are neglected.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SystemParams, Tone, ToneSet};

pub const MAX_ITERATIONS: usize = 10_000;
pub const DAMPING: f64 = 0.5;
pub const RELATIVE_TOLERANCE: f64 = 1e-12;

/// A coherent drive in the frame rotating at the cavity frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    /// Bare detuning Δ_j = ω_j − ω_c (κ).
    pub omega_drive_detuning: f64,
    /// Drive strength Ω_j (κ).
    pub strength: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanField {
    pub tones: ToneSet,
    pub delta_om: f64,
    pub iterations: usize,
}

fn amplitude(params: &SystemParams, drive: &DriveSpec, delta_prime: f64) -> Complex64 {
    -Complex64::i() * drive.strength / Complex64::new(params.kappa / 2.0, -delta_prime)
}

fn shift_map(params: &SystemParams, drives: &[DriveSpec], delta_om: f64) -> f64 {
    let photons: f64 = drives
        .iter()
        .map(|d| amplitude(params, d, d.omega_drive_detuning + delta_om).norm_sqr())
        .sum();
    params.static_shift(photons)
}

pub fn solve_mean_field(params: &SystemParams, drives: &[DriveSpec]) -> Result<MeanField> {
    params.validate()?;
    if drives.is_empty() {
        return Err(Error::param("drives", "at least one drive is required"));
    }
    for (j, d) in drives.iter().enumerate() {
        let finite = d.omega_drive_detuning.is_finite()
            && d.strength.re.is_finite()
            && d.strength.im.is_finite();
        if !finite {
            return Err(Error::param(format!("drives[{j}]"), "fields must be finite"));
        }
    }

    let mut delta_om = 0.0;
    let mut iterations = 0;
    loop {
        let next = shift_map(params, drives, delta_om);
        let residual = (next - delta_om).abs();
        if residual <= RELATIVE_TOLERANCE * delta_om.abs() || residual == 0.0 {
            break;
        }
        if iterations == MAX_ITERATIONS {
            return Err(Error::MeanFieldNonconvergent {
                iterations,
                residual: residual / delta_om.abs().max(f64::MIN_POSITIVE),
            });
        }
        delta_om = (1.0 - DAMPING) * delta_om + DAMPING * next;
        iterations += 1;
    }

    let tones = drives
        .iter()
        .map(|d| {
            let delta_prime = d.omega_drive_detuning + delta_om;
            Tone::new(amplitude(params, d, delta_prime), delta_prime)
        })
        .collect();
    Ok(MeanField {
        tones: ToneSet::new(tones)?,
        delta_om,
        iterations,
    })
}

/// Drives that produce the given linearised tones; inverse of
/// [`solve_mean_field`].
pub fn drives_for(params: &SystemParams, tones: &ToneSet) -> Vec<DriveSpec> {
    let delta_om = params.static_shift(tones.total_photons());
    tones
        .iter()
        .map(|t| DriveSpec {
            omega_drive_detuning: t.delta_prime - delta_om,
            strength: Complex64::i() * t.alpha * Complex64::new(params.kappa / 2.0, -t.delta_prime),
        })
        .collect()
}
