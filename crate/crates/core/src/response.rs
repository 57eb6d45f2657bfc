//! Susceptibilities and the multi-tone quantum noise spectrum of the
//! optical force acting on mode b.
//!
//! With tones j = 0..N−1 the spectrum splits into per-tone parts
//!
//! ```text
//! S^j(ω) = g²/x_zpf² · |α_j χ̃_j(ω)|² · [κ + g_c² Σ_k |α_k|² χ̃_mc(ω + Δ′_j − Δ′_k)]
//! χ̃_j⁻¹(ω) = χ_j⁻¹(ω) + g_c² Σ_k |α_k|² [χ_mc(ω + Δ′_j − Δ′_k) + χ_mc*(−ω − Δ′_j + Δ′_k)]
//! ```
//!
//! Every sample is a closed-form expression, so grids can be refined or
//! evaluated in any order without changing values.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::params::{SystemParams, ToneSet, X_ZPF};

/// Optical susceptibility χ_j(ω) = 1 / (−i(ω + Δ′) + κ/2).
pub fn chi_opt(omega: f64, delta_prime: f64, kappa: f64) -> Complex64 {
    Complex64::new(kappa / 2.0, -(omega + delta_prime)).inv()
}

/// Control-mode susceptibility χ_mc(ω) = 1 / (−i(ω − ω_mc) + γ_c/2).
pub fn chi_mech(omega: f64, omega_mc: f64, gamma_c: f64) -> Complex64 {
    Complex64::new(gamma_c / 2.0, -(omega - omega_mc)).inv()
}

/// Thermal noise kernel of the control mode,
/// γ_c(n_c,th + 1)|χ_mc(ω)|² + γ_c n_c,th |χ_mc(−ω)|².
pub fn chi_mc_tilde(omega: f64, params: &SystemParams) -> f64 {
    let p = params;
    let pos = chi_mech(omega, p.omega_mc, p.gamma_c).norm_sqr();
    let neg = chi_mech(-omega, p.omega_mc, p.gamma_c).norm_sqr();
    p.gamma_c * (p.n_c_th + 1.0) * pos + p.gamma_c * p.n_c_th * neg
}

/// Dressed optical susceptibility χ̃_j(ω) of tone `j`.
///
/// # Panics
/// If `j` is not a valid tone index.
pub fn chi_tilde(omega: f64, j: usize, params: &SystemParams, tones: &ToneSet) -> Complex64 {
    let p = params;
    let tj = &tones.tones()[j];
    let bare_inv = Complex64::new(p.kappa / 2.0, -(omega + tj.delta_prime));
    if p.g_c == 0.0 {
        return bare_inv.inv();
    }
    let gc2 = p.g_c * p.g_c;
    let dressing: Complex64 = tones
        .iter()
        .map(|tk| {
            let shift = omega + tj.delta_prime - tk.delta_prime;
            let pair =
                chi_mech(shift, p.omega_mc, p.gamma_c) + chi_mech(-shift, p.omega_mc, p.gamma_c).conj();
            pair * (gc2 * tk.photons())
        })
        .sum();
    (bare_inv + dressing).inv()
}

/// x_zpf² S^j(ω): the per-tone spectrum with the zero-point factor removed.
///
/// Rates are built from this quantity directly, so they do not depend on
/// the value of `X_ZPF`.
pub fn reduced_tone_spectrum(omega: f64, j: usize, params: &SystemParams, tones: &ToneSet) -> f64 {
    let p = params;
    let tj = &tones.tones()[j];
    let gc2 = p.g_c * p.g_c;
    let bath = if p.g_c == 0.0 {
        0.0
    } else {
        tones
            .iter()
            .map(|tk| {
                gc2 * tk.photons() * chi_mc_tilde(omega + tj.delta_prime - tk.delta_prime, p)
            })
            .sum()
    };
    let amp = (tj.alpha * chi_tilde(omega, j, p, tones)).norm_sqr();
    p.g * p.g * amp * (p.kappa + bath)
}

/// S^j(ω) for tone `j`.
pub fn tone_spectrum(omega: f64, j: usize, params: &SystemParams, tones: &ToneSet) -> f64 {
    reduced_tone_spectrum(omega, j, params, tones) / (X_ZPF * X_ZPF)
}

/// S(ω) = Σ_j S^j(ω).
pub fn total_spectrum(omega: f64, params: &SystemParams, tones: &ToneSet) -> f64 {
    (0..tones.len())
        .map(|j| tone_spectrum(omega, j, params, tones))
        .sum()
}

/// Sampled spectrum over a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSeries {
    /// Frequencies (κ), sorted ascending.
    pub omega_grid: Vec<f64>,
    /// `per_tone[j][i]` is S^j at `omega_grid[i]`.
    pub per_tone: Vec<Vec<f64>>,
    /// Σ_j S^j at each grid point.
    pub total: Vec<f64>,
}

impl SpectrumSeries {
    /// CSV with header `omega,S_total,S_0,...,S_{N-1}` and 17 significant
    /// digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,S_total");
        for j in 0..self.per_tone.len() {
            out.push_str(&format!(",S_{j}"));
        }
        out.push('\n');
        for (i, w) in self.omega_grid.iter().enumerate() {
            out.push_str(&crate::fmt_f64(*w));
            out.push(',');
            out.push_str(&crate::fmt_f64(self.total[i]));
            for series in &self.per_tone {
                out.push(',');
                out.push_str(&crate::fmt_f64(series[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates every tone's spectrum on `omega_grid`, in parallel over grid
/// points.
///
/// The grid is expected sorted ascending; values are computed pointwise so
/// the order only matters for consumers.
pub fn spectrum(omega_grid: &[f64], params: &SystemParams, tones: &ToneSet) -> SpectrumSeries {
    let n = tones.len();
    let rows: Vec<Vec<f64>> = omega_grid
        .par_iter()
        .map(|&w| (0..n).map(|j| tone_spectrum(w, j, params, tones)).collect())
        .collect();
    let mut per_tone = vec![Vec::with_capacity(omega_grid.len()); n];
    let mut total = Vec::with_capacity(omega_grid.len());
    for row in rows {
        total.push(row.iter().sum());
        for (j, v) in row.into_iter().enumerate() {
            per_tone[j].push(v);
        }
    }
    SpectrumSeries {
        omega_grid: omega_grid.to_vec(),
        per_tone,
        total,
    }
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
                .collect()
        }
    }
}

/// Grid indices that are strict local maxima or minima of `values`.
pub fn local_extrema(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| {
            let (l, m, r) = (values[i - 1], values[i], values[i + 1]);
            (m > l && m > r) || (m < l && m < r)
        })
        .collect()
}
