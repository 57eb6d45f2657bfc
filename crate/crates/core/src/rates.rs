//! Phonon absorption/emission rates and cooling-limit estimates.
//!
//! A_∓ = x_zpf² S(±ω_m). The zero-point factor cancels analytically, so the
//! rates are built from [`reduced_tone_spectrum`] and never see `X_ZPF`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SystemParams, ToneSet};
use crate::response::reduced_tone_spectrum;

/// Cooling and heating rates of mode b for a given drive configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// A_−^k = x_zpf² S^k(ω_m), per tone (κ).
    pub a_minus_per_tone: Vec<f64>,
    /// A_+^k = x_zpf² S^k(−ω_m), per tone (κ).
    pub a_plus_per_tone: Vec<f64>,
    pub a_minus: f64,
    pub a_plus: f64,
    /// Γ_opt = Σ_k (A_−^k − A_+^k) (κ).
    pub gamma_opt: f64,
    /// Quantum backaction limit A_+/Γ_opt; `None` unless Γ_opt > 0.
    pub n_backaction: Option<f64>,
    /// Weak-coupling rate-equation estimate (γ n_th + A_+)/(γ + Γ_opt);
    /// `None` when antidamped. The covariance dynamics gives the
    /// authoritative value.
    pub n_final_estimate: Option<f64>,
    /// Γ_opt + γ ≤ 0: the optical field amplifies mode b and no finite
    /// occupation is reached.
    pub antidamped: bool,
}

/// Evaluates the spectrum of every tone at exactly ω = ±ω_m.
pub fn rates(params: &SystemParams, tones: &ToneSet) -> Result<RateReport> {
    params.validate()?;
    let n = tones.len();
    let w = params.omega_m;
    let a_minus_per_tone: Vec<f64> = (0..n)
        .map(|k| reduced_tone_spectrum(w, k, params, tones))
        .collect();
    let a_plus_per_tone: Vec<f64> = (0..n)
        .map(|k| reduced_tone_spectrum(-w, k, params, tones))
        .collect();
    let gamma_opt = a_minus_per_tone
        .iter()
        .zip(&a_plus_per_tone)
        .map(|(m, p)| m - p)
        .sum::<f64>();
    let a_minus = a_minus_per_tone.iter().sum::<f64>();
    let a_plus = a_plus_per_tone.iter().sum::<f64>();
    let n_backaction = (gamma_opt > 0.0).then(|| a_plus / gamma_opt);
    let damping = params.gamma + gamma_opt;
    let antidamped = damping <= 0.0;
    let n_final_estimate = (!antidamped).then(|| (params.gamma * params.n_th + a_plus) / damping);
    Ok(RateReport {
        a_minus_per_tone,
        a_plus_per_tone,
        a_minus,
        a_plus,
        gamma_opt,
        n_backaction,
        n_final_estimate,
        antidamped,
    })
}

/// |Γ_opt − (A_−^0 − A_+^{N−1})| / Γ_opt.
///
/// Measures how well the first tone's cooling and the last tone's heating
/// account for the whole net damping in a cascaded configuration.
pub fn cascade_dominance(params: &SystemParams, tones: &ToneSet) -> Result<f64> {
    let report = rates(params, tones)?;
    cascade_residual(&report)
}

pub fn cascade_residual(report: &RateReport) -> Result<f64> {
    if report.gamma_opt <= 0.0 {
        return Err(Error::Domain(format!(
            "cascade residual undefined for non-positive net damping {:e}",
            report.gamma_opt
        )));
    }
    let last = report.a_plus_per_tone.len() - 1;
    let approx = report.a_minus_per_tone[0] - report.a_plus_per_tone[last];
    Ok((report.gamma_opt - approx).abs() / report.gamma_opt)
}

/// Best single-mode backaction limit κ/(4ω_m) in the unresolved-sideband
/// regime, reached at Δ′ = −κ/2.
pub fn single_mode_limit(params: &SystemParams) -> f64 {
    params.kappa / (4.0 * params.omega_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{cascaded_tone_set, Tone};
    use crate::response::{chi_opt, tone_spectrum};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn base(omega_m: f64) -> SystemParams {
        SystemParams::from_quality_factors(
            omega_m,
            2.0,
            1.0,
            1e5,
            1e4,
            1e-3 * omega_m,
            1e-3,
            1e3,
            1e3 * omega_m / 2.0,
        )
        .unwrap()
    }

    #[test]
    fn gamma_opt_is_sum_of_per_tone_differences() {
        let p = base(0.02);
        let tones = cascaded_tone_set(0.02, 2.0, 0.02, &[Complex64::new(1e3, 0.0); 3]).unwrap();
        let r = rates(&p, &tones).unwrap();
        let mut acc = 0.0;
        for k in 0..3 {
            acc += r.a_minus_per_tone[k] - r.a_plus_per_tone[k];
        }
        assert_eq!(r.gamma_opt, acc);
    }

    #[test]
    fn rates_match_spectrum_samples() {
        let p = base(0.05);
        let tones = cascaded_tone_set(0.05, 2.0, 0.05, &[Complex64::new(1200.0, 0.0), Complex64::new(1600.0, 0.0)])
            .unwrap();
        let r = rates(&p, &tones).unwrap();
        for k in 0..2 {
            assert_eq!(r.a_minus_per_tone[k], tone_spectrum(0.05, k, &p, &tones));
            assert_eq!(r.a_plus_per_tone[k], tone_spectrum(-0.05, k, &p, &tones));
        }
    }

    #[test]
    fn resolved_sideband_backaction_limit() {
        // Δ′ = −ω_m with ω_m ≫ κ: n_ba = |χ(−ω_m)|²/(|χ(ω_m)|² − |χ(−ω_m)|²) → (κ/4ω_m)²
        let omega_m = 50.0;
        let p = SystemParams { g_c: 0.0, ..base(omega_m) };
        let tones = ToneSet::single(Tone::real(100.0, -omega_m));
        let r = rates(&p, &tones).unwrap();
        let lor = |w: f64| chi_opt(w, -omega_m, 1.0).norm_sqr();
        let brute = lor(-omega_m) / (lor(omega_m) - lor(-omega_m));
        assert!(r.a_minus > 1e4 * r.a_plus);
        assert_relative_eq!(r.n_backaction.unwrap(), brute, max_relative = 1e-9);
        assert_relative_eq!(r.n_backaction.unwrap(), (0.25 / omega_m).powi(2), max_relative = 1e-3);
    }

    #[test]
    fn unresolved_single_mode_limit() {
        let p = SystemParams { g_c: 0.0, ..base(0.003) };
        let tones = ToneSet::single(Tone::real(1e3, -0.5));
        let r = rates(&p, &tones).unwrap();
        let target = single_mode_limit(&p);
        assert_relative_eq!(target, 83.333_333_333_333_33, max_relative = 1e-14);
        assert_relative_eq!(r.n_backaction.unwrap(), target, max_relative = 3.0 * 0.003);
    }

    #[test]
    fn dark_cavity_gives_thermal_occupation() {
        let p = base(0.02);
        let tones = cascaded_tone_set(0.02, 2.0, 0.02, &[Complex64::new(0.0, 0.0); 2]).unwrap();
        let r = rates(&p, &tones).unwrap();
        assert_eq!(r.gamma_opt, 0.0);
        assert_eq!(r.n_backaction, None);
        assert_eq!(r.n_final_estimate, Some(p.n_th));
    }

    #[test]
    fn blue_single_tone_is_antidamped() {
        let p = SystemParams { g_c: 0.0, ..base(0.02) };
        let tones = ToneSet::single(Tone::real(1e5, 0.02));
        let r = rates(&p, &tones).unwrap();
        assert!(r.gamma_opt < 0.0);
        assert!(r.antidamped);
        assert_eq!(r.n_final_estimate, None);
        assert!(cascade_residual(&r).is_err());
    }

    #[test]
    fn cascade_residual_single_tone_is_zero() {
        let p = SystemParams { g_c: 0.0, ..base(0.02) };
        let tones = ToneSet::single(Tone::real(1e3, -0.02));
        assert_eq!(cascade_dominance(&p, &tones).unwrap(), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn estimate_lies_between_thermal_and_backaction(
                omega_m in 0.005f64..0.5, alpha in 10f64..2e3, n_th in 0f64..2e3,
                d0 in -1.0f64..-0.01,
            ) {
                let p = SystemParams { g_c: 0.0, n_th, ..base(omega_m) };
                let tones = ToneSet::single(Tone::real(alpha, d0));
                let r = rates(&p, &tones).unwrap();
                prop_assume!(r.gamma_opt > 0.0);
                let nf = r.n_final_estimate.unwrap();
                let nb = r.n_backaction.unwrap();
                prop_assert!(nb > 0.0);
                let tol = 1e-12 * nf.max(1.0);
                prop_assert!(nf >= nb.min(n_th) - tol && nf <= nb.max(n_th) + tol);
            }

            #[test]
            fn estimate_tends_to_thermal_without_light(omega_m in 0.005f64..0.5, n_th in 0f64..2e3, scale in 0f64..1e-6) {
                let p = SystemParams { n_th, ..base(omega_m) };
                let tones = cascaded_tone_set(omega_m, 2.0, omega_m, &[Complex64::new(scale, 0.0); 2]).unwrap();
                let r = rates(&p, &tones).unwrap();
                let nf = r.n_final_estimate.unwrap();
                prop_assert!((nf - n_th).abs() <= 1e-6 * n_th.max(1.0));
            }
        }
    }
}
