//! Parameter sweeps over the mechanical frequency.
//!
//! Every point is an independent task; points run on the current rayon pool
//! and are gathered in axis order, so results do not depend on the number
//! of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{steady_occupation, DynamicsConfig};
use crate::error::{Error, Result};
use crate::params::{Coupling, Detuning, SystemSpec, Tone, ToneSet, ToneTemplate};
use crate::rates::{rates, single_mode_limit, RateReport};

/// Values of the swept ω_m (κ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AxisSpec {
    Linear { start: f64, stop: f64, points: usize },
    Log { start: f64, stop: f64, points: usize },
    Values(Vec<f64>),
}

impl AxisSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        let values = match self {
            AxisSpec::Linear { start, stop, points } | AxisSpec::Log { start, stop, points } => {
                if *points < 2 {
                    return Err(Error::param("axis.points", "need at least 2 points"));
                }
                let log = matches!(self, AxisSpec::Log { .. });
                if log && !(*start > 0.0 && *stop > 0.0) {
                    return Err(Error::param("axis", "log spacing needs positive bounds"));
                }
                let (a, b) = if log { (start.ln(), stop.ln()) } else { (*start, *stop) };
                let step = (b - a) / (*points - 1) as f64;
                (0..*points)
                    .map(|k| {
                        let x = if k + 1 == *points { b } else { a + k as f64 * step };
                        if log {
                            // pin the ends exactly
                            match k {
                                0 => *start,
                                _ if k + 1 == *points => *stop,
                                _ => x.exp(),
                            }
                        } else {
                            x
                        }
                    })
                    .collect()
            }
            AxisSpec::Values(v) => v.clone(),
        };
        if values.is_empty() {
            return Err(Error::param("axis", "no points"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::param("axis", "omega_m values must be finite and > 0"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("axis", "values must be strictly increasing"));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Rate-equation estimates only, plus dynamics at the listed points.
    #[default]
    RatesOnly,
    /// Covariance steady state at every point.
    FullDynamics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub omega_m: f64,
    pub report: Option<RateReport>,
    pub gamma_opt: Option<f64>,
    pub n_estimate: Option<f64>,
    pub n_backaction: Option<f64>,
    pub n_dynamics: Option<f64>,
    pub stable: bool,
    /// Why a value is missing, if any is.
    pub failure: Option<String>,
    /// κ/(4ω_m), best single-mode backaction limit.
    pub reference: f64,
}

/// Inputs echoed into every result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepProvenance {
    pub system: SystemSpec,
    pub tones: ToneTemplate,
    pub axis: AxisSpec,
    pub mode: SweepMode,
    pub dynamics_points: Vec<usize>,
    pub dynamics: DynamicsConfig,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub provenance: SweepProvenance,
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(crate::fmt_f64).unwrap_or_else(|| "nan".into())
}

impl SweepResult {
    /// CSV with header
    /// `omega_m,gamma_opt,n_estimate,n_dynamics,stable,reference_kappa_over_4wm,n_backaction`;
    /// missing values are written as `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "omega_m,gamma_opt,n_estimate,n_dynamics,stable,reference_kappa_over_4wm,n_backaction\n",
        );
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                crate::fmt_f64(p.omega_m),
                csv_opt(p.gamma_opt),
                csv_opt(p.n_estimate),
                csv_opt(p.n_dynamics),
                p.stable,
                crate::fmt_f64(p.reference),
                csv_opt(p.n_backaction),
            ));
        }
        out
    }

    pub fn n_backaction(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.n_backaction).collect()
    }
}

fn evaluate(
    system: &SystemSpec,
    tones: &ToneTemplate,
    omega_m: f64,
    run_dynamics: bool,
    dynamics: &DynamicsConfig,
) -> SweepPoint {
    let mut point = SweepPoint {
        omega_m,
        report: None,
        gamma_opt: None,
        n_estimate: None,
        n_backaction: None,
        n_dynamics: None,
        stable: false,
        failure: None,
        reference: f64::NAN,
    };
    let resolved = system
        .with_omega_m(omega_m)
        .resolve()
        .and_then(|p| tones.resolve(&p).map(|t| (p, t)));
    let (params, set) = match resolved {
        Ok(v) => v,
        Err(e) => {
            point.failure = Some(e.to_string());
            return point;
        }
    };
    point.reference = single_mode_limit(&params);
    match rates(&params, &set) {
        Ok(r) => {
            point.gamma_opt = Some(r.gamma_opt);
            point.n_estimate = r.n_final_estimate;
            point.n_backaction = r.n_backaction;
            point.stable = !r.antidamped;
            if r.antidamped {
                point.failure = Some("antidamped: gamma + gamma_opt <= 0".into());
            }
            point.report = Some(r);
        }
        Err(e) => {
            point.failure = Some(e.to_string());
            return point;
        }
    }
    if run_dynamics {
        match steady_occupation(&params, &set, dynamics) {
            Ok(s) => point.n_dynamics = Some(s.n_b),
            Err(e) => {
                if matches!(e, Error::Unstable(_)) {
                    point.stable = false;
                }
                let prior = point.failure.take();
                point.failure = Some(match prior {
                    Some(p) => format!("{p}; dynamics: {e}"),
                    None => format!("dynamics: {e}"),
                });
            }
        }
    }
    point
}

/// Cooling limit along the ω_m axis. The tone template is re-resolved at
/// every point, so cascaded detunings follow ω_m.
pub fn sweep_cooling_limit(
    system: &SystemSpec,
    tones: &ToneTemplate,
    axis: &AxisSpec,
    mode: SweepMode,
    dynamics_points: &[usize],
    dynamics: &DynamicsConfig,
) -> Result<SweepResult> {
    let values = axis.values()?;
    if let Some(&bad) = dynamics_points.iter().find(|&&k| k >= values.len()) {
        return Err(Error::param(
            "dynamics_points",
            format!("index {bad} outside an axis of {} points", values.len()),
        ));
    }
    let points: Vec<SweepPoint> = values
        .par_iter()
        .enumerate()
        .map(|(k, &w)| {
            let run = mode == SweepMode::FullDynamics || dynamics_points.contains(&k);
            evaluate(system, tones, w, run, dynamics)
        })
        .collect();
    Ok(SweepResult {
        axis: values,
        points,
        provenance: SweepProvenance {
            system: system.clone(),
            tones: tones.clone(),
            axis: axis.clone(),
            mode,
            dynamics_points: dynamics_points.to_vec(),
            dynamics: *dynamics,
            version: crate::VERSION.into(),
        },
    })
}

/// Γ_opt along the ω_m axis. Without control the control coupling is
/// removed and only the first tone is kept, red-detuned at Δ′ = −ω_m.
pub fn sweep_gamma_opt(
    system: &SystemSpec,
    tones: &ToneTemplate,
    axis: &AxisSpec,
    with_control: bool,
) -> Result<SweepResult> {
    let (system, tones) = if with_control {
        (system.clone(), tones.clone())
    } else {
        single_mode_reference(system, tones)?
    };
    sweep_cooling_limit(
        &system,
        &tones,
        axis,
        SweepMode::RatesOnly,
        &[],
        &DynamicsConfig::default(),
    )
}

/// Template for the conventional single-mode comparison: g_c = 0 and the
/// first tone alone at Δ′ = −ω_m.
pub fn single_mode_reference(
    system: &SystemSpec,
    tones: &ToneTemplate,
) -> Result<(SystemSpec, ToneTemplate)> {
    let alpha = match tones {
        ToneTemplate::Explicit(set) => set.tones()[0].alpha,
        ToneTemplate::Cascaded { alphas, .. } => *alphas
            .first()
            .ok_or_else(|| Error::param("tones.alphas", "must not be empty"))?,
    };
    let system = SystemSpec {
        g_c: Coupling::Absolute(0.0),
        ..system.clone()
    };
    let tones = ToneTemplate::Cascaded {
        delta_0_prime: Detuning::OmegaMMultiple(-1.0),
        alphas: vec![alpha],
    };
    Ok((system, tones))
}

/// Tone set for the single-mode comparison at fixed parameters.
pub fn single_red_tone(alpha: f64, omega_m: f64) -> ToneSet {
    ToneSet::single(Tone::real(alpha, -omega_m))
}

/// Runs `f` on a pool with `workers` threads, or on the global pool.
pub fn with_workers<T, F>(workers: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::param("workers", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::param("workers", e.to_string())),
    }
}
