//! Run configuration schema.
//!
//! Complex amplitudes are written as `[re, im]`. Every block rejects
//! unknown keys. A written `manifest.json` is itself a valid config.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use omit_core::dynamics::DynamicsConfig;
use omit_core::meanfield::{solve_mean_field, DriveSpec, MeanField};
use omit_core::oracle::FockConfig;
use omit_core::params::{Detuning, SystemSpec, ToneTemplate};
use omit_core::sweep::{AxisSpec, SweepMode};
use omit_core::{Error, Result, SystemParams, ToneSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub tones: TonesBlock,
    pub task: Task,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Written by the runner into manifests; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TonesBlock {
    /// Tones given directly as (α_j, Δ′_j).
    Explicit(ToneSet),
    /// Δ′_k = Δ′_0 − k(ω_mc + ω_m), one tone per amplitude.
    Cascaded {
        delta_0_prime: Detuning,
        alphas: Vec<Complex64>,
    },
    /// Physical drives; amplitudes and the static shift are solved for.
    Drives(Vec<DriveSpec>),
}

impl TonesBlock {
    /// Template for repeated resolution at different ω_m, if the block
    /// does not need a mean-field solve.
    pub fn template(&self) -> Option<ToneTemplate> {
        match self {
            TonesBlock::Explicit(set) => Some(ToneTemplate::Explicit(set.clone())),
            TonesBlock::Cascaded {
                delta_0_prime,
                alphas,
            } => Some(ToneTemplate::Cascaded {
                delta_0_prime: *delta_0_prime,
                alphas: alphas.clone(),
            }),
            TonesBlock::Drives(_) => None,
        }
    }

    pub fn resolve(&self, params: &SystemParams) -> Result<(ToneSet, Option<MeanField>)> {
        match self {
            TonesBlock::Drives(drives) => {
                let mf = solve_mean_field(params, drives)?;
                Ok((mf.tones.clone(), Some(mf)))
            }
            other => Ok((other.template().unwrap().resolve(params)?, None)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Spectrum(SpectrumTask),
    Rates(RatesTask),
    Evolve(EvolveTask),
    OracleCheck(OracleTask),
    Sweep(SweepTask),
    Meanfield(MeanfieldTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Spectrum(_) => "spectrum",
            Task::Rates(_) => "rates",
            Task::Evolve(_) => "evolve",
            Task::OracleCheck(_) => "oracle-check",
            Task::Sweep(_) => "sweep",
            Task::Meanfield(_) => "meanfield",
        }
    }
}

/// Uniform grid plus optional dense patches around features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumTask {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    #[serde(default)]
    pub refine: Vec<Refine>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refine {
    pub center: f64,
    pub half_width: f64,
    pub points: usize,
}

impl SpectrumTask {
    /// Sorted union of the base grid and all patches, duplicates removed.
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.omega_min.is_finite() && self.omega_max.is_finite() && self.omega_min < self.omega_max) {
            return Err(Error::param("task.spectrum", "need finite omega_min < omega_max"));
        }
        if self.points < 2 {
            return Err(Error::param("task.spectrum.points", "need at least 2 points"));
        }
        let mut grid = omit_core::response::linear_grid(self.omega_min, self.omega_max, self.points);
        for (k, r) in self.refine.iter().enumerate() {
            if !(r.center.is_finite() && r.half_width > 0.0 && r.half_width.is_finite()) || r.points < 2 {
                return Err(Error::param(
                    format!("task.spectrum.refine[{k}]"),
                    "need finite center, half_width > 0 and at least 2 points",
                ));
            }
            grid.extend(omit_core::response::linear_grid(
                r.center - r.half_width,
                r.center + r.half_width,
                r.points,
            ));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesTask {
    /// Also report Γ_opt for g_c = 0 with the first tone at Δ′ = −ω_m.
    #[serde(default)]
    pub compare_single_mode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occupations {
    pub n_a: f64,
    pub n_b: f64,
    pub n_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveTask {
    pub t_end: f64,
    pub output_stride: f64,
    /// Thermal initial occupations; default is cavity vacuum with both
    /// mechanical modes at their bath occupations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Occupations>,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTask {
    #[serde(default)]
    pub fock: FockConfig,
    #[serde(default = "vacuum")]
    pub initial: Occupations,
}

fn vacuum() -> Occupations {
    Occupations {
        n_a: 0.0,
        n_b: 0.0,
        n_c: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepQuantity {
    /// Rate estimates and steady occupations.
    #[default]
    CoolingLimit,
    /// Γ_opt with and without the control mode.
    GammaOpt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTask {
    pub axis: AxisSpec,
    #[serde(default)]
    pub quantity: SweepQuantity,
    #[serde(default)]
    pub mode: SweepMode,
    /// Axis indices verified by full dynamics in rates-only mode.
    #[serde(default)]
    pub dynamics_points: Vec<usize>,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldTask {}

/// Resolved quantities echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub library_version: String,
    pub params: SystemParams,
    pub tones: ToneSet,
    pub artifacts: Vec<String>,
}

/// Parses and fully validates a config without touching the filesystem
/// beyond reading it.
pub fn parse(text: &str) -> std::result::Result<RunConfig, String> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

impl RunConfig {
    /// Checks everything that can be checked before any numerics run.
    pub fn validate(&self) -> Result<()> {
        let params = self.system.resolve()?;
        match &self.task {
            Task::Sweep(sweep) => {
                let template = self.tones.template().ok_or_else(|| {
                    Error::param("tones", "sweeps need explicit or cascaded tones")
                })?;
                let axis = sweep.axis.values()?;
                for &w in &axis {
                    template.resolve(&self.system.with_omega_m(w).resolve()?)?;
                }
                if let Some(&k) = sweep.dynamics_points.iter().find(|&&k| k >= axis.len()) {
                    return Err(Error::param(
                        "task.sweep.dynamics_points",
                        format!("index {k} outside an axis of {} points", axis.len()),
                    ));
                }
            }
            Task::Meanfield(_) => {
                if !matches!(self.tones, TonesBlock::Drives(_)) {
                    return Err(Error::param("tones", "meanfield needs a drives block"));
                }
            }
            Task::Spectrum(s) => {
                s.grid()?;
            }
            Task::Evolve(e) => {
                if !(e.t_end > 0.0 && e.t_end.is_finite()) {
                    return Err(Error::param("task.evolve.t_end", "must be finite and > 0"));
                }
                if !(e.output_stride > 0.0 && e.output_stride.is_finite()) {
                    return Err(Error::param("task.evolve.output_stride", "must be finite and > 0"));
                }
                if let Some(o) = e.initial {
                    for v in [o.n_a, o.n_b, o.n_c] {
                        if !(v >= 0.0 && v.is_finite()) {
                            return Err(Error::param("task.evolve.initial", "occupations must be finite and >= 0"));
                        }
                    }
                }
            }
            Task::OracleCheck(o) => {
                if !(o.fock.t_end > 0.0 && o.fock.output_stride > 0.0) {
                    return Err(Error::param("task.oracle-check.fock", "t_end and output_stride must be > 0"));
                }
                let dim: usize = o.fock.dims.iter().product();
                if o.fock.dims.iter().any(|&d| d < 2) || dim > o.fock.budget {
                    return Err(Error::param(
                        "task.oracle-check.fock.dims",
                        format!("each dim must be >= 2 and the product {dim} within budget {}", o.fock.budget),
                    ));
                }
            }
            Task::Rates(_) => {}
        }
        if !matches!(self.tones, TonesBlock::Drives(_)) {
            self.tones.resolve(&params)?;
        }
        Ok(())
    }
}
