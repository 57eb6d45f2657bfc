//! Task execution. All artifacts are produced in memory first so that a
//! failed run leaves nothing behind.

use std::path::Path;

use serde::Serialize;

use omit_core::dynamics::{evolve, MomentState};
use omit_core::ode::StepStats;
use omit_core::oracle::compare_with_covariance;
use omit_core::rates::{cascade_residual, rates, single_mode_limit, RateReport};
use omit_core::response::spectrum;
use omit_core::sweep::{single_mode_reference, sweep_cooling_limit, sweep_gamma_opt};
use omit_core::{Error, SystemParams, ToneSet};

use crate::config::{
    EvolveTask, OracleTask, Provenance, RatesTask, RunConfig, SpectrumTask, SweepQuantity,
    SweepTask, Task, TonesBlock,
};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_UNSTABLE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("instability: {0}")]
    Unstable(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Numeric(_) => EXIT_NUMERIC,
            RunError::Unstable(_) => EXIT_UNSTABLE,
            RunError::Io(_) => 1,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::Domain(_) => RunError::Config(e.to_string()),
            Error::Unstable(_) => RunError::Unstable(e.to_string()),
            Error::MeanFieldNonconvergent { .. }
            | Error::Integration { .. }
            | Error::Physicality { .. }
            | Error::NotConverged { .. }
            | Error::Truncation(_) => RunError::Numeric(e.to_string()),
        }
    }
}

/// Named file contents.
pub type Artifact = (String, Vec<u8>);

#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Set when the run finished but the dynamics diverged; artifacts are
    /// still written.
    pub instability: Option<String>,
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serialisable");
    out.push(b'\n');
    out
}

/// Runs the configured task and returns every artifact including
/// `manifest.json`.
pub fn run(config: &RunConfig) -> Result<Outcome, RunError> {
    config.validate()?;
    let params = config.system.resolve()?;
    let (tones, meanfield) = config.tones.resolve(&params)?;
    log::info!("task {} with {} tone(s)", config.task.name(), tones.len());

    let mut instability = None;
    let mut artifacts = match &config.task {
        Task::Spectrum(t) => run_spectrum(t, &params, &tones)?,
        Task::Rates(t) => run_rates(t, config, &params, &tones)?,
        Task::Evolve(t) => {
            let (a, diverged) = run_evolve(t, &params, &tones)?;
            if diverged {
                instability = Some("moments exceeded the divergence threshold".to_string());
            }
            a
        }
        Task::OracleCheck(t) => run_oracle(t, &params, &tones)?,
        Task::Sweep(t) => run_sweep(t, config)?,
        Task::Meanfield(_) => {
            let mf = meanfield.expect("validated drives block");
            let alpha_config = RunConfig {
                tones: TonesBlock::Explicit(mf.tones.clone()),
                task: Task::Rates(RatesTask::default()),
                output: None,
                provenance: None,
                ..config.clone()
            };
            vec![
                ("meanfield.json".into(), json(&mf)),
                ("alpha_config.json".into(), json(&alpha_config)),
            ]
        }
    };

    let mut names: Vec<String> = artifacts.iter().map(|(n, _)| n.clone()).collect();
    names.push("manifest.json".into());
    let manifest = RunConfig {
        output: None,
        provenance: Some(Provenance {
            library_version: omit_core::VERSION.into(),
            params,
            tones,
            artifacts: names,
        }),
        ..config.clone()
    };
    artifacts.push(("manifest.json".into(), json(&manifest)));
    Ok(Outcome {
        artifacts,
        instability,
    })
}

/// Writes artifacts into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in artifacts {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn run_spectrum(task: &SpectrumTask, params: &SystemParams, tones: &ToneSet) -> Result<Vec<Artifact>, RunError> {
    let grid = task.grid()?;
    let series = spectrum(&grid, params, tones);
    Ok(vec![("spectrum.csv".into(), series.to_csv().into_bytes())])
}

#[derive(Serialize)]
struct RatesOutput {
    report: RateReport,
    cascade_residual: Option<f64>,
    single_mode_limit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_mode: Option<RateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    enhancement: Option<f64>,
}

fn run_rates(task: &RatesTask, config: &RunConfig, params: &SystemParams, tones: &ToneSet) -> Result<Vec<Artifact>, RunError> {
    let report = rates(params, tones)?;
    let residual = if tones.len() > 1 {
        cascade_residual(&report).ok()
    } else {
        None
    };
    let single_mode = if task.compare_single_mode {
        let template = match &config.tones {
            TonesBlock::Drives(_) => omit_core::params::ToneTemplate::Explicit(tones.clone()),
            other => other.template().expect("non-drive block"),
        };
        let (spec, tmpl) = single_mode_reference(&config.system, &template)?;
        let p = spec.resolve()?;
        Some(rates(&p, &tmpl.resolve(&p)?)?)
    } else {
        None
    };
    let enhancement = single_mode.as_ref().map(|s| report.gamma_opt / s.gamma_opt);
    let out = RatesOutput {
        single_mode_limit: single_mode_limit(params),
        cascade_residual: residual,
        report,
        single_mode,
        enhancement,
    };
    Ok(vec![("rates.json".into(), json(&out))])
}

#[derive(Serialize)]
struct EvolveSummary {
    diverged: bool,
    converged_tail: Option<f64>,
    final_t: f64,
    final_n_b: f64,
    final_n_c: f64,
    final_n_a: f64,
    samples: usize,
    window_length: f64,
    window_averages: Vec<f64>,
    stats: StepStats,
    max_hermiticity_defect: f64,
    min_eigenvalue_seen: f64,
    rates: Option<RateReport>,
}

fn run_evolve(task: &EvolveTask, params: &SystemParams, tones: &ToneSet) -> Result<(Vec<Artifact>, bool), RunError> {
    let initial = match task.initial {
        Some(o) => MomentState::thermal(o.n_a, o.n_b, o.n_c),
        None => MomentState::initial(params),
    };
    let traj = evolve(params, tones, &initial, task.t_end, task.output_stride, &task.dynamics)?;
    let last = *traj.samples.last().expect("initial sample");
    let summary = EvolveSummary {
        diverged: traj.diverged,
        converged_tail: traj.converged_tail,
        final_t: last.t,
        final_n_b: last.n_b,
        final_n_c: last.n_c,
        final_n_a: last.n_a,
        samples: traj.samples.len(),
        window_length: traj.window_length,
        window_averages: traj.window_averages.clone(),
        stats: traj.stats,
        max_hermiticity_defect: traj.max_hermiticity_defect,
        min_eigenvalue_seen: traj.min_eigenvalue_seen,
        rates: rates(params, tones).ok(),
    };
    Ok((
        vec![
            ("trajectory.csv".into(), traj.to_csv().into_bytes()),
            ("evolve_summary.json".into(), json(&summary)),
        ],
        traj.diverged,
    ))
}

#[derive(Serialize)]
struct OracleSummary {
    dims: [usize; 3],
    max_relative_error: f64,
    max_trace_error: f64,
    max_hermiticity_defect: f64,
    min_eigenvalue: f64,
    max_tail: [f64; 3],
    stats: StepStats,
}

fn run_oracle(task: &OracleTask, params: &SystemParams, tones: &ToneSet) -> Result<Vec<Artifact>, RunError> {
    let i = task.initial;
    let cmp = compare_with_covariance(params, tones, &task.fock, [i.n_a, i.n_b, i.n_c])?;
    let summary = OracleSummary {
        dims: cmp.dims,
        max_relative_error: cmp.max_relative_error,
        max_trace_error: cmp.oracle.max_trace_error,
        max_hermiticity_defect: cmp.oracle.max_hermiticity_defect,
        min_eigenvalue: cmp.oracle.min_eigenvalue,
        max_tail: cmp.oracle.max_tail,
        stats: cmp.oracle.stats,
    };
    Ok(vec![
        ("oracle_check.csv".into(), cmp.to_csv().into_bytes()),
        ("oracle_summary.json".into(), json(&summary)),
    ])
}

fn run_sweep(task: &SweepTask, config: &RunConfig) -> Result<Vec<Artifact>, RunError> {
    let template = config.tones.template().expect("validated tones");
    match task.quantity {
        SweepQuantity::CoolingLimit => {
            let result = sweep_cooling_limit(
                &config.system,
                &template,
                &task.axis,
                task.mode,
                &task.dynamics_points,
                &task.dynamics,
            )?;
            Ok(vec![
                ("sweep.csv".into(), result.to_csv().into_bytes()),
                ("sweep.json".into(), json(&result)),
            ])
        }
        SweepQuantity::GammaOpt => {
            let with = sweep_gamma_opt(&config.system, &template, &task.axis, true)?;
            let without = sweep_gamma_opt(&config.system, &template, &task.axis, false)?;
            let mut csv = String::from("omega_m,gamma_opt_with_control,gamma_opt_without_control,ratio\n");
            for (a, b) in with.points.iter().zip(&without.points) {
                let f = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_else(|| "nan".into());
                let ratio = a.gamma_opt.zip(b.gamma_opt).map(|(x, y)| x / y);
                csv.push_str(&format!("{:.16e},{},{},{}\n", a.omega_m, f(a.gamma_opt), f(b.gamma_opt), f(ratio)));
            }
            Ok(vec![
                ("gamma_opt.csv".into(), csv.into_bytes()),
                ("gamma_opt_with_control.json".into(), json(&with)),
                ("gamma_opt_without_control.json".into(), json(&without)),
            ])
        }
    }
}
