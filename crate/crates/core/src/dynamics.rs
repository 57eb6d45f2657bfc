//! Exact second-moment dynamics of the linearised three-mode system.
//!
//! With x = (a, b, c, a†, b†, c†) the fluctuation operators obey linear
//! Langevin equations ẋ = M(t) x + noise, so the moment matrix
//! C_ij = ⟨x_i x_j⟩ evolves in closed form,
//!
//! ```text
//! dC/dt = M(t) C + C M(t)ᵀ + D.
//! ```
//!
//! M(t) carries the time-dependent couplings G(t) = g Σ_j α_j e^{−iΔ′_j t}
//! and G_c(t) = g_c Σ_j α_j e^{−iΔ′_j t} without any rotating-wave
//! approximation; D holds the Lindblad diffusion constants. First moments
//! of the fluctuations vanish identically and are not evolved.
//!
//! All 36 entries of C are integrated even though only 21 real numbers are
//! independent. The redundancy is checked at every step: C must satisfy
//! C_{i+3,j+3} = C_ji* and the canonical commutators, and the matrix
//! P_ij = ⟨x_i† x_j⟩ must stay positive semidefinite (the uncertainty
//! principle, equivalently V + iΩ/2 ≥ 0 for the quadrature covariance V).

use std::f64::consts::PI;

use nalgebra::{Matrix6, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeError, OdeSystem, StepControl, StepStats};
use crate::params::{SystemParams, ToneSet};
use crate::rates::rates;

pub type CMatrix6 = Matrix6<Complex64>;

pub const A: usize = 0;
pub const B: usize = 1;
pub const C: usize = 2;
const DAG: usize = 3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);


/// ⟨[x_i, x_j]⟩ for the ordering (a, b, c, a†, b†, c†).
fn commutator(i: usize, j: usize) -> f64 {
    if i + DAG == j {
        1.0
    } else if j + DAG == i {
        -1.0
    } else {
        0.0
    }
}

/// Index of x_i†.
fn dagger(i: usize) -> usize {
    (i + DAG) % 6
}

/// Second moments of the fluctuation operators at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    /// Time (1/κ).
    pub t: f64,
    /// `moments[(i, j)] = ⟨x_i x_j⟩`.
    pub moments: CMatrix6,
}

impl MomentState {
    /// Uncorrelated thermal states with the given occupations.
    pub fn thermal(n_a: f64, n_b: f64, n_c: f64) -> Self {
        let mut m = CMatrix6::zeros();
        for (mode, n) in [(A, n_a), (B, n_b), (C, n_c)] {
            m[(mode, mode + DAG)] = Complex64::new(n + 1.0, 0.0);
            m[(mode + DAG, mode)] = Complex64::new(n, 0.0);
        }
        MomentState { t: 0.0, moments: m }
    }

    /// Cavity vacuum, both mechanical modes at their bath occupations.
    pub fn initial(params: &SystemParams) -> Self {
        MomentState::thermal(0.0, params.n_th, params.n_c_th)
    }

    fn occupation(&self, mode: usize) -> f64 {
        self.moments[(mode + DAG, mode)].re
    }

    /// Intracavity fluctuation photon number ⟨a†a⟩.
    pub fn n_a(&self) -> f64 {
        self.occupation(A)
    }

    pub fn n_b(&self) -> f64 {
        self.occupation(B)
    }

    pub fn n_c(&self) -> f64 {
        self.occupation(C)
    }

    pub fn max_abs(&self) -> f64 {
        self.moments.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt()
    }

    /// Largest violation of the conjugation and commutator identities.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.moments;
        let mut worst = 0.0f64;
        for i in 0..6 {
            for j in 0..6 {
                let conj = m[(dagger(i), dagger(j))] - m[(j, i)].conj();
                let comm = m[(i, j)] - m[(j, i)] - Complex64::new(commutator(i, j), 0.0);
                worst = worst.max(conj.norm_sqr()).max(comm.norm_sqr());
            }
        }
        worst.sqrt()
    }

    /// P_ij = ⟨x_i† x_j⟩, Hermitian part.
    pub fn normal_matrix(&self) -> CMatrix6 {
        let p = CMatrix6::from_fn(|i, j| self.moments[(dagger(i), j)]);
        (p + p.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Smallest eigenvalue of [`MomentState::normal_matrix`]; nonnegative
    /// for every physical state.
    pub fn min_physical_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.normal_matrix())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Cheap test of `min_physical_eigenvalue() > -tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        let p = self.normal_matrix();
        let mut l = CMatrix6::zeros();
        for j in 0..6 {
            let mut d = p[(j, j)].re + tol;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let d = d.sqrt();
            l[(j, j)] = Complex64::new(d, 0.0);
            for i in j + 1..6 {
                let mut v = p[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = v / d;
            }
        }
        true
    }

    /// Symmetrised covariance of the quadratures
    /// (X_a, X_b, X_c, P_a, P_b, P_c), X = (x + x†)/√2, P = −i(x − x†)/√2.
    pub fn quadrature_covariance(&self) -> Matrix6<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut t = CMatrix6::zeros();
        for k in 0..3 {
            t[(k, k)] = Complex64::new(s, 0.0);
            t[(k, k + DAG)] = Complex64::new(s, 0.0);
            t[(k + DAG, k)] = Complex64::new(0.0, -s);
            t[(k + DAG, k + DAG)] = Complex64::new(0.0, s);
        }
        let rr = t * self.moments * t.transpose();
        Matrix6::from_fn(|i, j| 0.5 * (rr[(i, j)].re + rr[(j, i)].re))
    }

    fn to_flat(&self, out: &mut [f64]) {
        for (k, z) in self.moments.iter().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
    }

    fn from_flat(t: f64, y: &[f64]) -> Self {
        MomentState {
            t,
            moments: CMatrix6::from_iterator(
                y.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])),
            ),
        }
    }
}

/// Σ_j α_j e^{−iΔ′_j t}.
fn envelope(tones: &ToneSet, t: f64) -> Complex64 {
    tones
        .iter()
        .map(|tone| tone.alpha * Complex64::from_polar(1.0, -tone.delta_prime * t))
        .sum()
}

fn drift_from(params: &SystemParams, env: Complex64) -> CMatrix6 {
    let p = params;
    let i = Complex64::i();
    let g = env * p.g;
    let gc = env * p.g_c;
    let mut m = CMatrix6::zeros();
    m[(A, A)] = Complex64::new(-p.kappa / 2.0, 0.0);
    m[(A, B)] = -i * g;
    m[(A, B + DAG)] = -i * g;
    m[(A, C)] = -i * gc;
    m[(A, C + DAG)] = -i * gc;
    m[(B, B)] = Complex64::new(-p.gamma / 2.0, -p.omega_m);
    m[(B, A + DAG)] = -i * g;
    m[(B, A)] = -i * g.conj();
    m[(C, C)] = Complex64::new(-p.gamma_c / 2.0, -p.omega_mc);
    m[(C, A + DAG)] = -i * gc;
    m[(C, A)] = -i * gc.conj();
    for r in 0..3 {
        for col in 0..6 {
            m[(r + DAG, dagger(col))] = m[(r, col)].conj();
        }
    }
    m
}

fn diffusion(params: &SystemParams) -> CMatrix6 {
    let p = params;
    let mut d = CMatrix6::zeros();
    d[(A, A + DAG)] = Complex64::new(p.kappa, 0.0);
    d[(B, B + DAG)] = Complex64::new(p.gamma * (p.n_th + 1.0), 0.0);
    d[(B + DAG, B)] = Complex64::new(p.gamma * p.n_th, 0.0);
    d[(C, C + DAG)] = Complex64::new(p.gamma_c * (p.n_c_th + 1.0), 0.0);
    d[(C + DAG, C)] = Complex64::new(p.gamma_c * p.n_c_th, 0.0);
    d
}

/// Drift M(t) and diffusion D with dC/dt = M C + C Mᵀ + D.
pub fn drift_and_diffusion(t: f64, params: &SystemParams, tones: &ToneSet) -> (CMatrix6, CMatrix6) {
    (drift_from(params, envelope(tones, t)), diffusion(params))
}

/// dC/dt for a given state.
pub fn moment_derivative(state: &MomentState, params: &SystemParams, tones: &ToneSet) -> CMatrix6 {
    let (m, d) = drift_and_diffusion(state.t, params, tones);
    m * state.moments + state.moments * m.transpose() + d
}

struct CovarianceSystem<'a> {
    params: &'a SystemParams,
    tones: &'a ToneSet,
    diffusion: CMatrix6,
}

impl OdeSystem for CovarianceSystem<'_> {
    fn dim(&self) -> usize {
        72
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let (rows, lens) = sparse_drift(self.params, envelope(self.tones, t));
        let c = |i: usize, j: usize| {
            let k = 2 * (i + 6 * j);
            Complex64::new(y[k], y[k + 1])
        };
        for j in 0..6 {
            for i in 0..6 {
                let mut acc = self.diffusion[(i, j)];
                for &(k, m) in &rows[i][..lens[i]] {
                    acc += m * c(k, j);
                }
                for &(k, m) in &rows[j][..lens[j]] {
                    acc += c(i, k) * m;
                }
                let idx = 2 * (i + 6 * j);
                dy[idx] = acc.re;
                dy[idx + 1] = acc.im;
            }
        }
    }
}

/// Nonzero entries of each drift row with their counts.
fn sparse_drift(params: &SystemParams, env: Complex64) -> ([[(usize, Complex64); 5]; 6], [usize; 6]) {
    let p = params;
    let mi = -Complex64::i();
    let g = mi * env * p.g;
    let gc = mi * env * p.g_c;
    let gs = mi * (env * p.g).conj();
    let gcs = mi * (env * p.g_c).conj();
    let mut rows = [[(0, ZERO); 5]; 6];
    rows[A] = [
        (A, Complex64::new(-p.kappa / 2.0, 0.0)),
        (B, g),
        (B + DAG, g),
        (C, gc),
        (C + DAG, gc),
    ];
    rows[B][..3].copy_from_slice(&[(B, Complex64::new(-p.gamma / 2.0, -p.omega_m)), (A + DAG, g), (A, gs)]);
    rows[C][..3].copy_from_slice(&[(C, Complex64::new(-p.gamma_c / 2.0, -p.omega_mc)), (A + DAG, gc), (A, gcs)]);
    let lens = [5, 3, 3, 5, 3, 3];
    for r in 0..3 {
        for n in 0..lens[r] {
            let (col, v) = rows[r][n];
            rows[r + DAG][n] = (dagger(col), v.conj());
        }
    }
    (rows, lens)
}

/// Fastest coefficient frequency max(|Δ′_j| + ω_mc, ω_mc, |δ|).
pub fn fastest_frequency(params: &SystemParams, tones: &ToneSet) -> f64 {
    let mut w = params.omega_mc.max(params.omega_m);
    for t in tones {
        w = w.max(t.delta_prime.abs() + params.omega_mc);
    }
    if let Some(delta) = tones.two_photon_detuning() {
        w = w.max(delta.abs());
    }
    w
}

/// Period of the slowest coefficient oscillation: the two-photon beat for
/// several tones, otherwise the tone's own detuning (or ω_m when that is
/// zero).
pub fn beat_period(params: &SystemParams, tones: &ToneSet) -> f64 {
    let w = match tones.two_photon_detuning() {
        Some(delta) => delta.abs(),
        None if tones.tones()[0].delta_prime != 0.0 => tones.tones()[0].delta_prime.abs(),
        None => params.omega_m,
    };
    2.0 * PI / w
}

/// Numerical controls for covariance integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Maximum step is the fastest coefficient period divided by this.
    pub steps_per_period: f64,
    pub min_step: f64,
    /// A moment larger than this factor times max(initial moment, n_th)
    /// marks the trajectory as diverged.
    pub divergence_factor: f64,
    /// Averaging windows for steady-state detection, in beat periods.
    pub window_beats: f64,
    /// Windows are also at least this many relaxation times 1/(γ + Γ_opt)
    /// long, with Γ_opt from the weak-coupling rates.
    pub window_relaxations: f64,
    /// Relative change between consecutive window averages that counts as
    /// converged.
    pub window_rel_tol: f64,
    /// Give up the steady-state search after this time (1/κ).
    pub t_max: f64,
    /// Allowed negative eigenvalue of ⟨x_i† x_j⟩.
    pub physicality_tol: f64,
    /// Allowed conjugation/commutator defect relative to max(1, largest
    /// current moment).
    pub hermiticity_tol: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            rtol: 1e-10,
            atol: 1e-12,
            steps_per_period: 50.0,
            min_step: 1e-12,
            divergence_factor: 1e6,
            window_beats: 20.0,
            window_relaxations: 0.5,
            window_rel_tol: 1e-3,
            t_max: 2e7,
            physicality_tol: 1e-8,
            hermiticity_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub n_b: f64,
    pub n_c: f64,
    pub n_a: f64,
}

impl Sample {
    fn of(state: &MomentState) -> Self {
        Sample {
            t: state.t,
            n_b: state.n_b(),
            n_c: state.n_c(),
            n_a: state.n_a(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub diverged: bool,
    /// Average of n_b over the final window when the last two windows
    /// agree to the configured tolerance.
    pub converged_tail: Option<f64>,
    /// Window averages of n_b, oldest first.
    pub window_averages: Vec<f64>,
    pub window_length: f64,
    pub stats: StepStats,
    /// Worst observed values of the physicality diagnostics. The
    /// conjugation defect is relative to max(1, max |C_ij|) at each step.
    pub max_hermiticity_defect: f64,
    pub min_eigenvalue_seen: f64,
    #[serde(skip)]
    pub final_state: Option<MomentState>,
}

impl Trajectory {
    /// CSV with header `t,n_b,n_c,n_a`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,n_b,n_c,n_a\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::fmt_f64(s.t),
                crate::fmt_f64(s.n_b),
                crate::fmt_f64(s.n_c),
                crate::fmt_f64(s.n_a)
            ));
        }
        out
    }

    pub fn final_n_b(&self) -> f64 {
        self.samples.last().map(|s| s.n_b).unwrap_or(f64::NAN)
    }
}

/// Result of advancing a [`Propagator`] over an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    pub diverged: bool,
    /// ∫ n_b dt over the interval (trapezoid over accepted steps).
    pub n_b_integral: f64,
}

/// Incremental integrator of the moment equations with per-step checks.
pub struct Propagator<'a> {
    system: CovarianceSystem<'a>,
    stepper: Dopri5,
    t: f64,
    y: Vec<f64>,
    config: DynamicsConfig,
    divergence_threshold: f64,
    diverged: bool,
    max_defect: f64,
    min_eigen: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(
        params: &'a SystemParams,
        tones: &'a ToneSet,
        initial: &MomentState,
        config: &DynamicsConfig,
    ) -> Result<Self> {
        params.validate()?;
        let scale = initial.max_abs();
        let defect = initial.hermiticity_defect();
        if defect > config.hermiticity_tol * scale.max(1.0) {
            return Err(Error::Physicality {
                t: initial.t,
                what: format!("initial state violates conjugation identities by {defect:e}"),
            });
        }
        let min_eigen = initial.min_physical_eigenvalue();
        if min_eigen < -config.physicality_tol {
            return Err(Error::Physicality {
                t: initial.t,
                what: format!("initial state has uncertainty eigenvalue {min_eigen:e}"),
            });
        }
        let period = 2.0 * PI / fastest_frequency(params, tones);
        let control = StepControl {
            rtol: config.rtol,
            atol: config.atol,
            max_step: Some(period / config.steps_per_period),
            min_step: config.min_step,
        };
        let mut y = vec![0.0; 72];
        initial.to_flat(&mut y);
        Ok(Propagator {
            system: CovarianceSystem {
                params,
                tones,
                diffusion: diffusion(params),
            },
            stepper: Dopri5::new(control, 72),
            t: initial.t,
            y,
            config: *config,
            divergence_threshold: config.divergence_factor * scale.max(params.n_th),
            diverged: false,
            max_defect: defect / scale.max(1.0),
            min_eigen,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> MomentState {
        MomentState::from_flat(self.t, &self.y)
    }

    pub fn stats(&self) -> StepStats {
        self.stepper.stats()
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn max_step(&self) -> f64 {
        self.stepper.control().max_step.unwrap_or(f64::INFINITY)
    }

    pub fn advance_to(&mut self, t_target: f64) -> Result<Advance> {
        if self.diverged {
            return Ok(Advance { diverged: true, n_b_integral: 0.0 });
        }
        let cfg = self.config;
        let threshold = self.divergence_threshold;
        let mut integral = 0.0;
        let mut prev = (self.t, MomentState::from_flat(self.t, &self.y).n_b());
        let mut violation: Option<Error> = None;
        let mut diverged = false;
        let mut max_defect = self.max_defect;
        let mut min_eigen = self.min_eigen;

        let mut t = self.t;
        let outcome = self.stepper.advance(&self.system, &mut t, &mut self.y, t_target, |ts, y| {
            let state = MomentState::from_flat(ts, y);
            let n_b = state.n_b();
            integral += 0.5 * (n_b + prev.1) * (ts - prev.0);
            prev = (ts, n_b);
            let scale = state.max_abs();
            if scale > threshold {
                diverged = true;
                return false;
            }
            let defect = state.hermiticity_defect();
            max_defect = max_defect.max(defect / scale.max(1.0));
            let herm_limit = cfg.hermiticity_tol * scale.max(1.0);
            if defect > herm_limit {
                violation = Some(Error::Physicality {
                    t: ts,
                    what: format!("conjugation defect {defect:e} exceeds {herm_limit:e}"),
                });
                return false;
            }
            if !state.is_physical(cfg.physicality_tol) {
                let eig = state.min_physical_eigenvalue();
                min_eigen = min_eigen.min(eig);
                violation = Some(Error::Physicality {
                    t: ts,
                    what: format!("uncertainty matrix eigenvalue {eig:e}"),
                });
                return false;
            }
            true
        });
        self.t = t;
        self.max_defect = max_defect;
        self.min_eigen = min_eigen;
        match outcome {
            Err(e) => {
                let reason = e.to_string();
                let t_fail = match e {
                    OdeError::StepUnderflow { t, .. } | OdeError::NonFinite { t } => t,
                };
                Err(Error::Integration {
                    t: t_fail,
                    reason,
                    last_good: Some(Box::new(self.state())),
                })
            }
            Ok(_) if violation.is_some() => Err(violation.unwrap()),
            Ok(_) => {
                if diverged {
                    self.diverged = true;
                }
                Ok(Advance { diverged, n_b_integral: integral })
            }
        }
    }

    /// Records the current smallest eigenvalue into the diagnostics; the
    /// per-step test only runs a Cholesky factorisation.
    fn sample_eigenvalue(&mut self) {
        let eig = self.state().min_physical_eigenvalue();
        self.min_eigen = self.min_eigen.min(eig);
    }
}

/// Averaging window for steady-state detection.
pub fn window_length(params: &SystemParams, tones: &ToneSet, config: &DynamicsConfig) -> f64 {
    let beats = config.window_beats * beat_period(params, tones);
    let relax = rates(params, tones)
        .map(|r| params.gamma + r.gamma_opt.max(0.0))
        .unwrap_or(params.gamma);
    beats.max(config.window_relaxations / relax)
}

fn window_converged(prev: f64, last: f64, tol: f64) -> bool {
    (last - prev).abs() <= tol * last.abs().max(prev.abs())
}

/// Integrates from `initial` to `t_end`, sampling every `output_stride`.
///
/// Divergence stops the integration early and sets `diverged`; it is not
/// an error.
pub fn evolve(
    params: &SystemParams,
    tones: &ToneSet,
    initial: &MomentState,
    t_end: f64,
    output_stride: f64,
    config: &DynamicsConfig,
) -> Result<Trajectory> {
    if !(t_end > initial.t) {
        return Err(Error::param("t_end", "must exceed the initial time"));
    }
    if !(output_stride > 0.0) {
        return Err(Error::param("output_stride", "must be > 0"));
    }
    let mut prop = Propagator::new(params, tones, initial, config)?;
    let window = window_length(params, tones, config);
    let t0 = initial.t;
    let mut samples = vec![Sample::of(initial)];
    let mut window_averages = Vec::new();
    let mut window_acc = 0.0;
    let mut next_sample = 1u64;
    let mut next_window = 1u64;

    while prop.time() < t_end && !prop.diverged() {
        let ts = (t0 + next_sample as f64 * output_stride).min(t_end);
        let tw = t0 + next_window as f64 * window;
        let target = ts.min(tw);
        let step = prop.advance_to(target)?;
        window_acc += step.n_b_integral;
        if step.diverged {
            samples.push(Sample::of(&prop.state()));
            break;
        }
        if target == tw {
            window_averages.push(window_acc / window);
            window_acc = 0.0;
            next_window += 1;
        }
        if target == ts {
            samples.push(Sample::of(&prop.state()));
            next_sample += 1;
        }
    }
    prop.sample_eigenvalue();

    let converged_tail = match window_averages.as_slice() {
        [.., prev, last] if window_converged(*prev, *last, config.window_rel_tol) => Some(*last),
        _ => None,
    };
    Ok(Trajectory {
        samples,
        diverged: prop.diverged(),
        converged_tail,
        window_averages,
        window_length: window,
        stats: prop.stats(),
        max_hermiticity_defect: prop.max_defect,
        min_eigenvalue_seen: prop.min_eigen,
        final_state: Some(prop.state()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub n_b: f64,
    /// Time at which convergence was declared (1/κ).
    pub t: f64,
    pub window_length: f64,
    pub window_averages: Vec<f64>,
    pub stats: StepStats,
    /// Relative to max(1, max |C_ij|), as in [`Trajectory`].
    pub max_hermiticity_defect: f64,
    pub min_eigenvalue_seen: f64,
}

/// Evolves from the default initial state until consecutive window
/// averages of n_b agree, and returns the last average.
pub fn steady_occupation(
    params: &SystemParams,
    tones: &ToneSet,
    config: &DynamicsConfig,
) -> Result<SteadyState> {
    steady_occupation_from(params, tones, &MomentState::initial(params), config)
}

pub fn steady_occupation_from(
    params: &SystemParams,
    tones: &ToneSet,
    initial: &MomentState,
    config: &DynamicsConfig,
) -> Result<SteadyState> {
    let mut prop = Propagator::new(params, tones, initial, config)?;
    let window = window_length(params, tones, config);
    let mut averages: Vec<f64> = Vec::new();
    let mut k = 1u64;
    loop {
        let target = initial.t + k as f64 * window;
        if target > initial.t + config.t_max {
            return Err(Error::NotConverged {
                t_max: config.t_max,
                last_average: averages.last().copied().unwrap_or(f64::NAN),
            });
        }
        let step = prop.advance_to(target)?;
        if step.diverged {
            return Err(Error::Unstable(format!(
                "moments exceeded divergence threshold before t = {target}"
            )));
        }
        averages.push(step.n_b_integral / window);
        if let [.., prev, last] = averages.as_slice() {
            if window_converged(*prev, *last, config.window_rel_tol) {
                prop.sample_eigenvalue();
                return Ok(SteadyState {
                    n_b: *last,
                    t: prop.time(),
                    window_length: window,
                    window_averages: averages,
                    stats: prop.stats(),
                    max_hermiticity_defect: prop.max_defect,
                    min_eigenvalue_seen: prop.min_eigen,
                });
            }
        }
        k += 1;
    }
}
