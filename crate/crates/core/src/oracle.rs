//! Brute-force master-equation integration on a truncated Fock space.
//!
//! The density matrix of the three fluctuation modes is evolved under
//!
//! ```text
//! ρ̇ = −i[H(t), ρ] + κ D[a]ρ + γ(n_th+1) D[b]ρ + γ n_th D[b†]ρ
//!      + γ_c(n_c,th+1) D[c]ρ + γ_c n_c,th D[c†]ρ,
//! H(t) = ω_m b†b + ω_mc c†c + (G(t) a† + G*(t) a)(b + b†)
//!      + (G_c(t) a† + G_c*(t) a)(c + c†),
//! ```
//!
//! with no Gaussian assumption. Because the linearised Hamiltonian is
//! quadratic the occupations must converge to the covariance result as the
//! truncation grows, which makes this an independent check of
//! [`crate::dynamics`]. It is only practical for small occupations.
//!
//! Operators are never stored as matrices. Every ladder operator, and every
//! product of two, maps a basis state to at most one other basis state, so
//! it is kept as a (target, amplitude) table and applied by index
//! arithmetic.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve, fastest_frequency, CMatrix6, DynamicsConfig, MomentState, Sample, Trajectory,
};
use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeSystem, StepControl, StepStats};
use crate::params::{SystemParams, ToneSet};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FockConfig {
    /// Truncation (d_a, d_b, d_c), each ≥ 2.
    pub dims: [usize; 3],
    pub t_end: f64,
    pub output_stride: f64,
    pub rtol: f64,
    pub atol: f64,
    pub steps_per_period: f64,
    /// Largest allowed d_a·d_b·d_c.
    pub budget: usize,
    /// Largest allowed initial population of each mode's top level.
    pub tail_tol: f64,
    pub trace_tol: f64,
    pub hermiticity_tol: f64,
    pub positivity_tol: f64,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig {
            dims: [2, 6, 2],
            t_end: 10.0,
            output_stride: 1.0,
            rtol: 1e-9,
            atol: 1e-12,
            steps_per_period: 50.0,
            budget: 512,
            tail_tol: 1e-6,
            trace_tol: 1e-8,
            hermiticity_tol: 1e-10,
            positivity_tol: 1e-6,
        }
    }
}

/// Operator sending |k⟩ to `amp[k] |target[k]⟩`.
#[derive(Debug, Clone)]
struct Ladder {
    target: Vec<usize>,
    amp: Vec<f64>,
}

impl Ladder {
    /// a applied after b.
    fn compose(a: &Ladder, b: &Ladder) -> Ladder {
        let mut target = vec![0; b.target.len()];
        let mut amp = vec![0.0; b.target.len()];
        for k in 0..b.target.len() {
            if b.amp[k] != 0.0 {
                let mid = b.target[k];
                target[k] = a.target[mid];
                amp[k] = a.amp[mid] * b.amp[k];
            }
        }
        Ladder { target, amp }
    }

    fn scaled(mut self, s: f64) -> Ladder {
        for a in &mut self.amp {
            *a *= s;
        }
        self
    }
}

/// Basis |n_a, n_b, n_c⟩ with index (n_a d_b + n_b) d_c + n_c.
#[derive(Debug, Clone)]
pub struct FockSpace {
    dims: [usize; 3],
    dim: usize,
    numbers: Vec<[usize; 3]>,
}

impl FockSpace {
    pub fn new(dims: [usize; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::param("dims", "each truncation must be at least 2"));
        }
        let dim = dims.iter().product();
        let mut numbers = Vec::with_capacity(dim);
        for na in 0..dims[0] {
            for nb in 0..dims[1] {
                for nc in 0..dims[2] {
                    numbers.push([na, nb, nc]);
                }
            }
        }
        Ok(FockSpace { dims, dim, numbers })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(&self, n: [usize; 3]) -> usize {
        (n[0] * self.dims[1] + n[1]) * self.dims[2] + n[2]
    }

    fn lower(&self, mode: usize) -> Ladder {
        let mut target = vec![0; self.dim];
        let mut amp = vec![0.0; self.dim];
        for (k, n) in self.numbers.iter().enumerate() {
            if n[mode] > 0 {
                let mut m = *n;
                m[mode] -= 1;
                target[k] = self.index(m);
                amp[k] = (n[mode] as f64).sqrt();
            }
        }
        Ladder { target, amp }
    }

    fn raise(&self, mode: usize) -> Ladder {
        let mut target = vec![0; self.dim];
        let mut amp = vec![0.0; self.dim];
        for (k, n) in self.numbers.iter().enumerate() {
            if n[mode] + 1 < self.dims[mode] {
                let mut m = *n;
                m[mode] += 1;
                target[k] = self.index(m);
                amp[k] = ((n[mode] + 1) as f64).sqrt();
            }
        }
        Ladder { target, amp }
    }

    /// Product of single-mode truncated thermal states.
    pub fn thermal_state(&self, occupations: [f64; 3]) -> Vec<Complex64> {
        let mut marginals: Vec<Vec<f64>> = Vec::new();
        for (mode, &n) in occupations.iter().enumerate() {
            let ratio = if n > 0.0 { n / (n + 1.0) } else { 0.0 };
            let mut p: Vec<f64> = (0..self.dims[mode]).map(|k| ratio.powi(k as i32)).collect();
            let z: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= z);
            marginals.push(p);
        }
        let mut rho = vec![Complex64::new(0.0, 0.0); self.dim * self.dim];
        for (k, n) in self.numbers.iter().enumerate() {
            let p = marginals[0][n[0]] * marginals[1][n[1]] * marginals[2][n[2]];
            rho[k * self.dim + k] = Complex64::new(p, 0.0);
        }
        rho
    }

    /// ⟨n_mode⟩ in a density matrix.
    pub fn occupation(&self, rho: &[Complex64], mode: usize) -> f64 {
        self.numbers
            .iter()
            .enumerate()
            .map(|(k, n)| n[mode] as f64 * rho[k * self.dim + k].re)
            .sum()
    }

    pub fn trace(&self, rho: &[Complex64]) -> f64 {
        (0..self.dim).map(|k| rho[k * self.dim + k].re).sum()
    }

    /// max |ρ_ij − ρ_ji*|.
    pub fn hermiticity_defect(&self, rho: &[Complex64]) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((rho[i * d + j] - rho[j * d + i].conj()).norm_sqr());
            }
        }
        worst.sqrt()
    }

    pub fn min_eigenvalue(&self, rho: &[Complex64]) -> f64 {
        let d = self.dim;
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (rho[i * d + j] + rho[j * d + i].conj()));
        SymmetricEigen::new(m).eigenvalues.min()
    }

    /// Probability that any mode occupies its top level.
    pub fn tail_populations(&self, rho: &[Complex64]) -> [f64; 3] {
        let mut tails = [0.0; 3];
        for (k, n) in self.numbers.iter().enumerate() {
            for mode in 0..3 {
                if n[mode] + 1 == self.dims[mode] {
                    tails[mode] += rho[k * self.dim + k].re;
                }
            }
        }
        tails
    }
}

struct Lindblad<'a> {
    space: &'a FockSpace,
    tones: &'a ToneSet,
    g: f64,
    g_c: f64,
    /// Diagonal of H − (i/2) Σ L†L.
    h_eff: Vec<Complex64>,
    h_eff_conj: Vec<Complex64>,
    /// (source, target, amplitude) of a†b, a†b†, ab, ab†, then the same
    /// with c.
    coupling_entries: Vec<Vec<(usize, usize, f64)>>,
    jump_entries: Vec<Vec<(usize, usize, f64)>>,
}

impl<'a> Lindblad<'a> {
    fn new(space: &'a FockSpace, params: &SystemParams, tones: &'a ToneSet) -> Self {
        let (a, b, c) = (space.lower(0), space.lower(1), space.lower(2));
        let (ad, bd, cd) = (space.raise(0), space.raise(1), space.raise(2));
        let couplings = [
            Ladder::compose(&ad, &b),
            Ladder::compose(&ad, &bd),
            Ladder::compose(&a, &b),
            Ladder::compose(&a, &bd),
            Ladder::compose(&ad, &c),
            Ladder::compose(&ad, &cd),
            Ladder::compose(&a, &c),
            Ladder::compose(&a, &cd),
        ];
        let p = params;
        let jumps: Vec<Ladder> = [
            (a, p.kappa),
            (b, p.gamma * (p.n_th + 1.0)),
            (bd, p.gamma * p.n_th),
            (c, p.gamma_c * (p.n_c_th + 1.0)),
            (cd, p.gamma_c * p.n_c_th),
        ]
        .into_iter()
        .filter(|(_, rate)| *rate > 0.0)
        .map(|(l, rate)| l.scaled(rate.sqrt()))
        .collect();
        let h_eff: Vec<Complex64> = space
            .numbers
            .iter()
            .enumerate()
            .map(|(k, n)| {
                let energy = p.omega_m * n[1] as f64 + p.omega_mc * n[2] as f64;
                let loss: f64 = jumps.iter().map(|l| l.amp[k] * l.amp[k]).sum();
                Complex64::new(energy, -0.5 * loss)
            })
            .collect();
        Lindblad {
            space,
            tones,
            g: p.g,
            g_c: p.g_c,
            h_eff_conj: h_eff.iter().map(|h| h.conj()).collect(),
            h_eff,
            coupling_entries: couplings.iter().map(entries).collect(),
            jump_entries: jumps.iter().map(entries).collect(),
        }
    }

    fn coefficients(&self, t: f64) -> [Complex64; 8] {
        let env: Complex64 = self
            .tones
            .iter()
            .map(|tone| tone.alpha * Complex64::from_polar(1.0, -tone.delta_prime * t))
            .sum();
        let (g, gc) = (env * self.g, env * self.g_c);
        [g, g, g.conj(), g.conj(), gc, gc, gc.conj(), gc.conj()]
    }

    fn derivative(&self, t: f64, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.space.dim;
        for ((o_row, r_row), hi) in out.chunks_exact_mut(d).zip(rho.chunks_exact(d)).zip(&self.h_eff) {
            for ((o, r), hj) in o_row.iter_mut().zip(r_row).zip(&self.h_eff_conj) {
                *o = -I * (hi - hj) * r;
            }
        }
        for (entries, coef) in self.coupling_entries.iter().zip(self.coefficients(t)) {
            if coef == Complex64::new(0.0, 0.0) {
                continue;
            }
            let c = -I * coef;
            // −i c O ρ
            for &(src, dst, amp) in entries {
                let f = c * amp;
                let r_row = &rho[src * d..(src + 1) * d];
                for (o, r) in out[dst * d..(dst + 1) * d].iter_mut().zip(r_row) {
                    *o += f * r;
                }
            }
            // +i c ρ O
            for (o_row, r_row) in out.chunks_exact_mut(d).zip(rho.chunks_exact(d)) {
                for &(src, dst, amp) in entries {
                    o_row[src] -= c * amp * r_row[dst];
                }
            }
        }
        for entries in &self.jump_entries {
            for &(i, ti, ai) in entries {
                let r_row = &rho[i * d..(i + 1) * d];
                let o_row = &mut out[ti * d..(ti + 1) * d];
                for &(j, tj, aj) in entries {
                    o_row[tj] += ai * aj * r_row[j];
                }
            }
        }
    }
}

fn entries(l: &Ladder) -> Vec<(usize, usize, f64)> {
    (0..l.amp.len())
        .filter(|&k| l.amp[k] != 0.0)
        .map(|k| (k, l.target[k], l.amp[k]))
        .collect()
}

impl OdeSystem for Lindblad<'_> {
    fn dim(&self) -> usize {
        2 * self.space.dim * self.space.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self.derivative(t, bytemuck::cast_slice(y), bytemuck::cast_slice_mut(dy));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockTrajectory {
    pub dims: [usize; 3],
    pub samples: Vec<Sample>,
    pub max_trace_error: f64,
    pub max_hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    /// Largest top-level population seen for each mode.
    pub max_tail: [f64; 3],
    pub stats: StepStats,
}

fn check_sample(
    space: &FockSpace,
    rho: &[Complex64],
    t: f64,
    config: &FockConfig,
    traj: &mut FockTrajectory,
) -> Result<()> {
    let trace_err = (space.trace(rho) - 1.0).abs();
    let herm = space.hermiticity_defect(rho);
    let eig = space.min_eigenvalue(rho);
    let tails = space.tail_populations(rho);
    traj.max_trace_error = traj.max_trace_error.max(trace_err);
    traj.max_hermiticity_defect = traj.max_hermiticity_defect.max(herm);
    traj.min_eigenvalue = traj.min_eigenvalue.min(eig);
    for m in 0..3 {
        traj.max_tail[m] = traj.max_tail[m].max(tails[m]);
    }
    if trace_err > config.trace_tol {
        return Err(Error::Truncation(format!("trace drifted by {trace_err:e} at t = {t}")));
    }
    if herm > config.hermiticity_tol {
        return Err(Error::Truncation(format!("hermiticity defect {herm:e} at t = {t}")));
    }
    if eig < -config.positivity_tol {
        return Err(Error::Truncation(format!("density matrix eigenvalue {eig:e} at t = {t}")));
    }
    Ok(())
}

/// Evolves a product of truncated thermal states with the given
/// occupations (n_a, n_b, n_c).
pub fn evolve_fock(
    params: &SystemParams,
    tones: &ToneSet,
    fock: &FockConfig,
    initial_occupations: [f64; 3],
) -> Result<FockTrajectory> {
    params.validate()?;
    if initial_occupations.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
        return Err(Error::param("initial_occupations", "must be finite and >= 0"));
    }
    if !(fock.t_end > 0.0) || !(fock.output_stride > 0.0) {
        return Err(Error::param("t_end/output_stride", "must be > 0"));
    }
    let total: usize = fock.dims.iter().product();
    if total > fock.budget {
        return Err(Error::Truncation(format!(
            "dimension {total} exceeds the budget of {}",
            fock.budget
        )));
    }
    let space = FockSpace::new(fock.dims)?;
    for (mode, &n) in initial_occupations.iter().enumerate() {
        let ratio = n / (n + 1.0);
        let tail = ratio.powi(fock.dims[mode] as i32);
        if tail > fock.tail_tol {
            return Err(Error::Truncation(format!(
                "initial occupation {n} of mode {mode} leaves {tail:e} beyond {} levels",
                fock.dims[mode]
            )));
        }
    }

    let system = Lindblad::new(&space, params, tones);
    let rho0 = space.thermal_state(initial_occupations);
    let mut y: Vec<f64> = bytemuck::cast_slice(&rho0).to_vec();
    let period = 2.0 * PI / fastest_frequency(params, tones);
    let mut stepper = Dopri5::new(
        StepControl {
            rtol: fock.rtol,
            atol: fock.atol,
            max_step: Some(period / fock.steps_per_period),
            min_step: 1e-12,
        },
        y.len(),
    );

    let sample = |t: f64, rho: &[Complex64]| Sample {
        t,
        n_b: space.occupation(rho, 1),
        n_c: space.occupation(rho, 2),
        n_a: space.occupation(rho, 0),
    };
    let mut traj = FockTrajectory {
        dims: fock.dims,
        samples: vec![sample(0.0, &rho0)],
        max_trace_error: 0.0,
        max_hermiticity_defect: 0.0,
        min_eigenvalue: f64::INFINITY,
        max_tail: [0.0; 3],
        stats: StepStats::default(),
    };
    check_sample(&space, &rho0, 0.0, fock, &mut traj)?;

    let mut t = 0.0;
    let mut k = 1u64;
    while t < fock.t_end {
        let target = (k as f64 * fock.output_stride).min(fock.t_end);
        stepper
            .advance(&system, &mut t, &mut y, target, |_, _| true)
            .map_err(|e| Error::Integration {
                t,
                reason: e.to_string(),
                last_good: None,
            })?;
        let rho: &[Complex64] = bytemuck::cast_slice(&y);
        traj.samples.push(sample(t, rho));
        check_sample(&space, rho, t, fock, &mut traj)?;
        k += 1;
    }
    traj.stats = stepper.stats();
    Ok(traj)
}

/// d⟨x_i x_j⟩/dt at time `t` for a product thermal state, computed from
/// the truncated master equation.
pub fn fock_moment_derivative(
    params: &SystemParams,
    tones: &ToneSet,
    dims: [usize; 3],
    occupations: [f64; 3],
    t: f64,
) -> Result<CMatrix6> {
    params.validate()?;
    let space = FockSpace::new(dims)?;
    let system = Lindblad::new(&space, params, tones);
    let rho = space.thermal_state(occupations);
    let d = space.dim;
    let mut drho = vec![Complex64::new(0.0, 0.0); d * d];
    system.derivative(t, &rho, &mut drho);

    let lowers = [space.lower(0), space.lower(1), space.lower(2)];
    let raises = [space.raise(0), space.raise(1), space.raise(2)];
    let ops: Vec<&Ladder> = lowers.iter().chain(raises.iter()).collect();
    let mut out = CMatrix6::zeros();
    for i in 0..6 {
        for j in 0..6 {
            // Tr(x_i x_j ρ̇) = Σ_k ⟨k| x_i x_j ρ̇ |k⟩ with x_i x_j |m⟩ = amp |target⟩
            let prod = Ladder::compose(ops[i], ops[j]);
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..d {
                if prod.amp[m] != 0.0 {
                    acc += prod.amp[m] * drho[m * d + prod.target[m]];
                }
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Side-by-side oracle and covariance occupations of mode b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub dims: [usize; 3],
    pub t: Vec<f64>,
    pub n_b_oracle: Vec<f64>,
    pub n_b_covariance: Vec<f64>,
    /// max over samples of |n_oracle − n_cov| / n_cov, skipping samples where
    /// both vanish.
    pub max_relative_error: f64,
    pub oracle: FockTrajectory,
}

impl OracleComparison {
    /// CSV with header `t,n_b_oracle,n_b_covariance,relative_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,n_b_oracle,n_b_covariance,relative_error\n");
        for k in 0..self.t.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::fmt_f64(self.t[k]),
                crate::fmt_f64(self.n_b_oracle[k]),
                crate::fmt_f64(self.n_b_covariance[k]),
                crate::fmt_f64(relative_error(self.n_b_oracle[k], self.n_b_covariance[k]))
            ));
        }
        out
    }
}

fn relative_error(oracle: f64, cov: f64) -> f64 {
    let diff = (oracle - cov).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / cov.abs()
    }
}

pub fn compare_with_covariance(
    params: &SystemParams,
    tones: &ToneSet,
    fock: &FockConfig,
    initial_occupations: [f64; 3],
) -> Result<OracleComparison> {
    let oracle = evolve_fock(params, tones, fock, initial_occupations)?;
    let [na, nb, nc] = initial_occupations;
    let config = DynamicsConfig {
        rtol: fock.rtol.min(1e-10),
        atol: fock.atol.min(1e-12),
        ..DynamicsConfig::default()
    };
    let cov: Trajectory = evolve(
        params,
        tones,
        &MomentState::thermal(na, nb, nc),
        fock.t_end,
        fock.output_stride,
        &config,
    )?;
    if cov.diverged || cov.samples.len() != oracle.samples.len() {
        return Err(Error::Unstable(
            "covariance trajectory diverged during the oracle comparison".into(),
        ));
    }
    let t: Vec<f64> = oracle.samples.iter().map(|s| s.t).collect();
    let n_b_oracle: Vec<f64> = oracle.samples.iter().map(|s| s.n_b).collect();
    let n_b_covariance: Vec<f64> = cov.samples.iter().map(|s| s.n_b).collect();
    let max_relative_error = n_b_oracle
        .iter()
        .zip(&n_b_covariance)
        .map(|(o, c)| relative_error(*o, *c))
        .fold(0.0, f64::max);
    Ok(OracleComparison {
        dims: fock.dims,
        t,
        n_b_oracle,
        n_b_covariance,
        max_relative_error,
        oracle,
    })
}
