//! Explicit adaptive Dormand–Prince 5(4) integrator.
//!
//! The state is a flat `f64` vector. Steps are clipped so that requested
//! target times are hit exactly, which keeps sampling deterministic and
//! independent of the step history.

use serde::{Deserialize, Serialize};

/// Right-hand side of y' = f(t, y).
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size; `None` leaves it unbounded.
    pub max_step: Option<f64>,
    /// Steps below this size abort the integration.
    pub min_step: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: None,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    StepUnderflow { t: f64, h: f64 },
    NonFinite { t: f64 },
}

impl std::fmt::Display for OdeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OdeError::StepUnderflow { t, h } => write!(f, "step size {h:e} underflow at t = {t}"),
            OdeError::NonFinite { t } => write!(f, "non-finite state at t = {t}"),
        }
    }
}

// Dormand–Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ for the embedded 4th-order solution
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Stateful stepper; carries the step-size estimate and FSAL stage between
/// calls to [`Dopri5::advance`].
pub struct Dopri5 {
    control: StepControl,
    h: Option<f64>,
    k: [Vec<f64>; 7],
    fsal_valid: bool,
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    stats: StepStats,
}

impl Dopri5 {
    pub fn new(control: StepControl, dim: usize) -> Self {
        Dopri5 {
            control,
            h: None,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            fsal_valid: false,
            y_stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            stats: StepStats::default(),
        }
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn control(&self) -> &StepControl {
        &self.control
    }

    fn error_norm(&self, y: &[f64], h: f64) -> f64 {
        let c = &self.control;
        let k = &self.k;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let err = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                + E7 * k[6][i]);
            let scale = c.atol + c.rtol * y[i].abs().max(self.y_new[i].abs());
            acc += (err / scale).powi(2);
        }
        (acc / y.len() as f64).sqrt()
    }

    fn initial_step(&self, span: f64) -> f64 {
        let cap = self.control.max_step.unwrap_or(f64::INFINITY);
        (span / 100.0).min(cap).max(self.control.min_step)
    }

    /// Integrates in place from `*t` to `t_target`. On success `*t ==
    /// t_target`. `on_step` sees every accepted step as `(t, y)`; returning
    /// `false` stops early with `Ok(false)`.
    pub fn advance<S, F>(
        &mut self,
        system: &S,
        t: &mut f64,
        y: &mut [f64],
        t_target: f64,
        mut on_step: F,
    ) -> Result<bool, OdeError>
    where
        S: OdeSystem + ?Sized,
        F: FnMut(f64, &[f64]) -> bool,
    {
        let n = y.len();
        if !self.fsal_valid {
            system.rhs(*t, y, &mut self.k[0]);
            self.stats.rhs_evals += 1;
            self.fsal_valid = true;
        }
        let mut h = self.h.unwrap_or_else(|| self.initial_step(t_target - *t));
        let cap = self.control.max_step.unwrap_or(f64::INFINITY);

        while *t < t_target {
            h = h.min(cap);
            let remaining = t_target - *t;
            let last = h >= remaining * (1.0 - 1e-12);
            let h_try = if last { remaining } else { h };
            self.stage_all(system, *t, y, h_try, n);

            let err = self.error_norm(y, h_try);
            if !err.is_finite() {
                return Err(OdeError::NonFinite { t: *t });
            }
            if err <= 1.0 {
                *t = if last { t_target } else { *t + h_try };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a step shortened to hit the target says little about the next one
                if !last || h_try >= h {
                    h = h_try * factor;
                }
                if !on_step(*t, y) {
                    self.h = Some(h);
                    return Ok(false);
                }
            } else {
                self.stats.rejected += 1;
                h = h_try * (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                if h < self.control.min_step {
                    self.h = Some(h);
                    return Err(OdeError::StepUnderflow { t: *t, h });
                }
            }
        }
        self.h = Some(h);
        Ok(true)
    }

    fn stage_all<S: OdeSystem + ?Sized>(&mut self, system: &S, t: f64, y: &[f64], h: f64, n: usize) {
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let ys = &mut self.y_stage;
        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        system.rhs(t + C2 * h, ys, k2);
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        system.rhs(t + C3 * h, ys, k3);
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        system.rhs(t + C4 * h, ys, k4);
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        system.rhs(t + C5 * h, ys, k5);
        for i in 0..n {
            ys[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        system.rhs(t + h, ys, k6);
        let yn = &mut self.y_new;
        for i in 0..n {
            yn[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        system.rhs(t + h, yn, k7);
        self.stats.rhs_evals += 6;
    }
}
