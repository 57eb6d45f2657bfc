//! Acceptance suite: one line per criterion.
//!
//! Criteria 2 and 5 to 8 are evaluated at the couplings as stated
//! (g_c/ω_mc = 5e-4). There the control mode is pulled by several γ_c and
//! the linearised system is antidamped, so these criteria fail; the line
//! records the evidence. Each of those lines also
//! reports the same checks with g_c/ω_mc = 5e-5. That reading is a
//! diagnostic and never turns a FAIL into a PASS.
//!
//! The process exits nonzero if any outcome differs from the expected one,
//! including a FAIL that starts passing.

use std::time::Instant;

use num_complex::Complex64;

use omit_core::dynamics::{evolve, steady_occupation, DynamicsConfig, MomentState, SteadyState, Trajectory};
use omit_core::oracle::{compare_with_covariance, FockConfig};
use omit_core::params::{cascaded_tone_set, Coupling, Damping, Detuning, SystemSpec, ToneTemplate};
use omit_core::rates::{rates, single_mode_limit};
use omit_core::response::{chi_opt, local_extrema, spectrum, tone_spectrum, total_spectrum};
use omit_core::sweep::{sweep_cooling_limit, AxisSpec, SweepMode, SweepResult};
use omit_core::{Error, SystemParams, Tone, ToneSet};

const STATED_GC: f64 = 5e-4;
const REDUCED_GC: f64 = 5e-5;
const WEAK_GC: f64 = 5e-6;

fn system(omega_m: f64, gc_ratio: f64) -> SystemSpec {
    SystemSpec {
        omega_m,
        omega_mc: 2.0,
        kappa: 1.0,
        gamma: Damping::QualityFactor(1e5),
        gamma_c: Damping::QualityFactor(1e4),
        g: Coupling::Ratio(1e-3),
        g_c: Coupling::Ratio(gc_ratio),
        n_th: 1e3,
        n_c_th: None,
    }
}

fn params(omega_m: f64, gc_ratio: f64) -> SystemParams {
    system(omega_m, gc_ratio).resolve().unwrap()
}

fn cascade(p: &SystemParams, alphas: &[f64]) -> ToneSet {
    let a: Vec<Complex64> = alphas.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    cascaded_tone_set(p.omega_m, p.omega_mc, p.omega_m, &a).unwrap()
}

/// Physicality bookkeeping across every run of the suite.
#[derive(Default)]
struct Physicality {
    runs: usize,
    min_eigenvalue: f64,
    max_hermiticity: f64,
    min_occupation: f64,
    max_trace_error: f64,
    violations: Vec<String>,
}

impl Physicality {
    fn trajectory(&mut self, label: &str, tr: &Trajectory) {
        self.runs += 1;
        self.min_eigenvalue = self.min_eigenvalue.min(tr.min_eigenvalue_seen);
        self.max_hermiticity = self.max_hermiticity.max(tr.max_hermiticity_defect);
        for s in &tr.samples {
            let m = s.n_a.min(s.n_b).min(s.n_c);
            self.min_occupation = self.min_occupation.min(m);
            if m < -1e-10 {
                self.violations.push(format!("{label}: occupation {m:e} at t = {}", s.t));
                break;
            }
        }
        if tr.min_eigenvalue_seen < -1e-8 {
            self.violations.push(format!("{label}: eigenvalue {:e}", tr.min_eigenvalue_seen));
        }
    }

    fn steady(&mut self, label: &str, s: &SteadyState) {
        self.runs += 1;
        self.min_eigenvalue = self.min_eigenvalue.min(s.min_eigenvalue_seen);
        self.max_hermiticity = self.max_hermiticity.max(s.max_hermiticity_defect);
        let m = s.window_averages.iter().copied().fold(f64::INFINITY, f64::min);
        self.min_occupation = self.min_occupation.min(m);
        if m < -1e-10 || s.min_eigenvalue_seen < -1e-8 {
            self.violations.push(format!("{label}: occupation {m:e}, eigenvalue {:e}", s.min_eigenvalue_seen));
        }
    }

    /// Unstable and not-converged outcomes carry no physicality breach;
    /// anything else is recorded.
    fn error(&mut self, label: &str, e: &Error) {
        self.runs += 1;
        match e {
            Error::Unstable(_) | Error::NotConverged { .. } => {}
            other => self.violations.push(format!("{label}: {other}")),
        }
    }
}

struct Line {
    id: usize,
    pass: bool,
    expected: bool,
    /// Evidence for an expected failure and the reduced-coupling
    /// diagnostics both hold.
    evidence: bool,
    text: String,
    secs: f64,
    long: bool,
}

fn criterion(
    id: usize,
    expected: bool,
    long: bool,
    lines: &mut Vec<Line>,
    f: impl FnOnce() -> (bool, bool, String),
) {
    let start = Instant::now();
    let (pass, evidence, text) = f();
    let line = Line {
        id,
        pass,
        expected,
        evidence,
        text,
        secs: start.elapsed().as_secs_f64(),
        long,
    };
    println!("{}", render(&line));
    lines.push(line);
}

fn render(l: &Line) -> String {
    let verdict = if l.pass { "PASS" } else { "FAIL" };
    let note = if l.pass == l.expected && l.evidence { "" } else { " (UNEXPECTED)" };
    let long = if l.long { " [long-running]" } else { "" };
    format!("criterion {:>2}: {verdict}{note}{long} {} ({:.1} s)", l.id, l.text, l.secs)
}

fn c1() -> (bool, bool, String) {
    let p = params(0.02, STATED_GC).without_control();
    let tones = cascade(&p, &[1e3, 1e3]);
    let grid: Vec<f64> = (0..10_000).map(|i| -3.0 + 6.0 * i as f64 / 9_999.0).collect();
    let s = spectrum(&grid, &p, &tones);
    let mut worst: f64 = 0.0;
    for (j, tone) in tones.iter().enumerate() {
        for (i, &w) in grid.iter().enumerate() {
            let lor = p.kappa * (tone.alpha * chi_opt(w, tone.delta_prime, p.kappa)).norm_sqr() * p.g * p.g;
            worst = worst.max((s.per_tone[j][i] - lor).abs() / lor);
        }
    }
    let text = format!("Lorentzian reduction: max relative deviation {worst:.2e} over 10^4 points, 2 tones");
    (worst < 1e-12, true, text)
}

/// Largest distance, in units of γ_c, from a predicted feature to the
/// nearest local extremum of the matching tone spectrum.
fn feature_offsets(gc: f64) -> (f64, f64) {
    let p = params(0.02, gc);
    let tones = cascade(&p, &[1e3, 1e3]);
    let delta = tones.two_photon_detuning().unwrap();
    let wmc = p.omega_mc;
    let features = [
        (0usize, [wmc, -wmc, -delta + wmc, -delta - wmc]),
        (1usize, [wmc, -wmc, delta + wmc, delta - wmc]),
    ];
    // spacing γ_c/20 over ±50 γ_c
    let h = p.gamma_c / 20.0;
    let mut worst: f64 = 0.0;
    for (j, centres) in features {
        for c in centres {
            let grid: Vec<f64> = (-1000..=1000).map(|k| c + k as f64 * h).collect();
            let vals: Vec<f64> = grid.iter().map(|&w| tone_spectrum(w, j, &p, &tones)).collect();
            let nearest = local_extrema(&vals)
                .into_iter()
                .map(|i| (grid[i] - c).abs())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest / p.gamma_c);
        }
    }
    (worst, delta)
}

fn c2() -> (bool, bool, String) {
    let (stated, delta) = feature_offsets(STATED_GC);
    let (reduced, _) = feature_offsets(REDUCED_GC);
    let (weak, _) = feature_offsets(WEAK_GC);
    // the offset is a control-mode pull that vanishes as g_c shrinks
    let evidence = stated.is_finite() && stated > 1.0 && weak <= 1.0;
    let text = format!(
        "OMIT feature positions (delta = {delta:.4}): stated couplings put the nearest extremum up to \
         {stated:.1} gamma_c from the 8 predicted positions; g_c/omega_mc = 5e-6: up to {weak:.2} gamma_c [{}]; \
         diagnostic g_c/omega_mc = 5e-5: up to {reduced:.2} gamma_c",
        ok(evidence)
    );
    (stated <= 1.0, evidence, text)
}

fn c3() -> (bool, bool, String) {
    let p = params(0.02, STATED_GC);
    let tones = cascade(&p, &[1e3, 1e3]);
    let with = total_spectrum(-p.omega_m, &p, &tones);
    let without = total_spectrum(-p.omega_m, &p.without_control(), &tones);
    let ratio = with / without;
    let text = format!("heating suppression: S_FF(-omega_m) with/without control = {ratio:.3e}");
    (ratio < 0.1, true, text)
}

fn c4() -> (bool, bool, String) {
    let mut parts = Vec::new();
    let mut pass = true;
    for wm in [0.003, 0.01, 0.03] {
        let p = params(wm, STATED_GC).without_control();
        let r = rates(&p, &ToneSet::single(Tone::real(1e3, -0.5 * p.kappa))).unwrap();
        let nba = r.n_backaction.unwrap();
        let dev = nba / single_mode_limit(&p) - 1.0;
        pass &= dev.abs() < 0.1;
        parts.push(format!("{wm}: {nba:.4} ({:+.2}%)", 100.0 * dev));
    }
    let text = format!("single-mode limit kappa/(4 omega_m): n_backaction {}", parts.join(", "));
    (pass, true, text)
}

fn ok(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "DOES NOT HOLD"
    }
}

fn enhancement(gc: f64) -> (f64, bool) {
    let p = params(0.02, gc);
    let with = rates(&p, &cascade(&p, &[1e3, 1e3])).unwrap();
    let single = rates(&p.without_control(), &ToneSet::single(Tone::real(1e3, -p.omega_m))).unwrap();
    (with.gamma_opt / single.gamma_opt, with.antidamped)
}

fn c5() -> (bool, bool, String) {
    let (stated, antidamped) = enhancement(STATED_GC);
    let (reduced, reduced_antidamped) = enhancement(REDUCED_GC);
    let evidence = stated < 0.0 && antidamped;
    let diagnostic = reduced > 100.0 && !reduced_antidamped;
    let text = format!(
        "cooling-rate enhancement at omega_m = 0.02: stated couplings ratio {stated:.4}, antidamped {antidamped} [{}]; \
         diagnostic g_c/omega_mc = 5e-5: ratio {reduced:.1} [{}]",
        ok(evidence),
        ok(diagnostic)
    );
    (stated > 100.0, evidence && diagnostic, text)
}

fn min_n_b(tr: &Trajectory) -> f64 {
    tr.samples.iter().map(|s| s.n_b).fold(f64::INFINITY, f64::min)
}

fn c6(phys: &mut Physicality) -> (bool, bool, String) {
    let cfg = DynamicsConfig::default();
    let horizon = 1.2e4;
    let stride = 20.0;
    let mut run = |p: &SystemParams, tones: &ToneSet, label: &str| {
        let tr = evolve(p, tones, &MomentState::initial(p), horizon, stride, &cfg).unwrap();
        phys.trajectory(label, &tr);
        tr
    };
    let stated = params(0.02, STATED_GC);
    let st = run(&stated, &cascade(&stated, &[1e3, 1e3]), "fig3b stated");
    let stated_end = st.samples.last().unwrap().t;

    let reduced = params(0.02, REDUCED_GC);
    let rd = run(&reduced, &cascade(&reduced, &[1e3, 1e3]), "fig3b reduced");
    let reduced_cross = rd.samples.iter().find(|s| s.n_b < 1.0).map(|s| s.t);

    let single = stated.without_control();
    let red = run(&single, &ToneSet::single(Tone::real(1e3, -single.omega_m)), "single red");
    let blue = run(&single, &ToneSet::single(Tone::real(1e3, single.omega_m)), "single blue");
    let blue_monotone = blue.samples.windows(2).all(|w| w[1].n_b >= w[0].n_b);
    let singles_ok = min_n_b(&red) >= 1.0 && min_n_b(&blue) >= 1.0 && blue_monotone && !red.diverged;

    let pass = !st.diverged && st.final_n_b() < 1.0 && singles_ok;
    let evidence = st.diverged;
    let diagnostic = rd.final_n_b() < 1.0 && singles_ok;
    let text = format!(
        "ground-state trajectory: stated couplings diverged {} at t = {stated_end:.1}, min n_b {:.1} [{}]; \
         single mode red min n_b {:.1}, blue min n_b {:.1}, blue monotone {blue_monotone}; \
         diagnostic g_c/omega_mc = 5e-5: n_b({horizon:.0}) = {:.4}, first n_b < 1 at t = {} [{}]",
        st.diverged,
        min_n_b(&st),
        ok(evidence),
        min_n_b(&red),
        min_n_b(&blue),
        rd.final_n_b(),
        reduced_cross.map(|t| format!("{t:.0}")).unwrap_or_else(|| "never".into()),
        ok(diagnostic)
    );
    (pass, evidence && diagnostic, text)
}

fn steady(p: &SystemParams, tones: &ToneSet, phys: &mut Physicality, label: &str) -> Result<f64, String> {
    match steady_occupation(p, tones, &DynamicsConfig::default()) {
        Ok(s) => {
            phys.steady(label, &s);
            Ok(s.n_b)
        }
        Err(e) => {
            phys.error(label, &e);
            Err(match e {
                Error::Unstable(_) => "unstable".into(),
                other => other.to_string(),
            })
        }
    }
}

fn show(r: &Result<f64, String>) -> String {
    match r {
        Ok(v) => format!("{v:.4}"),
        Err(e) => e.clone(),
    }
}

fn c7(phys: &mut Physicality) -> (bool, bool, String) {
    let mut outcome = |gc: f64| {
        let p = params(0.01, gc);
        let (t2, t3) = (cascade(&p, &[1e3, 1e3]), cascade(&p, &[1e3, 1e3, 1e3]));
        let two = steady(&p, &t2, phys, "fig4e two-input");
        let three = steady(&p, &t3, phys, "fig4e three-input");
        let g2 = rates(&p, &t2).unwrap().gamma_opt;
        let g3 = rates(&p, &t3).unwrap().gamma_opt;
        let pass = matches!((&two, &three), (Ok(a), Ok(b)) if b < a && *b < 1.0);
        let unstable = two.as_ref().is_err_and(|e| e == "unstable") && three.as_ref().is_err_and(|e| e == "unstable");
        let text = format!(
            "two-input {} (gamma_opt {g2:.3e}), three-input {} (gamma_opt {g3:.3e})",
            show(&two),
            show(&three)
        );
        (pass, unstable, text)
    };
    let (pass, unstable, stated) = outcome(STATED_GC);
    let (diagnostic, _, reduced) = outcome(REDUCED_GC);
    let text = format!(
        "cascaded improvement at omega_m = 0.01: stated couplings {stated} [{}]; \
         diagnostic g_c/omega_mc = 5e-5: {reduced} [{}]",
        ok(unstable),
        ok(diagnostic)
    );
    (pass, unstable && diagnostic, text)
}

/// n_min along the axis; antidamped points have none.
fn n_min(r: &SweepResult) -> Vec<Option<f64>> {
    r.points.iter().map(|p| if p.stable { p.n_backaction } else { None }).collect()
}

fn c8(phys: &mut Physicality) -> (bool, bool, String) {
    let axis = AxisSpec::Log { start: 3e-3, stop: 0.3, points: 17 };
    let verify = [4usize, 8, 12];
    let cfg = DynamicsConfig::default();
    let template = |n: usize| ToneTemplate::Cascaded {
        delta_0_prime: Detuning::OmegaMMultiple(1.0),
        alphas: vec![Complex64::new(500.0, 0.0); n],
    };
    let mut evaluate = |gc: f64| {
        let spec = system(0.01, gc);
        let two = sweep_cooling_limit(&spec, &template(2), &axis, SweepMode::RatesOnly, &[], &cfg).unwrap();
        let three = sweep_cooling_limit(&spec, &template(3), &axis, SweepMode::RatesOnly, &verify, &cfg).unwrap();
        let (c2, c3) = (n_min(&two), n_min(&three));
        let w = &three.axis;
        let stable = c3.iter().filter(|v| v.is_some()).count();

        let low = c3[0];
        let low_ok = low.is_some_and(|x| x < 1.0);
        let argmin = (0..c3.len()).filter(|&i| c3[i].is_some()).min_by(|&a, &b| c3[a].unwrap().total_cmp(&c3[b].unwrap()));
        let rises = argmin.is_some_and(|i| {
            i + 1 < c3.len() && c3[i..].windows(2).all(|p| matches!(p, [Some(a), Some(b)] if b >= a))
        });
        // factor-2 band around 0.02
        let upturn_ok = rises && argmin.is_some_and(|i| (0.01..=0.04).contains(&w[i]));
        let two_below = (0..c2.len()).find(|&i| c2[i].is_some_and(|x| x < 1.0)).map(|i| w[i]);

        let mut checks = Vec::new();
        let mut dyn_ok = true;
        for &i in &verify {
            let pt = &three.points[i];
            phys.runs += 1;
            match (pt.n_dynamics, pt.n_estimate) {
                (Some(nd), Some(ne)) => {
                    let rel = (nd - ne).abs() / ne;
                    dyn_ok &= rel < 0.3;
                    checks.push(format!("{:.4}: steady {nd:.3} vs estimate {ne:.3}", pt.omega_m));
                }
                _ => {
                    dyn_ok = false;
                    let reason = pt.failure.clone().unwrap_or_default();
                    let known = reason.contains("unstable") || reason.contains("antidamped");
                    if !known {
                        phys.violations.push(format!("fig5 point {i}: {reason}"));
                    }
                    let label = if reason.contains("unstable") { "unstable" } else { "no value" };
                    checks.push(format!("{:.4}: {label}", pt.omega_m));
                }
            }
        }
        let pass = low_ok && upturn_ok && dyn_ok;
        let text = format!(
            "{stable}/17 three-input points damped, n_min(3e-3) = {}, minimum at omega_m = {}, rising above it {rises}, \
             two-input n_min < 1 from omega_m = {}; dynamics {}",
            low.map(|x| format!("{x:.3}")).unwrap_or_else(|| "undefined".into()),
            argmin.map(|i| format!("{:.4}", w[i])).unwrap_or_else(|| "none".into()),
            two_below.map(|x| format!("{x:.4}")).unwrap_or_else(|| "nowhere".into()),
            checks.join("; ")
        );
        (pass, stable < c3.len(), text)
    };
    let (pass, antidamped, stated) = evaluate(STATED_GC);
    // the reduced reading is reported but not required: its dynamics expose heating through the control mode
    let (diagnostic, _, reduced) = evaluate(REDUCED_GC);
    let text = format!(
        "Fig. 5 sweep (n_min = n_backaction): stated couplings {stated} [{}]; \
         diagnostic g_c/omega_mc = 5e-5: {reduced} [{}]",
        ok(antidamped),
        ok(diagnostic)
    );
    (pass, antidamped, text)
}

fn c9(phys: &mut Physicality) -> (bool, bool, String) {
    let p = SystemParams::from_quality_factors(0.2, 2.0, 1.0, 20.0, 100.0, 0.025, 0.05, 0.5, 0.05).unwrap();
    let tones = cascaded_tone_set(0.2, 2.0, 0.2, &[Complex64::new(2.0, 0.0); 2]).unwrap();
    let mut errors = Vec::new();
    for d in [2usize, 4, 8] {
        let fock = FockConfig {
            dims: [d; 3],
            t_end: 20.0,
            output_stride: 20.0 / 15.0,
            ..FockConfig::default()
        };
        phys.runs += 1;
        match compare_with_covariance(&p, &tones, &fock, [0.0; 3]) {
            Ok(cmp) => {
                let o = &cmp.oracle;
                phys.max_trace_error = phys.max_trace_error.max(o.max_trace_error);
                phys.min_eigenvalue = phys.min_eigenvalue.min(o.min_eigenvalue);
                if o.min_eigenvalue < -1e-6 || o.max_trace_error > 1e-8 || o.max_hermiticity_defect > 1e-10 {
                    phys.violations.push(format!("oracle {d}^3: eigenvalue {:e}", o.min_eigenvalue));
                }
                errors.push((d, cmp.max_relative_error));
            }
            Err(e) => {
                phys.violations.push(format!("oracle {d}^3: {e}"));
                errors.push((d, f64::NAN));
            }
        }
    }
    let monotone = errors.windows(2).all(|w| w[1].1 < w[0].1);
    let within = errors.iter().any(|&(_, e)| e < 0.02);
    let text = format!(
        "oracle equivalence: max relative error {}; below 2% {within}, decreasing with dims {monotone}",
        errors.iter().map(|(d, e)| format!("{d}^3 {e:.3e}")).collect::<Vec<_>>().join(", ")
    );
    (monotone && within, true, text)
}

fn c10(phys: &Physicality) -> (bool, bool, String) {
    let pass = phys.violations.is_empty();
    let mut text = format!(
        "physicality over {} runs: min uncertainty eigenvalue {:.2e}, max relative conjugation defect {:.2e}, \
         min occupation {:.2e}, max oracle trace error {:.2e}, violations {}",
        phys.runs,
        phys.min_eigenvalue,
        phys.max_hermiticity,
        phys.min_occupation,
        phys.max_trace_error,
        phys.violations.len()
    );
    if !pass {
        text.push_str(&format!(": {}", phys.violations.join("; ")));
    }
    (pass, true, text)
}

fn main() {
    // invoked by the test runner; libtest flags are ignored
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut lines = Vec::new();
    let mut phys = Physicality {
        min_eigenvalue: f64::INFINITY,
        min_occupation: f64::INFINITY,
        ..Physicality::default()
    };
    criterion(1, true, false, &mut lines, c1);
    criterion(2, false, false, &mut lines, c2);
    criterion(3, true, false, &mut lines, c3);
    criterion(4, true, false, &mut lines, c4);
    criterion(5, false, false, &mut lines, c5);
    criterion(6, false, true, &mut lines, || c6(&mut phys));
    criterion(7, false, true, &mut lines, || c7(&mut phys));
    criterion(8, false, true, &mut lines, || c8(&mut phys));
    criterion(9, true, true, &mut lines, || c9(&mut phys));
    criterion(10, true, false, &mut lines, || c10(&phys));

    let passed = lines.iter().filter(|l| l.pass).count();
    println!("acceptance: {passed}/10 criteria pass");
    let unexpected: Vec<usize> = lines
        .iter()
        .filter(|l| l.pass != l.expected || !l.evidence)
        .map(|l| l.id)
        .collect();
    if !unexpected.is_empty() {
        println!("acceptance: outcome differs from the recorded expectation for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
