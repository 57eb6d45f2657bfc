//! System parameters, drive tones and unit conventions.
//!
//! Every rate and frequency is expressed in units of the optical decay rate
//! κ (so `kappa` is normally 1), times in units of 1/κ, and ħ = 1. The
//! mechanical zero-point amplitude `X_ZPF` is fixed to 1; it cancels out of
//! every rate quantity, so force spectra are reported in the arbitrary units
//! this convention implies.
//!
//! Thermal occupations are direct inputs. [`bose_occupation`] converts a
//! ratio ħω/(k_B T) into an occupation when a temperature is what you have.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mechanical zero-point fluctuation amplitude in internal units.
pub const X_ZPF: f64 = 1.0;

/// Static parameters of the cavity plus two mechanical modes.
///
/// `b` is the mode being cooled, `c` the control mode, `a` the optical mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Angular frequency of mode b (κ).
    pub omega_m: f64,
    /// Angular frequency of mode c (κ).
    pub omega_mc: f64,
    /// Optical energy decay rate; the reference unit.
    pub kappa: f64,
    /// Energy decay rate of mode b (κ).
    pub gamma: f64,
    /// Energy decay rate of mode c (κ).
    pub gamma_c: f64,
    /// Single-photon coupling to mode b (κ).
    pub g: f64,
    /// Single-photon coupling to mode c (κ).
    pub g_c: f64,
    /// Thermal occupation of mode b.
    pub n_th: f64,
    /// Thermal occupation of mode c.
    pub n_c_th: f64,
}

impl SystemParams {
    /// Builds parameters with mechanical damping given by quality factors,
    /// `gamma = omega_m / q_m` and `gamma_c = omega_mc / q_mc`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_quality_factors(
        omega_m: f64,
        omega_mc: f64,
        kappa: f64,
        q_m: f64,
        q_mc: f64,
        g: f64,
        g_c: f64,
        n_th: f64,
        n_c_th: f64,
    ) -> Result<Self> {
        positive("q_m", q_m)?;
        positive("q_mc", q_mc)?;
        let params = SystemParams {
            omega_m,
            omega_mc,
            kappa,
            gamma: omega_m / q_m,
            gamma_c: omega_mc / q_mc,
            g,
            g_c,
            n_th,
            n_c_th,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega_m", self.omega_m)?;
        positive("omega_mc", self.omega_mc)?;
        positive("kappa", self.kappa)?;
        positive("gamma", self.gamma)?;
        positive("gamma_c", self.gamma_c)?;
        non_negative("g", self.g)?;
        non_negative("g_c", self.g_c)?;
        non_negative("n_th", self.n_th)?;
        non_negative("n_c_th", self.n_c_th)?;
        Ok(())
    }

    /// Copy with the control-mode coupling switched off.
    pub fn without_control(&self) -> Self {
        SystemParams { g_c: 0.0, ..*self }
    }

    /// Mechanical quality factor of mode b implied by `gamma`.
    pub fn q_m(&self) -> f64 {
        self.omega_m / self.gamma
    }

    pub fn q_mc(&self) -> f64 {
        self.omega_mc / self.gamma_c
    }

    /// Static optomechanical detuning shift for the given intracavity
    /// photon number Σ|α_j|².
    pub fn static_shift(&self, photons: f64) -> f64 {
        2.0 * (self.g * self.g / self.omega_m + self.g_c * self.g_c / self.omega_mc) * photons
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// One drive tone after linearisation: mean intracavity amplitude and
/// the shifted detuning Δ′ (κ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    pub alpha: Complex64,
    pub delta_prime: f64,
}

impl Tone {
    pub fn new(alpha: Complex64, delta_prime: f64) -> Self {
        Tone { alpha, delta_prime }
    }

    /// Real amplitude shorthand.
    pub fn real(alpha: f64, delta_prime: f64) -> Self {
        Tone::new(Complex64::new(alpha, 0.0), delta_prime)
    }

    /// Intracavity photon number |α|².
    pub fn photons(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

/// Ordered drive tones; tone 0 is the cooling tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Tone>", into = "Vec<Tone>")]
pub struct ToneSet {
    tones: Vec<Tone>,
}

impl ToneSet {
    pub fn new(tones: Vec<Tone>) -> Result<Self> {
        if tones.is_empty() {
            return Err(Error::param("tones", "at least one tone is required"));
        }
        for (j, t) in tones.iter().enumerate() {
            if !t.delta_prime.is_finite() {
                return Err(Error::param(format!("tones[{j}].delta_prime"), "must be finite"));
            }
            if !(t.alpha.re.is_finite() && t.alpha.im.is_finite()) {
                return Err(Error::param(format!("tones[{j}].alpha"), "must be finite"));
            }
        }
        for j in 0..tones.len() {
            for k in (j + 1)..tones.len() {
                if tones[j].delta_prime == tones[k].delta_prime {
                    return Err(Error::param(
                        "tones",
                        format!("tones {j} and {k} share detuning {}", tones[j].delta_prime),
                    ));
                }
            }
        }
        Ok(ToneSet { tones })
    }

    pub fn single(tone: Tone) -> Self {
        ToneSet { tones: vec![tone] }
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    pub fn len(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tone> {
        self.tones.iter()
    }

    /// Σ_j |α_j|².
    pub fn total_photons(&self) -> f64 {
        self.tones.iter().map(Tone::photons).sum()
    }

    /// Δ′_0 − Δ′_1, or `None` for a single tone.
    pub fn two_photon_detuning(&self) -> Option<f64> {
        match self.tones.as_slice() {
            [t0, t1, ..] => Some(t0.delta_prime - t1.delta_prime),
            _ => None,
        }
    }

    /// Same detunings with every amplitude set to zero.
    pub fn dark(&self) -> Self {
        ToneSet {
            tones: self
                .tones
                .iter()
                .map(|t| Tone::new(Complex64::new(0.0, 0.0), t.delta_prime))
                .collect(),
        }
    }
}

impl TryFrom<Vec<Tone>> for ToneSet {
    type Error = Error;

    fn try_from(tones: Vec<Tone>) -> Result<Self> {
        ToneSet::new(tones)
    }
}

impl From<ToneSet> for Vec<Tone> {
    fn from(set: ToneSet) -> Self {
        set.tones
    }
}

impl<'a> IntoIterator for &'a ToneSet {
    type Item = &'a Tone;
    type IntoIter = std::slice::Iter<'a, Tone>;

    fn into_iter(self) -> Self::IntoIter {
        self.tones.iter()
    }
}

/// Tone k gets Δ′_k = Δ′_0 − k(ω_mc + ω_m), one tone per amplitude.
pub fn cascaded_tone_set(
    delta_0_prime: f64,
    omega_mc: f64,
    omega_m: f64,
    alphas: &[Complex64],
) -> Result<ToneSet> {
    if alphas.is_empty() {
        return Err(Error::param("alphas", "at least one amplitude is required"));
    }
    let spacing = omega_mc + omega_m;
    let tones = alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| Tone::new(alpha, delta_0_prime - k as f64 * spacing))
        .collect();
    ToneSet::new(tones)
}

/// Bose–Einstein occupation 1/(e^x − 1) for x = ħω/(k_B T).
pub fn bose_occupation(temperature_ratio: f64) -> Result<f64> {
    if temperature_ratio.is_nan() || temperature_ratio <= 0.0 {
        return Err(Error::Domain(format!(
            "temperature ratio must be > 0, got {temperature_ratio}"
        )));
    }
    Ok(1.0 / temperature_ratio.exp_m1())
}

/// A coupling rate given either in κ units or as a fraction of a mode
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Coupling {
    Absolute(f64),
    Ratio(f64),
}

impl Coupling {
    fn resolve(self, frequency: f64) -> f64 {
        match self {
            Coupling::Absolute(v) => v,
            Coupling::Ratio(r) => r * frequency,
        }
    }
}

/// Mechanical damping as a rate or as a quality factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Damping {
    Rate(f64),
    QualityFactor(f64),
}

impl Damping {
    fn resolve(self, name: &str, frequency: f64) -> Result<f64> {
        match self {
            Damping::Rate(v) => Ok(v),
            Damping::QualityFactor(q) => {
                positive(name, q)?;
                Ok(frequency / q)
            }
        }
    }
}

/// Parameter template as written in configuration files.
///
/// Couplings and damping may be tied to the mode frequencies so that a
/// sweep over `omega_m` rescales them. When `n_c_th` is absent it defaults
/// to `n_th * omega_m / omega_mc`, which is the equal-temperature value in
/// the high-temperature limit. The control-mode occupation is not pinned
/// by the reference figures, so results that depend on it should be
/// checked against `n_c_th = n_th` as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub omega_m: f64,
    pub omega_mc: f64,
    pub kappa: f64,
    pub gamma: Damping,
    pub gamma_c: Damping,
    pub g: Coupling,
    pub g_c: Coupling,
    pub n_th: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_c_th: Option<f64>,
}

impl SystemSpec {
    pub fn resolve(&self) -> Result<SystemParams> {
        let params = SystemParams {
            omega_m: self.omega_m,
            omega_mc: self.omega_mc,
            kappa: self.kappa,
            gamma: self.gamma.resolve("gamma", self.omega_m)?,
            gamma_c: self.gamma_c.resolve("gamma_c", self.omega_mc)?,
            g: self.g.resolve(self.omega_m),
            g_c: self.g_c.resolve(self.omega_mc),
            n_th: self.n_th,
            n_c_th: self
                .n_c_th
                .unwrap_or(self.n_th * self.omega_m / self.omega_mc),
        };
        params.validate()?;
        Ok(params)
    }

    /// Same template at a different mechanical frequency.
    pub fn with_omega_m(&self, omega_m: f64) -> Self {
        SystemSpec {
            omega_m,
            ..self.clone()
        }
    }
}

/// A detuning fixed in κ units or tied to the mechanical frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Detuning {
    Absolute(f64),
    OmegaMMultiple(f64),
}

impl Detuning {
    pub fn resolve(self, omega_m: f64) -> f64 {
        match self {
            Detuning::Absolute(v) => v,
            Detuning::OmegaMMultiple(m) => m * omega_m,
        }
    }
}

/// Tones as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ToneTemplate {
    Explicit(ToneSet),
    Cascaded {
        delta_0_prime: Detuning,
        alphas: Vec<Complex64>,
    },
}

impl ToneTemplate {
    pub fn resolve(&self, params: &SystemParams) -> Result<ToneSet> {
        match self {
            ToneTemplate::Explicit(set) => Ok(set.clone()),
            ToneTemplate::Cascaded {
                delta_0_prime,
                alphas,
            } => cascaded_tone_set(
                delta_0_prime.resolve(params.omega_m),
                params.omega_mc,
                params.omega_m,
                alphas,
            ),
        }
    }
}
