//! Scenario files: TOML with unit-suffixed quantities such as `"1.957 MHz"`.
//!
//! Frequencies and rates are written as ordinary frequencies (Hz) and stored in angular
//! units after loading. Unknown keys are rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use lightloop::model::{
    damping_from_q, larmor_frequency, thermal_occupancy, AtomCavityPhysical, Label, LoopConfig, LoopVariant,
    OscillatorMode, SystemModel,
};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Time,
    Field,
    Temperature,
    Angle,
    Length,
    Gyromagnetic,
    Flux,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Frequency => "frequency (Hz, kHz, MHz, GHz)",
            Dimension::Time => "time (s, ms, us, ns)",
            Dimension::Field => "magnetic field (T, mT, uT, G, mG)",
            Dimension::Temperature => "temperature (K, mK)",
            Dimension::Angle => "angle (deg, rad)",
            Dimension::Length => "length (m, cm, mm, um)",
            Dimension::Gyromagnetic => "gyromagnetic ratio (Hz/G, kHz/G, MHz/G, Hz/T, MHz/T)",
            Dimension::Flux => "photon flux (1/s)",
        };
        f.write_str(s)
    }
}

/// A number with its unit as written in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Self {
        Self { value, unit: unit.to_string() }
    }

    fn factor(&self, dim: Dimension) -> Option<f64> {
        let u = self.unit.as_str();
        let tp = 2.0 * PI;
        Some(match (dim, u) {
            (Dimension::Frequency, "Hz") => tp,
            (Dimension::Frequency, "kHz") => tp * 1e3,
            (Dimension::Frequency, "MHz") => tp * 1e6,
            (Dimension::Frequency, "GHz") => tp * 1e9,
            (Dimension::Frequency, "rad/s") => 1.0,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "ms") => 1e-3,
            (Dimension::Time, "us" | "µs") => 1e-6,
            (Dimension::Time, "ns") => 1e-9,
            (Dimension::Field, "T") => 1.0,
            (Dimension::Field, "mT") => 1e-3,
            (Dimension::Field, "uT" | "µT") => 1e-6,
            (Dimension::Field, "G") => 1e-4,
            (Dimension::Field, "mG") => 1e-7,
            (Dimension::Temperature, "K") => 1.0,
            (Dimension::Temperature, "mK") => 1e-3,
            (Dimension::Angle, "rad") => 1.0,
            (Dimension::Angle, "deg") => PI / 180.0,
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "cm") => 1e-2,
            (Dimension::Length, "mm") => 1e-3,
            (Dimension::Length, "um" | "µm") => 1e-6,
            (Dimension::Gyromagnetic, "Hz/G") => tp * 1e4,
            (Dimension::Gyromagnetic, "kHz/G") => tp * 1e7,
            (Dimension::Gyromagnetic, "MHz/G") => tp * 1e10,
            (Dimension::Gyromagnetic, "Hz/T") => tp,
            (Dimension::Gyromagnetic, "MHz/T") => tp * 1e6,
            (Dimension::Flux, "1/s" | "/s" | "Hz") => 1.0,
            _ => return None,
        })
    }

    /// Value in SI (angular for frequencies) after checking the unit against `dim`.
    pub fn si(&self, dim: Dimension, key: &str) -> Result<f64, CliError> {
        match self.factor(dim) {
            Some(f) if self.value.is_finite() => Ok(self.value * f),
            Some(_) => Err(CliError::Config(format!("{key}: value is not finite"))),
            None if self.unit.is_empty() => Err(CliError::Config(format!("{key}: missing unit, expected {dim}"))),
            None => Err(CliError::Config(format!("{key}: unit '{}' is not a {dim}", self.unit))),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.unit.is_empty() {
            write!(f, "{}", self.value)
        } else {
            write!(f, "{} {}", self.value, self.unit)
        }
    }
}

pub fn parse_quantity(s: &str) -> Result<Quantity, String> {
    let s = s.trim();
    if let Some((num, unit)) = s.split_once(char::is_whitespace) {
        let value: f64 = num.parse().map_err(|_| format!("cannot read a number from '{s}'"))?;
        return Ok(Quantity { value, unit: unit.trim().to_string() });
    }
    let split = s
        .char_indices()
        .find(|(i, c)| {
            c.is_alphabetic() && !((*c == 'e' || *c == 'E') && s[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
                || *c == '/'
                || *c == 'µ'
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let value: f64 = num.trim().parse().map_err(|_| format!("cannot read a number from '{s}'"))?;
    Ok(Quantity { value, unit: unit.trim().to_string() })
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        if self.unit.is_empty() {
            ser.serialize_f64(self.value)
        } else {
            ser.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Quantity;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string like \"1.957 MHz\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Quantity, E> {
                Ok(Quantity::new(v, ""))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Quantity, E> {
                Ok(Quantity::new(v as f64, ""))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Quantity, E> {
                Ok(Quantity::new(v as f64, ""))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Quantity, E> {
                parse_quantity(v).map_err(E::custom)
            }
        }
        de.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<Quantity>,
    /// Energy damping rate written as a linewidth, `gamma0 / 2pi`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linewidth: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement_rate: Option<Quantity>,
    /// Spin only: Larmor frequency from `gyromagnetic * |field|`, signed by `orientation`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gyromagnetic: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub phase: Quantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta12: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta23: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta13: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<Quantity>,
}

/// Direct coupled-mode parameters, overriding the rates derived from measurement rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub g: Quantity,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_det: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub t_end: Quantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Spin detuning `|W_s| - W_m`.
    pub detuning_start: Quantity,
    pub detuning_stop: Quantity,
    pub detuning_points: usize,
    /// Fourier axis of the spectra, absolute frequency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_start: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_stop: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub target: String,
    pub amplitude: f64,
    pub frequency: Quantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<Quantity>,
    pub start: Quantity,
    pub stop: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeSection {
    pub nbar_m: f64,
    #[serde(default)]
    pub nbar_s: f64,
    pub t_end: Quantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceSection {
    pub phase_points: usize,
    /// Spin precession frequency entering the delayed interference; defaults to `[spin]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin_frequency: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<Quantity>,
    /// Output-field time traces after a spin excitation, membrane decoupled.
    #[serde(default)]
    pub trace: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace_phases: Vec<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_t_end: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_nbar_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParamSection {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    pub g: Quantity,
    pub linewidth_m: Quantity,
    pub linewidth_s: Quantity,
    pub spin_frequency: Quantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_offset: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    pub model: String,
    #[serde(default)]
    pub fix_delay: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighting: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    pub initial: FitParamSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_length: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeSection {
    pub model: String,
    pub truth: FitParamSection,
    pub frequency_start: Quantity,
    pub frequency_stop: Quantity,
    pub frequency_points: usize,
    #[serde(default)]
    pub multiplicative_noise: f64,
    #[serde(default)]
    pub additive_noise: f64,
    #[serde(default)]
    pub phase_noise: Option<Quantity>,
    #[serde(default)]
    pub with_phase: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_ref: Option<Quantity>,
    pub n_atoms: f64,
    pub f_spin: f64,
    pub excited_linewidth: Quantity,
    pub optical_depth: f64,
    pub g0: Quantity,
    pub kappa: Quantity,
    pub eta_c: f64,
    pub photon_flux: Quantity,
    #[serde(default = "one")]
    pub cavity_flux_fraction: f64,
    pub spin_linewidth_intrinsic: Quantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gyromagnetic: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<Quantity>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub detuning_start: Quantity,
    pub detuning_stop: Quantity,
    pub detuning_points: usize,
    #[serde(default = "both_variants")]
    pub variants: Vec<String>,
}

fn both_variants() -> Vec<String> {
    vec!["spin".into(), "membrane".into()]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub membrane: ModeSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin: Option<ModeSection>,
    #[serde(rename = "loop", skip_serializing_if = "Option::is_none")]
    pub loop_: Option<LoopSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exchange: Option<ExchangeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interference: Option<InterferenceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesize: Option<SynthesizeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<AtomsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

pub fn freq(q: &Quantity, key: &str) -> Result<f64, CliError> {
    q.si(Dimension::Frequency, key)
}

pub fn time(q: &Quantity, key: &str) -> Result<f64, CliError> {
    q.si(Dimension::Time, key)
}

pub fn angle(q: &Quantity, key: &str) -> Result<f64, CliError> {
    q.si(Dimension::Angle, key)
}

fn opt<T: Copy>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing key {key}")))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn section<'a, T>(&self, v: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        v.as_ref().ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
    }

    fn mode(&self, sec: &ModeSection, label: Label, name: &str) -> Result<OscillatorMode, CliError> {
        let omega = match (&sec.frequency, &sec.gyromagnetic, &sec.field) {
            (Some(f), None, None) => freq(f, &format!("{name}.frequency"))?,
            (None, Some(gf), Some(b)) => {
                let gf = gf.si(Dimension::Gyromagnetic, &format!("{name}.gyromagnetic"))?;
                let b = b.si(Dimension::Field, &format!("{name}.field"))?;
                larmor_frequency(gf, b, sec.orientation.unwrap_or(1.0)).map_err(|e| CliError::Config(e.to_string()))?
            }
            _ => {
                return Err(CliError::Config(format!(
                    "[{name}] needs either frequency or gyromagnetic and field"
                )))
            }
        };
        let gamma0 = match (&sec.linewidth, sec.quality_factor) {
            (Some(l), None) => freq(l, &format!("{name}.linewidth"))?,
            (None, Some(q)) => damping_from_q(omega, q),
            _ => return Err(CliError::Config(format!("[{name}] needs exactly one of linewidth, quality_factor"))),
        };
        let nbar = match (sec.nbar, &sec.temperature) {
            (Some(n), None) => n,
            (None, Some(t)) => thermal_occupancy(t.si(Dimension::Temperature, &format!("{name}.temperature"))?, omega),
            (None, None) => 0.0,
            _ => return Err(CliError::Config(format!("[{name}] takes nbar or temperature, not both"))),
        };
        let gm = match &sec.measurement_rate {
            Some(q) => freq(q, &format!("{name}.measurement_rate"))?,
            None => 0.0,
        };
        OscillatorMode::new(label, omega, gamma0, nbar, gm).map_err(|e| CliError::Config(format!("[{name}] {e}")))
    }

    pub fn membrane_mode(&self) -> Result<OscillatorMode, CliError> {
        self.mode(&self.membrane, Label::Membrane, "membrane")
    }

    pub fn loop_config(&self) -> Result<LoopConfig, CliError> {
        let l = self.section(&self.loop_, "loop")?;
        let phi = angle(&l.phase, "loop.phase")?;
        let tau = match &l.delay {
            Some(d) => time(d, "loop.delay")?,
            None => 0.0,
        };
        let lc = match (l.eta, l.eta12, l.eta23, l.eta13) {
            (Some(e), None, None, None) => LoopConfig::uniform(e).map(|c| c.with_phi(phi).with_tau(tau)),
            (None, Some(a), Some(b), Some(c)) => LoopConfig::new(phi, a, b, c, tau),
            (None, None, None, None) => LoopConfig::uniform(1.0).map(|c| c.with_phi(phi).with_tau(tau)),
            _ => return Err(CliError::Config("[loop] takes eta or all of eta12, eta23, eta13".into())),
        };
        lc.map_err(|e| CliError::Config(format!("[loop] {e}")))
    }

    pub fn system_model(&self) -> Result<SystemModel, CliError> {
        let spin = self.section(&self.spin, "spin")?;
        let m = self.membrane_mode()?;
        let s = self.mode(spin, Label::Spin, "spin")?;
        let det = self.detection.clone().unwrap_or_default();
        let alpha = match &det.alpha {
            Some(a) => angle(a, "detection.alpha")?,
            None => 0.0,
        };
        SystemModel::new(m, s, self.loop_config()?, det.n_det.unwrap_or(0.0), alpha)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Coupling override `g` in rad/s.
    pub fn direct_coupling(&self) -> Result<Option<f64>, CliError> {
        match &self.coupling {
            Some(c) => Ok(Some(freq(&c.g, "coupling.g")?)),
            None => Ok(None),
        }
    }

    pub fn atoms(&self) -> Result<AtomCavityPhysical, CliError> {
        let a = self.section(&self.atoms, "atoms")?;
        let delta_ref = match (&a.alpha1_ref, &a.detuning_ref) {
            (Some(_), Some(d)) => freq(d, "atoms.detuning_ref")?,
            (None, None) => 0.0,
            _ => return Err(CliError::Config("[atoms] alpha1_ref and detuning_ref go together".into())),
        };
        let phys = AtomCavityPhysical {
            alpha1_ref: a.alpha1_ref,
            delta_ref,
            n_atoms: a.n_atoms,
            f_spin: a.f_spin,
            gamma_se: freq(&a.excited_linewidth, "atoms.excited_linewidth")?,
            d0: a.optical_depth,
            g0: freq(&a.g0, "atoms.g0")?,
            kappa: freq(&a.kappa, "atoms.kappa")?,
            eta_c: a.eta_c,
            phi_flux: a.photon_flux.si(Dimension::Flux, "atoms.photon_flux")?,
            cavity_flux_fraction: a.cavity_flux_fraction,
            gamma_s_intrinsic: freq(&a.spin_linewidth_intrinsic, "atoms.spin_linewidth_intrinsic")?,
            gamma_f: a.gyromagnetic.as_ref().map(|q| q.si(Dimension::Gyromagnetic, "atoms.gyromagnetic")).transpose()?,
            b0: a.field.as_ref().map(|q| q.si(Dimension::Field, "atoms.field")).transpose()?,
        };
        phys.validate().map_err(|e| CliError::Config(format!("[atoms] {e}")))?;
        Ok(phys)
    }

    pub fn design_variants(&self) -> Result<Vec<LoopVariant>, CliError> {
        let d = self.section(&self.design, "design")?;
        d.variants
            .iter()
            .map(|v| match v.as_str() {
                "spin" => Ok(LoopVariant::OnSpin),
                "membrane" => Ok(LoopVariant::OnMembrane),
                other => Err(CliError::Config(format!("design.variants: unknown variant '{other}'"))),
            })
            .collect()
    }
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize, key: &str) -> Result<Vec<f64>, CliError> {
    match n {
        0 => Err(CliError::Config(format!("{key}: need at least one point"))),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}

pub fn require_points(n: Option<usize>, key: &str) -> Result<usize, CliError> {
    opt(n, key)
}
