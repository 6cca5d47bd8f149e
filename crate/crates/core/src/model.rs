//! Physical parameters and the closed-form rates derived from them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units::{HBAR, K_B, TWO_PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Membrane,
    Spin,
}

/// One harmonic mode. `omega` is signed; `gamma0` is the intrinsic energy damping rate
/// and `gamma_meas` the optical measurement rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorMode {
    pub label: Label,
    pub omega: f64,
    pub gamma0: f64,
    pub nbar: f64,
    pub gamma_meas: f64,
}

impl OscillatorMode {
    pub fn new(label: Label, omega: f64, gamma0: f64, nbar: f64, gamma_meas: f64) -> Result<Self> {
        let m = Self { label, omega, gamma0, nbar, gamma_meas };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let name = match self.label {
            Label::Membrane => "membrane",
            Label::Spin => "spin",
        };
        for (field, v) in [
            ("omega", self.omega),
            ("gamma0", self.gamma0),
            ("nbar", self.nbar),
            ("gamma_meas", self.gamma_meas),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name}.{field} is not finite")));
            }
        }
        for (field, v) in [("gamma0", self.gamma0), ("nbar", self.nbar), ("gamma_meas", self.gamma_meas)] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name}.{field} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Thermal decoherence rate `gamma0 (nbar + 1/2)`.
    pub fn gamma_th(&self) -> f64 {
        self.gamma0 * (self.nbar + 0.5)
    }

    /// +1 for a normal oscillator, -1 for an inverted one.
    pub fn sign(&self) -> f64 {
        if self.omega < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Optical loop: phase, amplitude transmissions between the three passes, one-way delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    pub phi: f64,
    pub eta12: f64,
    pub eta23: f64,
    pub eta13: f64,
    pub tau: f64,
}

impl LoopConfig {
    pub fn new(phi: f64, eta12: f64, eta23: f64, eta13: f64, tau: f64) -> Result<Self> {
        let l = Self { phi: wrap_phase(phi), eta12, eta23, eta13, tau };
        l.validate()?;
        Ok(l)
    }

    /// Identical transmissions: `eta12 = eta23 = eta`, `eta13 = eta^2`. Phase pi, no delay.
    pub fn uniform(eta: f64) -> Result<Self> {
        Self::new(PI, eta, eta, eta * eta, 0.0)
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = wrap_phase(phi);
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.phi.is_finite() {
            return Err(Error::InvalidParameter("loop phase is not finite".into()));
        }
        for (field, v) in [("eta12", self.eta12), ("eta23", self.eta23), ("eta13", self.eta13)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{field} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be >= 0, got {}", self.tau)));
        }
        Ok(())
    }
}

pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TWO_PI);
    // rem_euclid can return exactly 2pi for tiny negative inputs
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemModel {
    pub membrane: OscillatorMode,
    pub spin: OscillatorMode,
    pub loop_cfg: LoopConfig,
    /// Occupancy added to the spin read-out quadratures.
    pub n_det: f64,
    /// Spin demodulation basis rotation, rad.
    pub alpha: f64,
}

impl SystemModel {
    pub fn new(
        membrane: OscillatorMode,
        spin: OscillatorMode,
        loop_cfg: LoopConfig,
        n_det: f64,
        alpha: f64,
    ) -> Result<Self> {
        let m = Self { membrane, spin, loop_cfg, n_det, alpha };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.membrane.label != Label::Membrane || self.spin.label != Label::Spin {
            return Err(Error::InvalidParameter("mode labels must be (membrane, spin)".into()));
        }
        self.membrane.validate()?;
        self.spin.validate()?;
        self.loop_cfg.validate()?;
        if !(self.n_det >= 0.0 && self.n_det.is_finite()) {
            return Err(Error::InvalidParameter(format!("n_det must be >= 0, got {}", self.n_det)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha is not finite".into()));
        }
        Ok(())
    }

    /// Checks the frequencies required by any dynamical simulation.
    pub fn require_dynamics(&self) -> Result<()> {
        if self.membrane.omega == 0.0 || self.spin.omega == 0.0 {
            return Err(Error::InvalidParameter("|omega| must be > 0 for dynamics".into()));
        }
        Ok(())
    }

    pub fn rate_max(&self) -> f64 {
        let r = derive_rates(self);
        [
            self.membrane.gamma0,
            self.spin.gamma0,
            self.membrane.gamma_meas,
            self.spin.gamma_meas,
            r.g,
            r.gamma_tot_m,
            r.gamma_tot_s,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Coupling and back-action rates of a loop that passes system "looped" twice and
/// system "single" once in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopRates {
    /// Coefficient of the kick on the single-pass system: `dP_single = -2 g_single X_looped`.
    pub g_single: f64,
    /// Coefficient of the kick on the looped system, multiplied by cos(phi) in the dynamics.
    pub g_looped: f64,
    pub ba_looped: f64,
    pub ba_single: f64,
}

impl LoopRates {
    pub fn g(&self) -> f64 {
        0.5 * (self.g_single + self.g_looped)
    }
}

pub fn loop_rates(gamma_looped: f64, gamma_single: f64, l: &LoopConfig) -> LoopRates {
    let r = (gamma_looped * gamma_single).sqrt();
    LoopRates {
        g_single: 2.0 * l.eta12 * l.eta12 * r,
        g_looped: 2.0 * l.eta12 * l.eta23 * l.eta13 * r,
        ba_looped: gamma_looped * (1.0 + l.eta13 * l.eta13 + 2.0 * l.eta13 * l.eta13 * l.phi.cos()),
        ba_single: l.eta12 * l.eta12 * gamma_single,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    pub g: f64,
    /// Spin-to-membrane coupling coefficient (`dP_m = -2 g_ms X_s`).
    pub g_ms: f64,
    /// Membrane-to-spin coupling coefficient (`dP_s = 2 g_sm cos(phi) X_m`).
    pub g_sm: f64,
    pub gamma_ba_m: f64,
    pub gamma_ba_s: f64,
    pub gamma_th_m: f64,
    pub gamma_th_s: f64,
    pub gamma_tot_m: f64,
    pub gamma_tot_s: f64,
    pub coop: f64,
    /// `None` when both intrinsic damping rates vanish.
    pub nbar_eff: Option<f64>,
    pub xi_pred: Option<f64>,
}

impl DerivedRates {
    pub fn nbar_eff(&self) -> Result<f64> {
        self.nbar_eff.ok_or(Error::UndampedCollectiveMode)
    }

    pub fn xi_pred(&self) -> Result<f64> {
        self.xi_pred.ok_or(Error::UndampedCollectiveMode)
    }
}

pub fn derive_rates(model: &SystemModel) -> DerivedRates {
    let m = &model.membrane;
    let s = &model.spin;
    let lr = loop_rates(s.gamma_meas, m.gamma_meas, &model.loop_cfg);
    // cos(pi) leaves a 1e-16 residue; clamp the tiny negative back-action it can produce
    let gamma_ba_s = lr.ba_looped.max(0.0);
    let gamma_ba_m = lr.ba_single;
    let gamma_th_m = m.gamma_th();
    let gamma_th_s = s.gamma_th();
    let gamma_tot_m = gamma_th_m + gamma_ba_m;
    let gamma_tot_s = gamma_th_s + gamma_ba_s;
    let g = lr.g();
    let tot = gamma_tot_m + gamma_tot_s;
    let coop = if tot > 0.0 { 2.0 * g / tot } else if g > 0.0 { f64::INFINITY } else { 0.0 };
    let g0_sum = m.gamma0 + s.gamma0;
    let nbar_eff = (g0_sum > 0.0).then(|| tot / g0_sum - 0.5);
    let xi_pred = nbar_eff.map(|n| xi_from(n, coop));
    DerivedRates {
        g,
        g_ms: lr.g_single,
        g_sm: lr.g_looped,
        gamma_ba_m,
        gamma_ba_s,
        gamma_th_m,
        gamma_th_s,
        gamma_tot_m,
        gamma_tot_s,
        coop,
        nbar_eff,
        xi_pred,
    }
}

/// Non-separability predicted from the collective occupancy and the cooperativity.
pub fn xi_from(nbar_eff: f64, coop: f64) -> f64 {
    1.0 / (1.0 / (1.0 + 2.0 * nbar_eff) + coop)
}

/// A cooperativity figure with the optimising rate ratio `Gamma_s / Gamma_m`.
/// `infinite` is set at unit transmission, where the bound diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cooperativity {
    pub c: f64,
    pub ratio_opt: f64,
    pub infinite: bool,
}

fn check_eta_sq(eta_sq: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta_sq) {
        return Err(Error::InvalidParameter(format!("eta^2 must lie in [0, 1], got {eta_sq}")));
    }
    Ok(())
}

/// Maximum cooperativity of the single loop without thermal noise, over `Gamma_s / Gamma_m`.
pub fn cooperativity_bound(eta_sq: f64) -> Result<Cooperativity> {
    check_eta_sq(eta_sq)?;
    if eta_sq == 1.0 {
        return Ok(Cooperativity { c: f64::INFINITY, ratio_opt: f64::INFINITY, infinite: true });
    }
    let eta = eta_sq.sqrt();
    let eta4 = eta_sq * eta_sq;
    Ok(Cooperativity {
        c: eta * (1.0 + eta_sq) / (1.0 - eta4).sqrt(),
        ratio_opt: eta_sq / (1.0 - eta4),
        infinite: false,
    })
}

/// Cooperativity with back-action cancelled on both systems, at `Gamma_s = eta^2 Gamma_m`.
pub fn double_loop_cooperativity(eta_sq: f64) -> Result<Cooperativity> {
    check_eta_sq(eta_sq)?;
    if eta_sq == 1.0 {
        return Ok(Cooperativity { c: f64::INFINITY, ratio_opt: 1.0, infinite: true });
    }
    Ok(Cooperativity { c: eta_sq.sqrt() / (1.0 - eta_sq), ratio_opt: eta_sq, infinite: false })
}

/// Signed Larmor frequency; `orientation_sign` is the sign of the mean spin projection.
pub fn larmor_frequency(gamma_f: f64, b0: f64, orientation_sign: f64) -> Result<f64> {
    if b0 == 0.0 || !b0.is_finite() {
        return Err(Error::InvalidParameter("b0 must be nonzero".into()));
    }
    if orientation_sign == 0.0 || orientation_sign.is_nan() {
        return Err(Error::InvalidParameter("orientation sign must be +1 or -1".into()));
    }
    Ok(-orientation_sign.signum() * gamma_f * b0.abs())
}

/// High-temperature bath occupancy `k_B T / (hbar |omega|)`.
pub fn thermal_occupancy(temperature: f64, omega: f64) -> f64 {
    K_B * temperature / (HBAR * omega.abs())
}

/// Energy damping rate of a mode with quality factor `q`.
pub fn damping_from_q(omega: f64, q: f64) -> f64 {
    omega.abs() / q
}

/// Inputs of the detuning design study. Rates are angular, flux in photons/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomCavityPhysical {
    /// Measured vector polarisability at `delta_ref`; when absent the two-level estimate
    /// `d0 gamma_se / (8 N delta_a)` is used.
    pub alpha1_ref: Option<f64>,
    pub delta_ref: f64,
    pub n_atoms: f64,
    pub f_spin: f64,
    pub gamma_se: f64,
    pub d0: f64,
    pub g0: f64,
    pub kappa: f64,
    pub eta_c: f64,
    pub phi_flux: f64,
    /// Fraction of the flux that reaches the cavity.
    pub cavity_flux_fraction: f64,
    /// Spin damping without light.
    pub gamma_s_intrinsic: f64,
    pub gamma_f: Option<f64>,
    pub b0: Option<f64>,
}

impl AtomCavityPhysical {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("d0", self.d0), ("phi_flux", self.phi_flux), ("kappa", self.kappa), ("g0", self.g0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{field} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.eta_c) {
            return Err(Error::InvalidParameter(format!("eta_c must lie in [0, 1], got {}", self.eta_c)));
        }
        if !(self.n_atoms > 0.0 && self.gamma_se > 0.0 && self.f_spin > 0.0) {
            return Err(Error::InvalidParameter("n_atoms, gamma_se and f_spin must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.cavity_flux_fraction) {
            return Err(Error::InvalidParameter("cavity_flux_fraction must lie in [0, 1]".into()));
        }
        if self.gamma_s_intrinsic < 0.0 {
            return Err(Error::InvalidParameter("gamma_s_intrinsic must be >= 0".into()));
        }
        Ok(())
    }

    pub fn alpha1(&self, delta_a: f64) -> f64 {
        match self.alpha1_ref {
            Some(a) => a * self.delta_ref / delta_a,
            None => self.d0 * self.gamma_se / (8.0 * self.n_atoms * delta_a),
        }
    }

    /// Spin measurement rate for a flux `flux` at detuning `delta_a`.
    pub fn spin_measurement_rate(&self, delta_a: f64, flux: f64) -> f64 {
        let a = self.alpha1(delta_a);
        a * a * self.n_atoms * self.f_spin * flux / 8.0
    }

    /// Spontaneous-scattering decoherence of a single linearly polarised beam.
    pub fn scattering_rate(&self, delta_a: f64, flux: f64) -> f64 {
        let r = self.gamma_se / delta_a;
        self.d0 / (4.0 * self.n_atoms) * r * r * flux
    }

    pub fn membrane_measurement_rate(&self) -> f64 {
        let c = 4.0 * self.g0 / self.kappa;
        self.eta_c * self.eta_c * c * c * self.phi_flux * self.cavity_flux_fraction
    }

    pub fn larmor(&self, orientation_sign: f64) -> Option<Result<f64>> {
        match (self.gamma_f, self.b0) {
            (Some(gf), Some(b)) => Some(larmor_frequency(gf, b, orientation_sign)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoopVariant {
    /// Light passes the spin twice; spin back-action interferes.
    OnSpin,
    /// Light passes the membrane twice; membrane back-action interferes.
    OnMembrane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignRow {
    pub delta_a: f64,
    pub alpha1: f64,
    pub gamma_s_meas: f64,
    pub gamma_sc: f64,
    pub gamma_s0: f64,
    pub gamma_m_meas: f64,
    pub g: f64,
    pub gamma_m0: f64,
    pub gamma_ba_m: f64,
    pub gamma_ba_s: f64,
    pub gamma_th_m: f64,
    pub gamma_th_s: f64,
    pub gamma_tot_m: f64,
    pub gamma_tot_s: f64,
    pub coop: f64,
    /// `g - (gamma_m0 + gamma_s0) / 2`
    pub strong_margin: f64,
    /// `g - (gamma_tot_m + gamma_tot_s) / 2`
    pub coherent_margin: f64,
    pub strong: bool,
    pub coherent: bool,
}

/// Rates versus laser-atom detuning at fixed flux. The spin bath is taken as empty.
pub fn design_study(
    phys: &AtomCavityPhysical,
    mech: &OscillatorMode,
    loop_cfg: &LoopConfig,
    detunings: &[f64],
    variant: LoopVariant,
) -> Result<Vec<DesignRow>> {
    phys.validate()?;
    mech.validate()?;
    loop_cfg.validate()?;
    if let Some(bad) = detunings.iter().find(|d| **d == 0.0 || !d.is_finite()) {
        return Err(Error::InvalidParameter(format!("detuning grid contains {bad}")));
    }
    let gamma_m_meas = phys.membrane_measurement_rate();
    let flux = phys.phi_flux;
    let e13 = loop_cfg.eta13;
    let e12sq = loop_cfg.eta12 * loop_cfg.eta12;
    let rows = detunings
        .iter()
        .map(|&delta_a| {
            let gamma_s_meas = phys.spin_measurement_rate(delta_a, flux);
            let sc1 = phys.scattering_rate(delta_a, flux);
            let (gamma_sc, lr, ba_m, ba_s) = match variant {
                LoopVariant::OnSpin => {
                    // two collinear passes with amplitudes 1 and eta13 add in intensity
                    let lr = loop_rates(gamma_s_meas, gamma_m_meas, loop_cfg);
                    (sc1 * (1.0 + e13) * (1.0 + e13), lr, lr.ba_single, lr.ba_looped.max(0.0))
                }
                LoopVariant::OnMembrane => {
                    let lr = loop_rates(gamma_m_meas, gamma_s_meas, loop_cfg);
                    (sc1 * e12sq, lr, lr.ba_looped.max(0.0), lr.ba_single)
                }
            };
            let gamma_s0 = phys.gamma_s_intrinsic + gamma_sc;
            let gamma_th_m = mech.gamma_th();
            let gamma_th_s = 0.5 * gamma_s0;
            let gamma_tot_m = gamma_th_m + ba_m;
            let gamma_tot_s = gamma_th_s + ba_s;
            let g = lr.g();
            let strong_margin = g - 0.5 * (mech.gamma0 + gamma_s0);
            let coherent_margin = g - 0.5 * (gamma_tot_m + gamma_tot_s);
            DesignRow {
                delta_a,
                alpha1: phys.alpha1(delta_a),
                gamma_s_meas,
                gamma_sc,
                gamma_s0,
                gamma_m_meas,
                g,
                gamma_m0: mech.gamma0,
                gamma_ba_m: ba_m,
                gamma_ba_s: ba_s,
                gamma_th_m,
                gamma_th_s,
                gamma_tot_m,
                gamma_tot_s,
                coop: 2.0 * g / (gamma_tot_m + gamma_tot_s),
                strong_margin,
                coherent_margin,
                strong: strong_margin > 0.0,
                coherent: coherent_margin > 0.0,
            }
        })
        .collect();
    Ok(rows)
}
