//! Stokes-vector algebra of the polarisation interface and the loop output field.

use crate::error::{Error, Result};
use crate::model::SystemModel;

/// Flux-normalised Stokes vector, photons/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector {
    pub s0: f64,
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl StokesVector {
    pub fn new(s0: f64, sx: f64, sy: f64, sz: f64) -> Self {
        Self { s0, sx, sy, sz }
    }

    pub fn polarized_norm(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.polarized_norm() <= self.s0 * (1.0 + tol) + tol
    }
}

/// Linear retarder with fast axis at `theta` and retardance `delta` acting on `(S_x, S_y, S_z)`.
pub fn retarder(s: &StokesVector, theta: f64, delta: f64) -> StokesVector {
    let (s2, c2) = (2.0 * theta).sin_cos();
    let (sd, cd) = delta.sin_cos();
    let sx = (c2 * c2 + s2 * s2 * cd) * s.sx + c2 * s2 * (1.0 - cd) * s.sy + s2 * sd * s.sz;
    let sy = c2 * s2 * (1.0 - cd) * s.sx + (s2 * s2 + c2 * c2 * cd) * s.sy - c2 * sd * s.sz;
    let sz = -s2 * sd * s.sx + c2 * sd * s.sy + cd * s.sz;
    StokesVector { s0: s.s0, sx, sy, sz }
}

/// Half-wave plate at angle `theta`.
pub fn hwp(s: &StokesVector, theta: f64) -> StokesVector {
    let (s4, c4) = (4.0 * theta).sin_cos();
    StokesVector { s0: s.s0, sx: s.sx * c4 + s.sy * s4, sy: -s.sy * c4 + s.sx * s4, sz: -s.sz }
}

pub fn qwp(s: &StokesVector, theta: f64) -> StokesVector {
    retarder(s, theta, std::f64::consts::FRAC_PI_2)
}

/// Quarter-, half-, quarter-wave plate stack rotating the polarisation about `S_x` by `phi`.
pub fn loop_phase_stack(s: &StokesVector, phi: f64) -> StokesVector {
    use std::f64::consts::{FRAC_PI_4, PI};
    let a = qwp(s, FRAC_PI_4);
    let b = hwp(&a, (PI + phi) / 4.0);
    qwp(&b, FRAC_PI_4)
}

/// Closed form of [`loop_phase_stack`].
pub fn rotate_about_x(s: &StokesVector, phi: f64) -> StokesVector {
    let (sp, cp) = phi.sin_cos();
    StokesVector { s0: s.s0, sx: s.sx, sy: s.sy * cp - s.sz * sp, sz: s.sz * cp + s.sy * sp }
}

/// Quadrature amplitudes of the `y`-polarised mode around an `x`-polarised carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedField {
    pub mean_flux: f64,
    pub x_l: f64,
    pub p_l: f64,
    /// Fluctuations are small against the carrier.
    pub in_regime: bool,
}

/// Fluctuation-to-carrier ratio above which the linearisation is reported as violated.
pub const LINEARIZATION_LIMIT: f64 = 0.1;

/// `S_y = sqrt(S0) X_L`, `S_z = sqrt(S0) P_L` with `S0 = flux / 2`.
pub fn linearize(s: &StokesVector, x_polarized_flux: f64) -> Result<LinearizedField> {
    if !(x_polarized_flux > 0.0) {
        return Err(Error::InvalidParameter("carrier flux must be > 0".into()));
    }
    let s0 = 0.5 * x_polarized_flux;
    let root = s0.sqrt();
    let fluct = (s.sy * s.sy + s.sz * s.sz).sqrt();
    Ok(LinearizedField {
        mean_flux: x_polarized_flux,
        x_l: s.sy / root,
        p_l: s.sz / root,
        in_regime: fluct <= LINEARIZATION_LIMIT * s0,
    })
}

pub fn delinearize(f: &LinearizedField) -> StokesVector {
    let s0 = 0.5 * f.mean_flux;
    let root = s0.sqrt();
    StokesVector { s0, sx: s0, sy: root * f.x_l, sz: root * f.p_l }
}

/// RMS of the output spin signal relative to a single pass.
pub fn interference_contrast(phi: f64, omega_s: f64, tau: f64) -> f64 {
    let c = phi.cos();
    (1.0 + c * c + 2.0 * c * (2.0 * omega_s * tau).cos()).max(0.0).sqrt()
}

/// Uniformly sampled signal with linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Self {
        Self { t0, dt, values }
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        let x = (t - self.t0) / self.dt;
        let last = self.values.len().saturating_sub(1) as f64;
        let eps = 1e-9;
        if self.values.is_empty() || x < -eps || x > last + eps {
            return Err(Error::InsufficientHistory { t });
        }
        let x = x.clamp(0.0, last);
        let k = (x.floor() as usize).min(self.values.len() - 1);
        if k + 1 >= self.values.len() {
            return Ok(self.values[k]);
        }
        let f = x - k as f64;
        Ok(self.values[k] + f * (self.values[k + 1] - self.values[k]))
    }
}

/// Mean output quadratures of the light leaving the loop. Input and loss-port vacua have
/// zero mean and unit total variance weight, tracked by `noise_variance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputSample {
    pub x: f64,
    pub p: f64,
    pub noise_variance: f64,
}

/// Output field at `t` from histories of `X_s` and `X_m`.
pub fn output_quadrature(
    model: &SystemModel,
    spin_history: &SampledSignal,
    membrane_history: &SampledSignal,
    t: f64,
) -> Result<OutputSample> {
    let l = &model.loop_cfg;
    let xs_now = spin_history.at(t)?;
    let xs_late = spin_history.at(t - 2.0 * l.tau)?;
    let xm_late = membrane_history.at(t - l.tau)?;
    Ok(output_from_values(model, xs_now, xs_late, xm_late))
}

/// Same with `X_s(t - 2 tau)` approximated from the current spin quadratures.
pub fn output_quadrature_narrowband(model: &SystemModel, xs: f64, ps: f64, xm_late: f64) -> OutputSample {
    let arg = 2.0 * model.spin.omega * model.loop_cfg.tau;
    let xs_late = xs * arg.cos() - ps * arg.sin();
    output_from_values(model, xs, xs_late, xm_late)
}

fn output_from_values(model: &SystemModel, xs_now: f64, xs_late: f64, xm_late: f64) -> OutputSample {
    let l = &model.loop_cfg;
    let rs = model.spin.gamma_meas.sqrt();
    let rm = model.membrane.gamma_meas.sqrt();
    let pref = 2.0 * l.eta12 * l.eta23;
    let (sp, cp) = l.phi.sin_cos();
    // spin terms share the carrier quadrature; the delayed membrane term enters as i e^{i phi}
    let (sp, cp) = if (l.phi - std::f64::consts::PI).abs() < 1e-15 { (0.0, -1.0) } else { (sp, cp) };
    let x = pref * (rs * xs_now + rs * xs_late * cp - rm * xm_late * sp);
    let p = pref * (rs * xs_late * sp + rm * xm_late * cp);
    OutputSample { x, p, noise_variance: 0.5 }
}
