//! Response theory with delay (susceptibilities, spectra, normal modes) and delayed
//! mean-value dynamics.
//!
//! Equations of motion, with momentum damping:
//!
//! ```text
//! dX_m/dt = W_m P_m
//! dP_m/dt = -W_m X_m - g_m P_m - 2 g_ms X_s(t - tau)
//! dX_s/dt = W_s P_s
//! dP_s/dt = -W_s X_s - g_s P_s + 4 G_self sin(phi) X_s(t - 2 tau) + 2 g_sm cos(phi) X_m(t - tau)
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{derive_rates, Label, SystemModel};

/// Parameters of the delayed coupled-mode equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledModes {
    pub omega_m: f64,
    pub omega_s: f64,
    pub gamma_m: f64,
    pub gamma_s: f64,
    pub g_ms: f64,
    pub g_sm: f64,
    /// Rate `G_self` of the delayed spin self-interaction.
    pub gamma_self: f64,
    pub phi: f64,
    pub tau: f64,
}

impl CoupledModes {
    pub fn from_model(model: &SystemModel) -> Self {
        let r = derive_rates(model);
        let l = &model.loop_cfg;
        Self {
            omega_m: model.membrane.omega,
            omega_s: model.spin.omega,
            gamma_m: model.membrane.gamma0,
            gamma_s: model.spin.gamma0,
            g_ms: r.g_ms,
            g_sm: r.g_sm,
            gamma_self: l.eta13 * l.eta13 * model.spin.gamma_meas,
            phi: l.phi,
            tau: l.tau,
        }
    }

    /// Reciprocal coupling `g` without spin self-interaction.
    pub fn symmetric(omega_m: f64, omega_s: f64, gamma_m: f64, gamma_s: f64, g: f64, phi: f64, tau: f64) -> Self {
        Self { omega_m, omega_s, gamma_m, gamma_s, g_ms: g, g_sm: g, gamma_self: 0.0, phi, tau }
    }

    pub fn g(&self) -> f64 {
        0.5 * (self.g_ms + self.g_sm)
    }

    /// `|W_s| - W_m`
    pub fn delta(&self) -> f64 {
        self.omega_s.abs() - self.omega_m
    }

    pub fn spin_sign(&self) -> f64 {
        if self.omega_s < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn with_omega_s(mut self, omega_s: f64) -> Self {
        self.omega_s = omega_s;
        self
    }
}

/// `chi_0 = W / (W^2 - w^2 - i w g)`
pub fn bare_chi(omega: f64, big_omega: f64, gamma: f64) -> Complex64 {
    Complex64::new(big_omega, 0.0) / Complex64::new(big_omega * big_omega - omega * omega, -omega * gamma)
}

/// Effective membrane and spin susceptibilities with the delayed loop.
pub fn effective_chi(modes: &CoupledModes, omega: f64) -> (Complex64, Complex64) {
    let chi_m = bare_chi(omega, modes.omega_m, modes.gamma_m);
    let chi_s = bare_chi(omega, modes.omega_s, modes.gamma_s);
    let loop_term = 4.0 * modes.g_ms * modes.g_sm * modes.phi.cos() * Complex64::from_polar(1.0, 2.0 * omega * modes.tau);
    let m = 1.0 / (1.0 / chi_m + loop_term * chi_s);
    let s = 1.0 / (1.0 / chi_s + loop_term * chi_m);
    (m, s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Susceptibility {
    pub omega_grid: Vec<f64>,
    pub values: Vec<Complex64>,
}

pub fn effective_chi_grid(modes: &CoupledModes, grid: &[f64]) -> (Susceptibility, Susceptibility) {
    let (m, s): (Vec<_>, Vec<_>) = grid.iter().map(|&w| effective_chi(modes, w)).unzip();
    (
        Susceptibility { omega_grid: grid.to_vec(), values: m },
        Susceptibility { omega_grid: grid.to_vec(), values: s },
    )
}

/// Rotating-wave normal modes; `gamma_*` are full energy damping rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalModes {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub stable_plus: bool,
    pub stable_minus: bool,
}

impl NormalModes {
    fn from_pair(plus: Complex64, minus: Complex64) -> Self {
        let gp = -2.0 * plus.im;
        let gm = -2.0 * minus.im;
        Self {
            omega_plus: plus.re,
            omega_minus: minus.re,
            gamma_plus: gp,
            gamma_minus: gm,
            stable_plus: gp > 0.0,
            stable_minus: gm > 0.0,
        }
    }

    pub fn stable(&self) -> bool {
        self.stable_plus && self.stable_minus
    }

    pub fn min_gamma(&self) -> f64 {
        self.gamma_plus.min(self.gamma_minus)
    }

    pub fn splitting(&self) -> f64 {
        (self.omega_plus - self.omega_minus).abs()
    }

    fn plus(&self) -> Complex64 {
        Complex64::new(self.omega_plus, -0.5 * self.gamma_plus)
    }

    fn minus(&self) -> Complex64 {
        Complex64::new(self.omega_minus, -0.5 * self.gamma_minus)
    }
}

/// Both complex eigenfrequencies `W - i g / 2`. An inverted spin enters through
/// `|W_s|` and a sign flip of the loop term.
pub fn normal_mode_roots(modes: &CoupledModes) -> (Complex64, Complex64) {
    let ws = modes.omega_s.abs();
    let wbar = 0.5 * (modes.omega_m + ws);
    let delta = ws - modes.omega_m;
    let centre = Complex64::new(wbar, -0.25 * (modes.gamma_m + modes.gamma_s));
    let a = Complex64::new(0.5 * delta, 0.25 * (modes.gamma_m - modes.gamma_s));
    let coupling = modes.spin_sign() * modes.g_ms * modes.g_sm * modes.phi.cos();
    let disc = a * a - coupling * Complex64::from_polar(1.0, 2.0 * wbar * modes.tau);
    let root = disc.sqrt();
    (centre + root, centre - root)
}

/// Normal modes at one parameter point; `+` is the higher-frequency branch.
pub fn normal_modes(modes: &CoupledModes) -> NormalModes {
    let (a, b) = normal_mode_roots(modes);
    if (a.re, -a.im) >= (b.re, -b.im) {
        NormalModes::from_pair(a, b)
    } else {
        NormalModes::from_pair(b, a)
    }
}

/// Normal modes along a sweep of spin detunings `|W_s| - W_m`, continuing each branch
/// from the grid end with the largest detuning.
pub fn normal_mode_sweep(modes: &CoupledModes, detunings: &[f64]) -> Vec<NormalModes> {
    let n = detunings.len();
    if n == 0 {
        return Vec::new();
    }
    let at = |d: f64| {
        let ws = modes.spin_sign() * (modes.omega_m + d);
        normal_mode_roots(&modes.with_omega_s(ws))
    };
    let seed = if detunings[0].abs() >= detunings[n - 1].abs() { 0 } else { n - 1 };
    let mut out = vec![None; n];
    out[seed] = Some(normal_modes(&modes.with_omega_s(modes.spin_sign() * (modes.omega_m + detunings[seed]))));
    let order: Vec<usize> = if seed == 0 { (1..n).collect() } else { (0..n - 1).rev().collect() };
    let mut prev = out[seed].unwrap();
    for i in order {
        let (a, b) = at(detunings[i]);
        let keep = (a - prev.plus()).norm() + (b - prev.minus()).norm();
        let swap = (b - prev.plus()).norm() + (a - prev.minus()).norm();
        let nm = if keep <= swap { NormalModes::from_pair(a, b) } else { NormalModes::from_pair(b, a) };
        out[i] = Some(nm);
        prev = nm;
    }
    out.into_iter().map(|x| x.unwrap()).collect()
}

/// Spin frequency and damping shifts from the delayed self-interaction.
pub fn spin_self_shift(model: &SystemModel) -> (f64, f64) {
    let gs = model.spin.gamma_meas;
    let phi = model.loop_cfg.phi;
    let arg = 2.0 * model.spin.omega * model.loop_cfg.tau;
    (2.0 * gs * phi.sin() * arg.cos(), 4.0 * gs * phi.sin() * arg.sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    pub omega: Vec<f64>,
    pub s_xx: Vec<f64>,
}

/// Symmetrised force spectra `(S_Fm, S_Fs)` at frequency `omega`, vacuum level 1/2.
pub fn force_spectra(model: &SystemModel, omega: f64) -> (f64, f64) {
    let r = derive_rates(model);
    let m = &model.membrane;
    let s = &model.spin;
    let l = &model.loop_cfg;
    let e13sq = l.eta13 * l.eta13;
    let weight = 1.0 + e13sq + 2.0 * e13sq * l.phi.cos() * (2.0 * omega * l.tau).cos();
    let sfm = m.nbar + 0.5 + ratio(r.gamma_ba_m, m.gamma0);
    let sfs = s.nbar + 0.5 + ratio(s.gamma_meas * weight.max(0.0), s.gamma0);
    (sfm, sfs)
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Two-sided membrane displacement spectrum; `int S dw / 2pi` over all `w` is `var(X_m)`.
pub fn psd_at(model: &SystemModel, modes: &CoupledModes, omega: f64) -> f64 {
    let (chi_eff, _) = effective_chi(modes, omega);
    let chi_s = bare_chi(omega, modes.omega_s, modes.gamma_s);
    let (sfm, sfs) = force_spectra(model, omega);
    chi_eff.norm_sqr()
        * (2.0 * modes.gamma_m * sfm + 4.0 * modes.g_ms * modes.g_ms * chi_s.norm_sqr() * 2.0 * modes.gamma_s * sfs)
}

pub fn displacement_psd(model: &SystemModel, omega_grid: &[f64]) -> SpectrumRecord {
    let modes = CoupledModes::from_model(model);
    SpectrumRecord { omega: omega_grid.to_vec(), s_xx: omega_grid.iter().map(|&w| psd_at(model, &modes, w)).collect() }
}

/// `var(X_m)` from the spectrum, integrating over `w > 0` on a grid compressed around
/// the membrane frequency by `w = W_m + h tan(u)`.
pub fn membrane_variance_from_psd(model: &SystemModel, points: usize) -> f64 {
    let modes = CoupledModes::from_model(model);
    let h = [modes.gamma_m, modes.gamma_s, modes.g(), (modes.omega_s.abs() - modes.omega_m).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    let u0 = -(modes.omega_m / h).atan();
    let u1 = 0.5 * PI;
    let n = points.max(8) & !1;
    let du = (u1 - u0) / n as f64;
    // Simpson on the mapped variable; the end point u1 contributes zero
    let mut acc = 0.0;
    for k in 0..n {
        let u = u0 + k as f64 * du;
        let w = modes.omega_m + h * u.tan();
        let jac = h / (u.cos() * u.cos());
        let wt = if k == 0 { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += wt * psd_at(model, &modes, w.max(0.0)) * jac;
    }
    acc * du / 3.0 / PI
}

/// Sinusoidal force on one oscillator's momentum inside `[t_on, t_off)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub target: Label,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub t_on: f64,
    pub t_off: f64,
}

impl Drive {
    fn force(&self, t: f64) -> f64 {
        if t >= self.t_on && t < self.t_off {
            self.amplitude * (self.omega * t + self.phase).cos()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSample {
    pub t: f64,
    /// `(X_m, P_m, X_s, P_s)`
    pub q: [f64; 4],
    /// Quadratures demodulated at the membrane frequency (spin counter-rotating when inverted).
    pub demod: [f64; 4],
    pub n_m: f64,
    pub n_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrajectory {
    pub samples: Vec<MeanSample>,
}

impl MeanTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// Step small against the fastest frequency and a quarter of the delay.
pub fn default_dt(modes: &CoupledModes) -> f64 {
    let fast = [modes.omega_m.abs(), modes.omega_s.abs(), modes.gamma_m, modes.gamma_s, modes.g_ms, modes.g_sm]
        .into_iter()
        .fold(0.0, f64::max);
    let dt = 0.04 / fast;
    if modes.tau > 0.0 {
        dt.min(0.25 * modes.tau)
    } else {
        dt
    }
}

/// Past values of `X_m` and `X_s` on the step grid, linearly interpolated.
struct History {
    dt: f64,
    xm: Vec<f64>,
    xs: Vec<f64>,
    /// Index of the newest stored step.
    newest: usize,
    init: (f64, f64),
}

impl History {
    fn new(dt: f64, span: f64, init: (f64, f64)) -> Self {
        let len = (span / dt).ceil() as usize + 4;
        Self { dt, xm: vec![init.0; len], xs: vec![init.1; len], newest: 0, init }
    }

    fn push(&mut self, step: usize, xm: f64, xs: f64) {
        let len = self.xm.len();
        self.xm[step % len] = xm;
        self.xs[step % len] = xs;
        self.newest = step;
    }

    fn at(&self, t: f64) -> Result<(f64, f64)> {
        if t <= 0.0 {
            return Ok(self.init);
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        let frac = x - k as f64;
        let len = self.xm.len();
        if k + 1 > self.newest && !(k == self.newest && frac == 0.0) || self.newest >= k + len {
            return Err(Error::InsufficientHistory { t });
        }
        let a = k % len;
        let b = (k + 1) % len;
        if frac == 0.0 {
            return Ok((self.xm[a], self.xs[a]));
        }
        Ok((
            self.xm[a] + frac * (self.xm[b] - self.xm[a]),
            self.xs[a] + frac * (self.xs[b] - self.xs[a]),
        ))
    }
}

/// Integrates the delayed mean-value equations from `init = (X_m, P_m, X_s, P_s)`; the
/// state before `t = 0` equals `init`. Emits every `every`-th step.
pub fn mean_value_trajectory(
    modes: &CoupledModes,
    init: [f64; 4],
    drive: Option<Drive>,
    t_end: f64,
    dt: f64,
    every: usize,
) -> Result<MeanTrajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParameter("dt must be > 0 and t_end >= 0".into()));
    }
    if modes.tau > 0.0 && dt > 0.25 * modes.tau * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("dt = {dt:e} s must not exceed tau / 4")));
    }
    let fast = modes.omega_m.abs().max(modes.omega_s.abs());
    if dt * fast > 0.2 {
        return Err(Error::InvalidParameter(format!("dt = {dt:e} s does not resolve the oscillation")));
    }
    let every = every.max(1);
    let tau = modes.tau;
    let (wm, ws) = (modes.omega_m, modes.omega_s);
    let c_phi = modes.phi.cos();
    let s_phi = modes.phi.sin();
    let k_ms = 2.0 * modes.g_ms;
    let k_sm = 2.0 * modes.g_sm * c_phi;
    let k_self = 4.0 * modes.gamma_self * s_phi;
    let mut hist = History::new(dt, 2.0 * tau, (init[0], init[2]));
    hist.push(0, init[0], init[2]);

    let rhs = |t: f64, y: &[f64; 4], hist: &History| -> Result<[f64; 4]> {
        let (xm_d, xs_d, xs_2d) = if tau > 0.0 {
            let (xm1, xs1) = hist.at(t - tau)?;
            let (_, xs2) = hist.at(t - 2.0 * tau)?;
            (xm1, xs1, xs2)
        } else {
            (y[0], y[2], y[2])
        };
        let (fm, fs) = match drive {
            Some(d) => match d.target {
                Label::Membrane => (d.force(t), 0.0),
                Label::Spin => (0.0, d.force(t)),
            },
            None => (0.0, 0.0),
        };
        Ok([
            wm * y[1],
            -wm * y[0] - modes.gamma_m * y[1] - k_ms * xs_d + fm,
            ws * y[3],
            -ws * y[2] - modes.gamma_s * y[3] + k_self * xs_2d + k_sm * xm_d + fs,
        ])
    };
    let add = |y: &[f64; 4], k: &[f64; 4], h: f64| [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]];
    let sign_s = modes.spin_sign();
    let sample = |t: f64, y: &[f64; 4]| {
        let (sm, cm) = (wm * t).sin_cos();
        let (ss, cs) = (sign_s * wm * t).sin_cos();
        MeanSample {
            t,
            q: *y,
            demod: [y[0] * cm - y[1] * sm, y[0] * sm + y[1] * cm, y[2] * cs - y[3] * ss, y[2] * ss + y[3] * cs],
            n_m: 0.5 * (y[0] * y[0] + y[1] * y[1]),
            n_s: 0.5 * (y[2] * y[2] + y[3] * y[3]),
        }
    };
    let scale = init.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let amp = drive.map(|d| d.amplitude.abs() / fast.max(1.0)).unwrap_or(0.0);
    let limit = 1e13 * (1.0 + scale + amp);
    let steps = (t_end / dt).round() as usize;
    let mut y = init;
    let mut out = vec![sample(0.0, &y)];
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = rhs(t, &y, &hist)?;
        let k2 = rhs(t + 0.5 * dt, &add(&y, &k1, 0.5 * dt), &hist)?;
        let k3 = rhs(t + 0.5 * dt, &add(&y, &k2, 0.5 * dt), &hist)?;
        let k4 = rhs(t + dt, &add(&y, &k3, dt), &hist)?;
        for i in 0..4 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_new = (k + 1) as f64 * dt;
        if y.iter().any(|v| !v.is_finite() || v.abs() > limit) {
            return Err(Error::UnstableIntegration { t: t_new });
        }
        hist.push(k + 1, y[0], y[2]);
        if (k + 1) % every == 0 || k + 1 == steps {
            out.push(sample(t_new, &y));
        }
    }
    Ok(MeanTrajectory { samples: out })
}
