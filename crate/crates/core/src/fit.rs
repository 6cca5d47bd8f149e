//! Least-squares extraction of coupled-mode parameters from response curves and spectra.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::langevin::{effective_chi, normal_modes, CoupledModes};
use crate::units::C_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// `a |chi_m,eff|`
    AmplitudeAbsChi,
    /// `b + a |chi_m,eff|^2`
    PsdAbsChiSq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Uniform,
    /// `1 / amplitude^2`, emphasising deep dips.
    InverseAmplitudeSq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseDataset {
    pub omega: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
}

impl ResponseDataset {
    pub fn validate(&self) -> Result<()> {
        let n = self.omega.len();
        if self.amplitude.len() != n {
            return Err(Error::InvalidParameter("amplitude length differs from omega".into()));
        }
        if self.phase.as_ref().is_some_and(|p| p.len() != n) || self.weights.as_ref().is_some_and(|w| w.len() != n) {
            return Err(Error::InvalidParameter("phase or weight length differs from omega".into()));
        }
        if self.omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("omega must be strictly increasing".into()));
        }
        if self.amplitude.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter("amplitudes must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// All model parameters; `omega_s` is signed like the spin frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub a: f64,
    pub b_offset: f64,
    pub g: f64,
    pub gamma_m: f64,
    pub gamma_s: f64,
    pub omega_s: f64,
    pub tau: f64,
    pub phase_offset: f64,
}

/// Quantities held fixed during a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSetup {
    pub kind: ModelKind,
    pub omega_m: f64,
    pub phi: f64,
    pub fix_tau: bool,
    pub weighting: Weighting,
    pub max_iter: usize,
}

impl FitSetup {
    pub fn new(kind: ModelKind, omega_m: f64, phi: f64) -> Self {
        Self { kind, omega_m, phi, fix_tau: false, weighting: Weighting::Uniform, max_iter: 400 }
    }

    pub fn modes(&self, p: &FitParams) -> CoupledModes {
        CoupledModes::symmetric(self.omega_m, p.omega_s, p.gamma_m, p.gamma_s, p.g, self.phi, p.tau)
    }

    /// Model amplitude and phase at `omega`.
    pub fn forward(&self, p: &FitParams, omega: f64) -> (f64, f64) {
        let (chi, _) = effective_chi(&self.modes(p), omega);
        let amp = match self.kind {
            ModelKind::AmplitudeAbsChi => p.a * chi.norm(),
            ModelKind::PsdAbsChiSq => p.b_offset + p.a * chi.norm_sqr(),
        };
        (amp, chi.arg() + p.phase_offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitBounds {
    pub lo: FitParams,
    pub hi: FitParams,
}

impl FitBounds {
    /// Rates in `(0, W_m / 10)`, `tau` in `[0, 100 ns]`, spin within 10 % of the membrane.
    pub fn default_for(omega_m: f64, spin_sign: f64) -> Self {
        let r = omega_m.abs() / 10.0;
        let tiny = 1e-12 * omega_m.abs();
        let (wlo, whi) = if spin_sign < 0.0 { (-1.1 * omega_m, -0.9 * omega_m) } else { (0.9 * omega_m, 1.1 * omega_m) };
        Self {
            lo: FitParams {
                a: 0.0,
                b_offset: f64::NEG_INFINITY,
                g: tiny,
                gamma_m: tiny,
                gamma_s: tiny,
                omega_s: wlo,
                tau: 0.0,
                phase_offset: f64::NEG_INFINITY,
            },
            hi: FitParams {
                a: f64::INFINITY,
                b_offset: f64::INFINITY,
                g: r,
                gamma_m: r,
                gamma_s: r,
                omega_s: whi,
                tau: 100e-9,
                phase_offset: f64::INFINITY,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub params: FitParams,
    pub residual_sse: f64,
    pub initial_sse: f64,
    /// Curvature-based standard errors; zero for fixed parameters.
    pub param_sigmas: FitParams,
    pub converged: bool,
    pub model_kind: ModelKind,
    pub iterations: usize,
    /// Scaled gradient `|J^T r| / (|J| |r|)` at the solution.
    pub gradient_norm: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    A,
    B,
    G,
    GammaM,
    GammaS,
    OmegaS,
    Tau,
    Phase,
}

/// Maps between physical parameters and a vector of order-one free variables.
struct Packing {
    slots: Vec<Slot>,
    scale: Vec<f64>,
    base: FitParams,
    omega_m: f64,
    spin_sign: f64,
}

impl Packing {
    fn new(setup: &FitSetup, init: &FitParams, has_phase: bool, amp_scale: f64) -> Self {
        let mut slots = vec![Slot::A];
        if setup.kind == ModelKind::PsdAbsChiSq {
            slots.push(Slot::B);
        }
        slots.extend([Slot::G, Slot::GammaM, Slot::GammaS, Slot::OmegaS]);
        if !setup.fix_tau {
            slots.push(Slot::Tau);
        }
        if has_phase {
            slots.push(Slot::Phase);
        }
        let rate = init.g.abs().max(init.gamma_m).max(init.gamma_s).max(1e-9 * setup.omega_m.abs());
        let scale = slots
            .iter()
            .map(|s| match s {
                Slot::A => init.a.abs().max(f64::MIN_POSITIVE),
                Slot::B => amp_scale.max(f64::MIN_POSITIVE),
                Slot::G => init.g.abs().max(1e-3 * rate),
                Slot::GammaM => init.gamma_m.max(1e-3 * rate),
                Slot::GammaS => init.gamma_s.max(1e-3 * rate),
                Slot::OmegaS => rate,
                Slot::Tau => 10e-9,
                Slot::Phase => 1.0,
            })
            .collect();
        let spin_sign = if init.omega_s < 0.0 { -1.0 } else { 1.0 };
        Self { slots, scale, base: *init, omega_m: setup.omega_m, spin_sign }
    }

    fn raw(&self, p: &FitParams, s: Slot) -> f64 {
        match s {
            Slot::A => p.a,
            Slot::B => p.b_offset,
            Slot::G => p.g,
            Slot::GammaM => p.gamma_m,
            Slot::GammaS => p.gamma_s,
            // detuning of |W_s| from the membrane keeps this slot order one
            Slot::OmegaS => p.omega_s.abs() - self.omega_m,
            Slot::Tau => p.tau,
            Slot::Phase => p.phase_offset,
        }
    }

    fn set(&self, p: &mut FitParams, s: Slot, v: f64) {
        match s {
            Slot::A => p.a = v,
            Slot::B => p.b_offset = v,
            Slot::G => p.g = v,
            Slot::GammaM => p.gamma_m = v,
            Slot::GammaS => p.gamma_s = v,
            Slot::OmegaS => p.omega_s = self.spin_sign * (self.omega_m + v),
            Slot::Tau => p.tau = v,
            Slot::Phase => p.phase_offset = v,
        }
    }

    fn pack(&self, p: &FitParams) -> Vec<f64> {
        self.slots.iter().zip(&self.scale).map(|(s, k)| self.raw(p, *s) / k).collect()
    }

    fn unpack(&self, u: &[f64]) -> FitParams {
        let mut p = self.base;
        for ((s, k), v) in self.slots.iter().zip(&self.scale).zip(u) {
            self.set(&mut p, *s, v * k);
        }
        p
    }

    fn clamp(&self, u: &mut [f64], b: &FitBounds) {
        for (i, s) in self.slots.iter().enumerate() {
            let (mut lo, mut hi) = (self.raw(&b.lo, *s), self.raw(&b.hi, *s));
            if *s == Slot::OmegaS && lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            u[i] = (u[i] * self.scale[i]).clamp(lo, hi) / self.scale[i];
        }
    }
}

fn wrap(x: f64) -> f64 {
    use std::f64::consts::PI;
    (x + PI).rem_euclid(2.0 * PI) - PI
}

struct Problem<'a> {
    data: &'a ResponseDataset,
    setup: &'a FitSetup,
    weights: Vec<f64>,
    amp_norm: f64,
}

impl Problem<'_> {
    fn residuals(&self, p: &FitParams) -> Vec<f64> {
        let n = self.data.omega.len();
        let mut r = Vec::with_capacity(if self.data.phase.is_some() { 2 * n } else { n });
        let mut ph = Vec::new();
        for (i, &w) in self.data.omega.iter().enumerate() {
            let (amp, phase) = self.setup.forward(p, w);
            r.push(self.weights[i] * (amp - self.data.amplitude[i]) / self.amp_norm);
            if let Some(pd) = &self.data.phase {
                ph.push(wrap(phase - pd[i]));
            }
        }
        r.extend(ph);
        r
    }

    fn sse(&self, p: &FitParams) -> f64 {
        let s: f64 = self.residuals(p).iter().map(|v| v * v).sum();
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    }
}

fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], clamp: &dyn Fn(&mut [f64]), max_eval: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-3 { 0.05 * x[i] } else { 0.05 };
        clamp(&mut x);
        if x == x0 {
            x[i] -= if x[i].abs() > 1e-3 { 0.05 * x[i] } else { 0.05 };
            clamp(&mut x);
        }
        pts.push(x);
    }
    let mut vals: Vec<f64> = pts.iter().map(|x| f(x)).collect();
    let mut evals = n + 1;
    while evals < max_eval {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let spread = (vals[n] - vals[0]).abs();
        if spread <= 1e-14 * vals[0].abs().max(1e-300) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect();
            clamp(&mut x);
            x
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let mut x: Vec<f64> = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
                    clamp(&mut x);
                    vals[i] = f(&x);
                    pts[i] = x;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (pts[best].clone(), vals[best])
}

fn jacobian(res: &dyn Fn(&[f64]) -> Vec<f64>, u: &[f64], m: usize) -> DMatrix<f64> {
    let n = u.len();
    let mut j = DMatrix::zeros(m, n);
    for k in 0..n {
        let h = 1e-6 * u[k].abs().max(1.0);
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[k] += h;
        dn[k] -= h;
        let rp = res(&up);
        let rm = res(&dn);
        for i in 0..m {
            j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    j
}

const GTOL: f64 = 1e-5;

/// Weighted least squares: simplex warm start, then Levenberg-damped Gauss-Newton.
pub fn fit_response(
    data: &ResponseDataset,
    setup: &FitSetup,
    initial_guess: &FitParams,
    bounds: &FitBounds,
) -> Result<FitResult> {
    data.validate()?;
    let amax = data.amplitude.iter().fold(0.0f64, |m, v| m.max(*v));
    let amin = data.amplitude.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(amax > 0.0) || amax - amin <= 1e-12 * amax {
        return Err(Error::DegenerateData("amplitude data are flat".into()));
    }
    let has_phase = data.phase.is_some();
    let pack = Packing::new(setup, initial_guess, has_phase, amax);
    let n_free = pack.slots.len();
    let n_res = data.omega.len() * if has_phase { 2 } else { 1 };
    if data.omega.len() < 3 * n_free {
        return Err(Error::InvalidParameter(format!(
            "{} points for {n_free} free parameters; need at least three times as many",
            data.omega.len()
        )));
    }
    let mut u0 = pack.pack(initial_guess);
    let mut clamped = u0.clone();
    pack.clamp(&mut clamped, bounds);
    if clamped.iter().zip(&u0).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0)) {
        return Err(Error::InvalidParameter("initial guess lies outside the bounds".into()));
    }
    u0 = clamped;
    let weights = match (&data.weights, setup.weighting) {
        (Some(w), _) => w.clone(),
        (None, Weighting::Uniform) => vec![1.0; data.omega.len()],
        (None, Weighting::InverseAmplitudeSq) => {
            // 1/y^2 weighting on the squared residual: scale residuals by amax / y
            data.amplitude.iter().map(|y| amax / y.max(1e-6 * amax)).collect()
        }
    };
    let prob = Problem { data, setup, weights, amp_norm: amax };
    let sse_u = |u: &[f64]| prob.sse(&pack.unpack(u));
    let res_u = |u: &[f64]| prob.residuals(&pack.unpack(u));
    let clamp_u = |u: &mut [f64]| pack.clamp(u, bounds);
    let initial_sse = sse_u(&u0);

    let (mut u, mut sse) = nelder_mead(&sse_u, &u0, &clamp_u, 600 * n_free);
    if !(sse <= initial_sse) {
        u = u0.clone();
        sse = initial_sse;
    }

    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut stalled = false;
    let mut jac = jacobian(&res_u, &u, n_res);
    let mut r = DVector::from_vec(res_u(&u));
    while iterations < setup.max_iter {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..n_free {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            clamp_u(&mut trial);
            let s = sse_u(&trial);
            if s < sse {
                let rel = (sse - s) / sse.max(1e-300);
                let small_step = step.norm() <= 1e-12 * (1.0 + DVector::from_vec(u.clone()).norm());
                u = trial;
                sse = s;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                stalled = rel < 1e-14 || small_step;
                break;
            }
            lambda *= 4.0;
        }
        jac = jacobian(&res_u, &u, n_res);
        r = DVector::from_vec(res_u(&u));
        if !improved || stalled {
            break;
        }
    }
    // near the optimum SSE differences drown in rounding; polish with undamped steps
    // for as long as they keep shrinking
    let mut prev_step = f64::INFINITY;
    for _ in 0..8 {
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut a = jtj.clone();
        for k in 0..n_free {
            a[(k, k)] += 1e-12 * jtj[(k, k)].max(1e-12);
        }
        let Some(step) = a.lu().solve(&(-&jtr)) else { break };
        let size = step.norm();
        if !(size < 0.5 * prev_step) && prev_step.is_finite() {
            break;
        }
        let mut trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
        clamp_u(&mut trial);
        let s = sse_u(&trial);
        if !(s <= sse * (1.0 + 1e-12)) {
            break;
        }
        u = trial;
        sse = s;
        jac = jacobian(&res_u, &u, n_res);
        r = DVector::from_vec(res_u(&u));
        prev_step = size;
        if size <= 1e-14 * (1.0 + DVector::from_vec(u.clone()).norm()) {
            break;
        }
    }
    let gradient_norm = (jac.transpose() * &r).norm() / (jac.norm() * r.norm()).max(1e-300);
    let exact = sse <= 1e-26 * n_res as f64;
    let converged = iterations < setup.max_iter && (gradient_norm <= GTOL || exact);

    let params = pack.unpack(&u);
    let mut sigmas =
        FitParams { a: 0.0, b_offset: 0.0, g: 0.0, gamma_m: 0.0, gamma_s: 0.0, omega_s: 0.0, tau: 0.0, phase_offset: 0.0 };
    let dof = (n_res as f64 - n_free as f64).max(1.0);
    if let Some(cov) = (jac.transpose() * &jac).try_inverse() {
        let s2 = sse / dof;
        for (i, s) in pack.slots.iter().enumerate() {
            let v = (s2 * cov[(i, i)]).max(0.0).sqrt() * pack.scale[i];
            match s {
                Slot::A => sigmas.a = v,
                Slot::B => sigmas.b_offset = v,
                Slot::G => sigmas.g = v,
                Slot::GammaM => sigmas.gamma_m = v,
                Slot::GammaS => sigmas.gamma_s = v,
                Slot::OmegaS => sigmas.omega_s = v,
                Slot::Tau => sigmas.tau = v,
                Slot::Phase => sigmas.phase_offset = v,
            }
        }
    }
    if setup.kind == ModelKind::PsdAbsChiSq {
        let nm = normal_modes(&setup.modes(&params));
        if !nm.stable() {
            return Err(Error::UnstableFit { min_gamma: nm.min_gamma() });
        }
    }
    Ok(FitResult {
        params,
        residual_sse: sse,
        initial_sse,
        param_sigmas: sigmas,
        converged,
        model_kind: setup.kind,
        iterations,
        gradient_norm,
        n_points: data.omega.len(),
    })
}

/// Residuals of `params` against `data`, amplitude part normalised by the data maximum.
pub fn residuals(data: &ResponseDataset, setup: &FitSetup, params: &FitParams) -> Vec<f64> {
    let amax = data.amplitude.iter().fold(0.0f64, |m, v| m.max(*v)).max(f64::MIN_POSITIVE);
    let prob = Problem { data, setup, weights: vec![1.0; data.omega.len()], amp_norm: amax };
    prob.residuals(params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Relative Gaussian noise on the amplitude.
    pub multiplicative: f64,
    /// Absolute Gaussian noise on the amplitude.
    pub additive: f64,
    /// Gaussian noise on the phase, rad.
    pub phase: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { multiplicative: 0.0, additive: 0.0, phase: 0.0 }
    }
}

/// Forward model on `omega_grid` with seeded Gaussian noise.
pub fn generate_synthetic(
    setup: &FitSetup,
    params: &FitParams,
    omega_grid: &[f64],
    noise: &NoiseModel,
    with_phase: bool,
    seed: u64,
) -> ResponseDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amplitude = Vec::with_capacity(omega_grid.len());
    let mut phase = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        let (amp, ph) = setup.forward(params, w);
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        let e3: f64 = StandardNormal.sample(&mut rng);
        amplitude.push((amp * (1.0 + noise.multiplicative * e1) + noise.additive * e2).max(0.0));
        phase.push(ph + noise.phase * e3);
    }
    ResponseDataset { omega: omega_grid.to_vec(), amplitude, phase: with_phase.then_some(phase), weights: None }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayReport {
    pub tau_fit: f64,
    pub calculated: f64,
    pub ratio: f64,
    pub threshold: f64,
    pub consistent: bool,
}

pub const DEFAULT_DELAY_THRESHOLD: f64 = 1.5;

/// Compares a fitted delay against cavity storage `2 / kappa` plus free propagation `d / c`.
pub fn delay_consistency_check(tau_fit: f64, kappa: f64, path_length: f64) -> Result<DelayReport> {
    delay_consistency_check_with(tau_fit, kappa, path_length, DEFAULT_DELAY_THRESHOLD)
}

pub fn delay_consistency_check_with(tau_fit: f64, kappa: f64, path_length: f64, threshold: f64) -> Result<DelayReport> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter("kappa must be > 0".into()));
    }
    let calculated = 2.0 / kappa + path_length / C_LIGHT;
    let ratio = if calculated > 0.0 { tau_fit / calculated } else if tau_fit == 0.0 { 1.0 } else { f64::INFINITY };
    let consistent = ratio <= threshold && ratio >= 1.0 / threshold;
    Ok(DelayReport { tau_fit, calculated, ratio, threshold, consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{khz, mhz};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn truth() -> FitParams {
        FitParams {
            a: 1e7,
            b_offset: 0.0,
            g: khz(3.05),
            gamma_m: khz(0.3),
            gamma_s: khz(4.0),
            omega_s: mhz(1.957),
            tau: 15e-9,
            phase_offset: 0.0,
        }
    }

    fn grid() -> Vec<f64> {
        (0..301).map(|i| mhz(1.957) + khz(-15.0 + 0.1 * i as f64)).collect()
    }

    #[test]
    fn zero_noise_is_forward_model() {
        let setup = FitSetup::new(ModelKind::AmplitudeAbsChi, mhz(1.957), PI);
        let d = generate_synthetic(&setup, &truth(), &grid(), &NoiseModel::none(), true, 1);
        for (i, w) in grid().iter().enumerate() {
            let (a, p) = setup.forward(&truth(), *w);
            assert_eq!(d.amplitude[i], a);
            assert_eq!(d.phase.as_ref().unwrap()[i], p);
        }
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let setup = FitSetup::new(ModelKind::AmplitudeAbsChi, mhz(1.957), PI);
        let noise = NoiseModel { multiplicative: 0.01, additive: 0.0, phase: 0.01 };
        let a = generate_synthetic(&setup, &truth(), &grid(), &noise, true, 7);
        let b = generate_synthetic(&setup, &truth(), &grid(), &noise, true, 7);
        let c = generate_synthetic(&setup, &truth(), &grid(), &noise, true, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_free_round_trip() {
        let setup = FitSetup::new(ModelKind::AmplitudeAbsChi, mhz(1.957), PI);
        let t = truth();
        let d = generate_synthetic(&setup, &t, &grid(), &NoiseModel::none(), false, 0);
        let mut guess = t;
        guess.g *= 1.1;
        guess.gamma_s *= 0.8;
        guess.gamma_m *= 1.3;
        guess.tau = 10e-9;
        guess.a *= 0.7;
        guess.omega_s += khz(0.3);
        let bounds = FitBounds::default_for(mhz(1.957), 1.0);
        let r = fit_response(&d, &setup, &guess, &bounds).unwrap();
        assert!(r.converged, "{r:?}");
        for (got, want) in [
            (r.params.g, t.g),
            (r.params.gamma_m, t.gamma_m),
            (r.params.gamma_s, t.gamma_s),
            (r.params.tau, t.tau),
            (r.params.a, t.a),
        ] {
            assert_relative_eq!(got, want, max_relative = 1e-6);
        }
        assert!((r.params.omega_s - t.omega_s).abs() < 1e-6 * t.g);
        assert!(r.residual_sse <= r.initial_sse);
    }

    #[test]
    fn flat_data_rejected() {
        let setup = FitSetup::new(ModelKind::AmplitudeAbsChi, mhz(1.957), PI);
        let d = ResponseDataset { omega: grid(), amplitude: vec![1.0; 301], phase: None, weights: None };
        let err = fit_response(&d, &setup, &truth(), &FitBounds::default_for(mhz(1.957), 1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)));
    }

    #[test]
    fn guess_outside_bounds_rejected() {
        let setup = FitSetup::new(ModelKind::AmplitudeAbsChi, mhz(1.957), PI);
        let d = generate_synthetic(&setup, &truth(), &grid(), &NoiseModel::none(), false, 0);
        let mut guess = truth();
        guess.tau = 200e-9;
        assert!(fit_response(&d, &setup, &guess, &FitBounds::default_for(mhz(1.957), 1.0)).is_err());
    }

    #[test]
    fn delay_examples() {
        let r = delay_consistency_check(15e-9, mhz(63.0), 2.0).unwrap();
        assert_relative_eq!(r.calculated, 12e-9, max_relative = 0.05);
        assert!(r.consistent);
        assert_relative_eq!(r.ratio, 15e-9 / r.calculated, max_relative = 1e-12);
        let z = delay_consistency_check(0.0, 1e30, 0.0).unwrap();
        assert!(z.calculated < 1e-29);
        assert!(delay_consistency_check(1e-9, 0.0, 1.0).is_err());
        assert!(!delay_consistency_check(40e-9, mhz(63.0), 2.0).unwrap().consistent);
    }
}
