//! Covariance dynamics: time-dependent and algebraic Lyapunov equations, collective
//! quadratures and the reduced two-mode squeezing equations.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;

use crate::bilinear::{jc, DriftDiffusion, Mat4, Vec4, PM, PS, XM, XS};
use crate::error::{Error, Result};
use crate::model::{derive_rates, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceState {
    pub sigma: Mat4,
    pub mean: Vec4,
    pub t: f64,
}

impl CovarianceState {
    pub fn new(sigma: Mat4, mean: Vec4, t: f64) -> Self {
        Self { sigma: symmetrize(&sigma), mean, t }
    }

    /// Uncorrelated thermal state of both modes with zero mean.
    pub fn thermal(model: &SystemModel) -> Self {
        let vm = model.membrane.nbar + 0.5;
        let vs = model.spin.nbar + 0.5;
        Self::new(Mat4::from_diagonal(&Vec4::new(vm, vm, vs, vs)), Vec4::zeros(), 0.0)
    }

    /// Smallest eigenvalue of `Sigma + i Jc / 2`; negative values violate the uncertainty bound.
    pub fn heisenberg_margin(&self) -> f64 {
        let j = jc();
        let h: Matrix4<Complex64> = Matrix4::from_fn(|r, c| Complex64::new(self.sigma[(r, c)], 0.5 * j[(r, c)]));
        h.symmetric_eigenvalues().min()
    }

    /// Gaussian purity `1 / sqrt(det(2 Sigma))`.
    pub fn purity(&self) -> f64 {
        1.0 / (2.0 * self.sigma).determinant().sqrt()
    }
}

pub fn symmetrize(m: &Mat4) -> Mat4 {
    0.5 * (m + m.transpose())
}

/// Default step: small against the fastest frequency and every rate.
pub fn default_dt(fd: &DriftDiffusion) -> f64 {
    let fast = fd.f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    0.04 / fast.max(f64::MIN_POSITIVE)
}

fn rhs(fd: &DriftDiffusion, s: &Mat4) -> Mat4 {
    let fs = fd.f * s;
    fs + fs.transpose() + fd.n
}

/// Fixed-step RK4 integration of `dSigma/dt = F Sigma + Sigma F^T + N` and `dm/dt = F m`.
/// Emits the initial state and every `every`-th step, always including the last one.
pub fn integrate(
    fd: &DriftDiffusion,
    init: &CovarianceState,
    t_end: f64,
    dt: f64,
    every: usize,
) -> Result<Vec<CovarianceState>> {
    let fast = fd.f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(dt > 0.0) || dt * fast > 0.05 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt:e} s exceeds 0.05 / {fast:e} rad/s"
        )));
    }
    if !(t_end >= init.t) {
        return Err(Error::InvalidParameter("t_end before the initial time".into()));
    }
    let every = every.max(1);
    let steps = ((t_end - init.t) / dt).round() as usize;
    let limit = 1e13 * (1.0 + init.sigma.abs().max()) + 1e13 * (1.0 + init.mean.abs().max());
    let mut s = init.sigma;
    let mut m = init.mean;
    let mut out = vec![*init];
    for k in 1..=steps {
        let k1 = rhs(fd, &s);
        let k2 = rhs(fd, &(s + 0.5 * dt * k1));
        let k3 = rhs(fd, &(s + 0.5 * dt * k2));
        let k4 = rhs(fd, &(s + dt * k3));
        s = symmetrize(&(s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)));
        let l1 = fd.f * m;
        let l2 = fd.f * (m + 0.5 * dt * l1);
        let l3 = fd.f * (m + 0.5 * dt * l2);
        let l4 = fd.f * (m + dt * l3);
        m += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        let t = init.t + k as f64 * dt;
        let worst = s.abs().max().max(m.abs().max());
        if !worst.is_finite() || worst > limit {
            return Err(Error::UnstableIntegration { t });
        }
        if k % every == 0 || k == steps {
            out.push(CovarianceState { sigma: s, mean: m, t });
        }
    }
    Ok(out)
}

/// Algebraic Lyapunov solve `F Sigma + Sigma F^T + N = 0`.
pub fn steady_state(fd: &DriftDiffusion) -> Result<CovarianceState> {
    let eig = fd.f.complex_eigenvalues();
    let max_re = eig.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re));
    let scale = fd.rate_max();
    if max_re > -1e-6 * scale {
        return Err(Error::NoSteadyState { max_re });
    }
    let f = DMatrix::from_fn(4, 4, |r, c| fd.f[(r, c)]);
    let id = DMatrix::<f64>::identity(4, 4);
    // column-major vec: vec(F S) = (I kron F) vec S, vec(S F^T) = (F kron I) vec S
    let k = id.kronecker(&f) + f.kronecker(&id);
    let rhs = DVector::from_iterator(16, fd.n.iter().map(|v| -v));
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Internal("singular Lyapunov operator".into()))?;
    let sigma = Mat4::from_iterator(sol.iter().copied());
    Ok(CovarianceState::new(sigma, Vec4::zeros(), f64::INFINITY))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveVariances {
    pub var_xplus: f64,
    pub var_xminus: f64,
    pub var_pplus: f64,
    pub var_pminus: f64,
    pub xi: f64,
}

/// Maps lab-frame quadratures at time `t` to the frame co-rotating with each oscillator,
/// then rotates the spin read-out basis by `alpha`. Inverted spins rotate the other way.
pub fn demodulation_matrix(omega_m: f64, omega_s: f64, alpha: f64, t: f64) -> Mat4 {
    let mut r = Mat4::zeros();
    for (b, w) in [(XM, omega_m), (XS, omega_s)] {
        let (s, c) = (w * t).sin_cos();
        r[(b, b)] = c;
        r[(b, b + 1)] = -s;
        r[(b + 1, b)] = s;
        r[(b + 1, b + 1)] = c;
    }
    let sign = if omega_s < 0.0 { -1.0 } else { 1.0 };
    let (sa, ca) = alpha.sin_cos();
    let mut ra = Mat4::identity();
    ra[(XS, XS)] = ca;
    ra[(XS, PS)] = sign * sa;
    ra[(PS, XS)] = -sign * sa;
    ra[(PS, PS)] = ca;
    ra * r
}

/// Collective variances of an already demodulated covariance with detector noise added.
pub fn collective_from_frame(sigma: &Mat4, n_det: f64) -> CollectiveVariances {
    let mut s = *sigma;
    s[(XS, XS)] += n_det;
    s[(PS, PS)] += n_det;
    let var_xplus = 0.5 * (s[(XS, XS)] + s[(XM, XM)] + 2.0 * s[(XM, XS)]);
    let var_xminus = 0.5 * (s[(XS, XS)] + s[(XM, XM)] - 2.0 * s[(XM, XS)]);
    let var_pplus = 0.5 * (s[(PS, PS)] + s[(PM, PM)] + 2.0 * s[(PM, PS)]);
    let var_pminus = 0.5 * (s[(PS, PS)] + s[(PM, PM)] - 2.0 * s[(PM, PS)]);
    CollectiveVariances { var_xplus, var_xminus, var_pplus, var_pminus, xi: var_xminus + var_pplus }
}

/// `X_pm = (X_s +- X_m)/sqrt 2`, likewise for `P`, in the demodulated and `alpha`-rotated frame.
pub fn collective_variances(
    state: &CovarianceState,
    omega_m: f64,
    omega_s: f64,
    alpha: f64,
    n_det: f64,
) -> CollectiveVariances {
    let t = if state.t.is_finite() { state.t } else { 0.0 };
    let r = demodulation_matrix(omega_m, omega_s, alpha, t);
    collective_from_frame(&(r * state.sigma * r.transpose()), n_det)
}

/// Same, taking frequencies, read-out phase and detector noise from the model.
pub fn model_collective_variances(state: &CovarianceState, model: &SystemModel) -> CollectiveVariances {
    collective_variances(state, model.membrane.omega, model.spin.omega, model.alpha, model.n_det)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwaSample {
    pub t: f64,
    pub xplus2: f64,
    pub xminus2: f64,
    pub xplus_xminus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RwaTrajectory {
    pub samples: Vec<RwaSample>,
    /// `<X_+^2>` grows without bound (gain exceeds total damping).
    pub xplus_growing: bool,
    /// Closed-form steady state of `<X_-^2>`.
    pub xminus_steady: f64,
}

/// Reduced rotating-wave equations for the parametric configuration, started from the
/// uncorrelated thermal state.
pub fn rwa_collective_odes(model: &SystemModel, t_end: f64, dt: f64, every: usize) -> Result<RwaTrajectory> {
    let phi = model.loop_cfg.phi;
    if (phi - std::f64::consts::PI).abs() > 1e-9 || model.spin.omega >= 0.0 {
        return Err(Error::InvalidParameter(
            "reduced equations need phi = pi and an inverted spin".into(),
        ));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParameter("dt must be > 0 and t_end >= 0".into()));
    }
    let r = derive_rates(model);
    let g = r.g;
    let gs0 = model.spin.gamma0;
    let gm0 = model.membrane.gamma0;
    let sum = gs0 + gm0;
    let diff = gs0 - gm0;
    let src_p = 0.5 * (r.gamma_tot_s + r.gamma_tot_m);
    let src_c = 0.5 * (r.gamma_tot_s - r.gamma_tot_m);
    let f = |y: [f64; 3]| -> [f64; 3] {
        let [a, b, c] = y;
        [
            0.5 * (4.0 * g - sum) * a - 0.5 * diff * c + src_p,
            -0.5 * (4.0 * g + sum) * b - 0.5 * diff * c + src_p,
            -0.5 * sum * c - 0.25 * diff * (a + b) + src_c,
        ]
    };
    let vm = model.membrane.nbar + 0.5;
    let vs = model.spin.nbar + 0.5;
    let mut y = [0.5 * (vs + vm), 0.5 * (vs + vm), 0.5 * (vs - vm)];
    let steps = (t_end / dt).round() as usize;
    let every = every.max(1);
    let mut samples = vec![RwaSample { t: 0.0, xplus2: y[0], xminus2: y[1], xplus_xminus: y[2] }];
    let add = |y: [f64; 3], k: [f64; 3], h: f64| [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]];
    for k in 1..=steps {
        let k1 = f(y);
        let k2 = f(add(y, k1, 0.5 * dt));
        let k3 = f(add(y, k2, 0.5 * dt));
        let k4 = f(add(y, k3, dt));
        for i in 0..3 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::UnstableIntegration { t: k as f64 * dt });
        }
        if k % every == 0 || k == steps {
            samples.push(RwaSample { t: k as f64 * dt, xplus2: y[0], xminus2: y[1], xplus_xminus: y[2] });
        }
    }
    Ok(RwaTrajectory {
        samples,
        xplus_growing: 4.0 * g > sum,
        xminus_steady: (r.gamma_tot_s + r.gamma_tot_m) / (4.0 * g + sum),
    })
}
