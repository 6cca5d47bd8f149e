//! Markovian master equation in bilinear quadrature form and its drift/diffusion pair.
//!
//! The master equation is written as `drho/dt = -sum_jk A_jk [Q_j, Q_k rho] + h.c.`, from
//! which the first and second moments follow `dm/dt = F m` and
//! `dSigma/dt = F Sigma + Sigma F^T + N` with `F = 2 Jc Im A`, `N = Jc Re(A + A^T) Jc^T`.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SystemModel;

pub type Mat4 = Matrix4<f64>;
pub type Vec4 = Vector4<f64>;
pub type CMat4 = Matrix4<Complex64>;

pub const XM: usize = 0;
pub const PM: usize = 1;
pub const XS: usize = 2;
pub const PS: usize = 3;

/// `(Jc)_jk = -i [Q_j, Q_k]` for the ordering `(X_m, P_m, X_s, P_s)`.
pub fn jc() -> Mat4 {
    let mut j = Mat4::zeros();
    j[(XM, PM)] = 1.0;
    j[(PM, XM)] = -1.0;
    j[(XS, PS)] = 1.0;
    j[(PS, XS)] = -1.0;
    j
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientMatrix {
    pub a: CMat4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub f: Mat4,
    pub n: Mat4,
}

impl DriftDiffusion {
    /// `(symmetric, antisymmetric)` parts of the two cross-coupling entries
    /// `F[P_m, X_s]` and `F[P_s, X_m]`.
    pub fn coupling_split(&self) -> (f64, f64) {
        let a = self.f[(PM, XS)];
        let b = self.f[(PS, XM)];
        (0.5 * (a + b), 0.5 * (a - b))
    }

    pub fn rate_max(&self) -> f64 {
        self.f.iter().chain(self.n.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Coefficient matrix of free rotation, thermal damping and the lossy cascaded loop.
/// The delay is not represented here.
pub fn assemble_a(model: &SystemModel) -> CoefficientMatrix {
    let mut a = CMat4::zeros();
    for (base, mode) in [(XM, &model.membrane), (XS, &model.spin)] {
        let diff = 0.25 * mode.gamma0 * (2.0 * mode.nbar + 1.0);
        a[(base, base)] += c(diff, 0.5 * mode.omega);
        a[(base + 1, base + 1)] += c(diff, 0.5 * mode.omega);
        a[(base, base + 1)] += c(0.0, 0.25 * mode.gamma0);
        a[(base + 1, base)] -= c(0.0, 0.25 * mode.gamma0);
    }
    let l = &model.loop_cfg;
    let gm = model.membrane.gamma_meas;
    let gs = model.spin.gamma_meas;
    let r = (gm * gs).sqrt();
    let e_mphi = Complex64::from_polar(1.0, -l.phi);
    let e13sq = l.eta13 * l.eta13;
    a[(XM, XM)] += c(l.eta12 * l.eta12 * gm, 0.0);
    a[(XS, XS)] += gs * (c(1.0 + e13sq, 0.0) + 2.0 * e13sq * e_mphi);
    a[(XM, XS)] += c(0.0, 2.0 * l.eta12 * l.eta12 * r);
    a[(XS, XM)] += c(0.0, -2.0 * l.eta12 * l.eta23 * l.eta13 * r) * e_mphi;
    CoefficientMatrix { a }
}

pub fn drift_diffusion(cm: &CoefficientMatrix) -> Result<DriftDiffusion> {
    let a = &cm.a;
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("coefficient matrix has non-finite entries".into()));
    }
    let j = jc();
    let im = a.map(|z| z.im);
    let re_sym = a.map(|z| z.re) + a.transpose().map(|z| z.re);
    let f = 2.0 * j * im;
    let n_raw = j * re_sym * j.transpose();
    let scale = n_raw.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let asym = (n_raw - n_raw.transpose()).abs().max();
    if asym > 1e-10 * scale {
        return Err(Error::Internal(format!("diffusion matrix asymmetry {asym:e}")));
    }
    let n = 0.5 * (n_raw + n_raw.transpose());
    Ok(DriftDiffusion { f, n })
}

/// Drift and diffusion straight from a model.
pub fn model_drift_diffusion(model: &SystemModel) -> Result<DriftDiffusion> {
    drift_diffusion(&assemble_a(model))
}

/// Lossless collective jump operator `J = c_m X_m + c_s X_s`. Diagnostic only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOperator {
    pub c_m: Complex64,
    pub c_s: Complex64,
}

pub fn jump_coefficients(model: &SystemModel) -> JumpOperator {
    let phi = model.loop_cfg.phi;
    let c_m = c((2.0 * model.membrane.gamma_meas).sqrt(), 0.0);
    let c_s = Complex64::i() * (c(1.0, 0.0) + Complex64::from_polar(1.0, phi)) * (2.0 * model.spin.gamma_meas).sqrt();
    // exact cancellation at phi = pi instead of a 1e-16 residue
    let c_s = if (phi - std::f64::consts::PI).abs() < 1e-15 { Complex64::new(0.0, 0.0) } else { c_s };
    JumpOperator { c_m, c_s }
}

/// Smallest eigenvalue of the (symmetrised) diffusion matrix.
pub fn min_eigenvalue_sym(m: &Mat4) -> f64 {
    m.symmetric_eigenvalues().min()
}
