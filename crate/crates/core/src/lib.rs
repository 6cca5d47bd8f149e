//! Simulation of a mechanical membrane mode and a collective atomic spin coupled
//! through a cascaded, lossy and delayed optical loop.
//!
//! Quadratures are always ordered `(X_m, P_m, X_s, P_s)`. Frequencies and rates are
//! angular (rad/s); a negative spin frequency encodes an inverted (negative-mass) spin.

pub mod bilinear;
pub mod error;
pub mod fit;
pub mod langevin;
pub mod lyapunov;
pub mod model;
pub mod optics;
pub mod units;

pub use error::{Error, Result};
