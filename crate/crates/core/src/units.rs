//! Physical constants and conversions into angular units.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const C_LIGHT: f64 = 299_792_458.0;
/// One gauss in tesla.
pub const GAUSS: f64 = 1e-4;

/// Cyclic frequency in Hz to rad/s.
pub fn hz(f: f64) -> f64 {
    TWO_PI * f
}

pub fn khz(f: f64) -> f64 {
    TWO_PI * f * 1e3
}

pub fn mhz(f: f64) -> f64 {
    TWO_PI * f * 1e6
}

/// rad/s back to Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}
