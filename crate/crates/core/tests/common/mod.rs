#![allow(dead_code)]

use lightloop::model::{Label, LoopConfig, OscillatorMode, SystemModel};
use lightloop::units::{khz, mhz};

pub fn negative_mass(n_det: f64, alpha_deg: f64) -> SystemModel {
    let m = OscillatorMode::new(Label::Membrane, mhz(1.957), khz(0.4), 1.5e4, khz(7.5)).unwrap();
    let s = OscillatorMode::new(Label::Spin, -mhz(1.957), khz(1.0), 0.0, khz(0.43)).unwrap();
    let lp = LoopConfig::uniform(0.9).unwrap();
    SystemModel::new(m, s, lp, n_det, alpha_deg.to_radians()).unwrap()
}

/// Beam-splitter variant: positive-mass spin, otherwise the negative-mass baseline.
pub fn beam_splitter(delta: f64) -> SystemModel {
    let mut m = negative_mass(0.0, 0.0);
    m.spin.omega = mhz(1.957) + delta;
    m
}
