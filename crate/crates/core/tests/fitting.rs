use std::f64::consts::PI;

use lightloop::fit::{
    fit_response, generate_synthetic, residuals, FitBounds, FitParams, FitSetup, ModelKind, NoiseModel,
    ResponseDataset,
};
use lightloop::units::khz;
use lightloop::Error;

const WM: f64 = 2.0 * PI * 1.957e6;

fn coupled_fit() -> FitParams {
    FitParams {
        a: 1e7,
        b_offset: 0.0,
        g: khz(3.05),
        gamma_m: khz(0.3),
        gamma_s: khz(4.0),
        omega_s: WM,
        tau: 15e-9,
        phase_offset: 0.0,
    }
}

fn grid() -> Vec<f64> {
    (0..401).map(|i| WM + khz(-20.0 + 0.1 * i as f64)).collect()
}

fn guess() -> FitParams {
    FitParams { g: khz(2.5), gamma_m: khz(0.5), gamma_s: khz(3.0), tau: 5e-9, a: 8e6, ..coupled_fit() }
}

fn amp_setup() -> FitSetup {
    FitSetup::new(ModelKind::AmplitudeAbsChi, WM, PI)
}

fn bounds() -> FitBounds {
    FitBounds::default_for(WM, 1.0)
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn recovers_figure_parameters_from_noisy_response() {
    let noise = NoiseModel { multiplicative: 0.01, additive: 0.0, phase: 0.01 };
    for seed in 0..10 {
        let d = generate_synthetic(&amp_setup(), &coupled_fit(), &grid(), &noise, true, seed);
        let r = fit_response(&d, &amp_setup(), &guess(), &bounds()).unwrap();
        assert!(r.converged);
        assert!((r.params.g / coupled_fit().g - 1.0).abs() < 0.02, "seed {seed}: {:?}", r.params);
        assert!((r.params.tau / coupled_fit().tau - 1.0).abs() < 0.3, "seed {seed}: {:?}", r.params);
        assert!(r.residual_sse <= r.initial_sse);
    }
}

#[test]
fn scatter_grows_with_noise() {
    let levels = [0.005, 0.01, 0.02];
    let mut spread = Vec::new();
    let mut curvature = Vec::new();
    for sigma in levels {
        let noise = NoiseModel { multiplicative: sigma, additive: 0.0, phase: 0.0 };
        let mut gs = Vec::new();
        let mut sig = Vec::new();
        for seed in 0..100 {
            let d = generate_synthetic(&amp_setup(), &coupled_fit(), &grid(), &noise, false, 1000 + seed);
            let r = fit_response(&d, &amp_setup(), &coupled_fit(), &bounds()).unwrap();
            gs.push(r.params.g);
            sig.push(r.param_sigmas.g);
        }
        spread.push(std_dev(&gs));
        curvature.push(sig.iter().sum::<f64>() / sig.len() as f64);
    }
    for k in 0..2 {
        let empirical = spread[k + 1] / spread[k];
        let predicted = curvature[k + 1] / curvature[k];
        assert!((empirical / 2.0 - 1.0).abs() < 0.25, "empirical ratio {empirical}");
        assert!((predicted / 2.0 - 1.0).abs() < 0.05, "curvature ratio {predicted}");
    }
}

#[test]
fn ignoring_the_delay_leaves_asymmetric_residuals() {
    let d = generate_synthetic(&amp_setup(), &coupled_fit(), &grid(), &NoiseModel::none(), false, 0);
    let mut setup = amp_setup();
    setup.fix_tau = true;
    let start = FitParams { tau: 0.0, ..coupled_fit() };
    let r = fit_response(&d, &setup, &start, &bounds()).unwrap();
    assert_eq!(r.params.tau, 0.0);
    let res = residuals(&d, &setup, &r.params);
    // mirror the residual pattern about the mean normal-mode frequency
    let centre = 0.5 * (WM + r.params.omega_s);
    let (w0, dw) = (d.omega[0], d.omega[1] - d.omega[0]);
    let interp = |w: f64| {
        let x = (w - w0) / dw;
        let k = x.floor() as usize;
        let f = x - k as f64;
        res[k] + f * (res[k + 1] - res[k])
    };
    let mut odd = 0.0;
    let mut total = 0.0;
    for (i, w) in d.omega.iter().enumerate() {
        let mirror = 2.0 * centre - w;
        if (mirror - centre).abs() < khz(12.0) {
            let rm = interp(mirror);
            odd += (res[i] - rm).powi(2);
            total += res[i].powi(2) + rm.powi(2);
        }
    }
    assert!(r.residual_sse > 1e-6, "delay-free model fits delayed data: {}", r.residual_sse);
    assert!(odd / total > 0.5, "asymmetry fraction {}", odd / total);

    let free = fit_response(&d, &amp_setup(), &start, &bounds()).unwrap();
    assert!(free.residual_sse < 1e-3 * r.residual_sse);
}

#[test]
fn rescaled_data_give_the_same_shape() {
    let noise = NoiseModel { multiplicative: 0.01, additive: 0.0, phase: 0.0 };
    let d = generate_synthetic(&amp_setup(), &coupled_fit(), &grid(), &noise, false, 3);
    let k = 37.5;
    let scaled = ResponseDataset { amplitude: d.amplitude.iter().map(|a| a * k).collect(), ..d.clone() };
    let g2 = FitParams { a: guess().a * k, ..guess() };
    let r1 = fit_response(&d, &amp_setup(), &guess(), &bounds()).unwrap();
    let r2 = fit_response(&scaled, &amp_setup(), &g2, &bounds()).unwrap();
    for (a, b) in [
        (r1.params.g, r2.params.g),
        (r1.params.gamma_m, r2.params.gamma_m),
        (r1.params.gamma_s, r2.params.gamma_s),
        (r1.params.omega_s, r2.params.omega_s),
        (r1.params.tau, r2.params.tau),
    ] {
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-9), "{a} vs {b}");
    }
    assert!((r2.params.a / (k * r1.params.a) - 1.0).abs() < 1e-8);
}

#[test]
fn exchange_symmetric_modes_still_converge() {
    let truth = FitParams { gamma_m: khz(1.5), gamma_s: khz(1.5), tau: 0.0, ..coupled_fit() };
    let d = generate_synthetic(&amp_setup(), &truth, &grid(), &NoiseModel::none(), false, 0);
    let mut setup = amp_setup();
    setup.fix_tau = true;
    let start = FitParams { g: khz(2.7), gamma_m: khz(1.2), gamma_s: khz(1.9), ..truth };
    let r = fit_response(&d, &setup, &start, &bounds()).unwrap();
    assert!(r.converged, "{r:?}");
    assert!((r.params.g / truth.g - 1.0).abs() < 1e-6);
    assert!((r.params.gamma_m + r.params.gamma_s) / (2.0 * khz(1.5)) - 1.0 < 1e-6);
}

#[test]
fn spectrum_fit_round_trip() {
    let setup = FitSetup::new(ModelKind::PsdAbsChiSq, WM, PI);
    let truth = FitParams { a: 1e12, b_offset: 50.0, g: khz(2.95), omega_s: WM + khz(1.0), ..coupled_fit() };
    let d = generate_synthetic(&setup, &truth, &grid(), &NoiseModel::none(), false, 0);
    let start = FitParams { g: khz(2.5), b_offset: 0.0, a: 0.8e12, tau: 10e-9, ..truth };
    let r = fit_response(&d, &setup, &start, &bounds()).unwrap();
    assert!(r.converged);
    assert!((r.params.g / truth.g - 1.0).abs() < 1e-6);
    assert!((r.params.b_offset - 50.0).abs() < 1e-3);
    assert!((r.params.omega_s - truth.omega_s).abs() < 1e-3);
}

#[test]
fn refuses_unstable_spectrum_fit() {
    let setup = FitSetup::new(ModelKind::PsdAbsChiSq, 2.0 * PI * 1.957e6, 0.0);
    let stable = FitParams { a: 1e12, b_offset: 0.0, g: khz(0.2), tau: 0.0, ..coupled_fit() };
    let d = generate_synthetic(&setup, &stable, &grid(), &NoiseModel::none(), false, 0);
    let push = FitParams { g: khz(6.0), ..stable };
    let mut setup_fixed = setup;
    setup_fixed.max_iter = 0;
    let mut tight = bounds();
    tight.lo.g = khz(5.0);
    match fit_response(&d, &setup_fixed, &push, &tight) {
        Err(Error::UnstableFit { min_gamma }) => assert!(min_gamma < 0.0),
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn too_few_points_rejected() {
    let short: Vec<f64> = grid().into_iter().step_by(30).collect();
    let d = generate_synthetic(&amp_setup(), &coupled_fit(), &short, &NoiseModel::none(), false, 0);
    assert!(matches!(fit_response(&d, &amp_setup(), &guess(), &bounds()), Err(Error::InvalidParameter(_))));
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let noise = NoiseModel { multiplicative: 0.01, additive: 0.0, phase: 0.0 };
    let d = generate_synthetic(&amp_setup(), &coupled_fit(), &grid(), &noise, false, 5);
    let mut setup = amp_setup();
    setup.max_iter = 0;
    let r = fit_response(&d, &setup, &guess(), &bounds()).unwrap();
    assert!(!r.converged);
    assert!(r.residual_sse <= r.initial_sse);
}
