//! One function per subcommand. Each builds tables or reports in memory; `run` writes them.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use lightloop::bilinear::model_drift_diffusion;
use lightloop::fit::{
    delay_consistency_check_with, fit_response, generate_synthetic, FitBounds, FitParams, FitResult, FitSetup,
    ModelKind, NoiseModel, ResponseDataset, Weighting, DEFAULT_DELAY_THRESHOLD,
};
use lightloop::langevin::{
    self, mean_value_trajectory, normal_mode_sweep, normal_modes, psd_at, spin_self_shift, CoupledModes, Drive,
    MeanTrajectory,
};
use lightloop::lyapunov::{self, collective_variances, CovarianceState};
use lightloop::model::{
    cooperativity_bound, derive_rates, design_study, double_loop_cooperativity, Label, LoopVariant, SystemModel,
};
use lightloop::optics::{interference_contrast, output_quadrature, SampledSignal};
use lightloop::units::to_hz;
use rayon::prelude::*;

use crate::config::{angle, freq, linspace, require_points, time, Config, FitParamSection};
use crate::error::CliError;
use crate::output::{write_file, Provenance, Report, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    DeriveRates,
    NormalModes,
    SweepSpectra,
    Covariance,
    Exchange,
    Interference,
    Fit,
    Synthesize,
    DesignStudy,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DeriveRates => "derive-rates",
            Command::NormalModes => "normal-modes",
            Command::SweepSpectra => "sweep-spectra",
            Command::Covariance => "covariance",
            Command::Exchange => "exchange",
            Command::Interference => "interference",
            Command::Fit => "fit",
            Command::Synthesize => "synthesize",
            Command::DesignStudy => "design-study",
        }
    }
}

pub struct Context {
    pub config: Config,
    /// Relative data paths resolve against this directory.
    pub base_dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub data_override: Option<PathBuf>,
}

/// Named outputs of one command, in write order.
#[derive(Default)]
pub struct Outputs {
    pub tables: Vec<(String, Table)>,
    pub reports: Vec<(String, Report)>,
}

impl Outputs {
    fn table(mut self, name: &str, t: Table) -> Self {
        self.tables.push((name.to_string(), t));
        self
    }

    fn report(mut self, name: &str, r: Report) -> Self {
        self.reports.push((name.to_string(), r));
        self
    }

    pub fn get_table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_report(&self, name: &str) -> Option<&Report> {
        self.reports.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Computes and writes one command's outputs. A non-converged fit still writes its report.
pub fn run(cmd: Command, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let prov = Provenance { command: cmd.name().to_string(), config_hash: ctx.config_hash.clone(), seed: ctx.seed };
    let (outputs, failure) = match compute(cmd, ctx) {
        Ok(o) => (o, None),
        Err((Some(o), e)) => (o, Some(e)),
        Err((None, e)) => return Err(e),
    };
    let mut paths = Vec::new();
    for (name, t) in &outputs.tables {
        paths.push(write_file(&ctx.out_dir, name, &t.render(&prov))?);
    }
    for (name, r) in &outputs.reports {
        paths.push(write_file(&ctx.out_dir, name, &r.render(&prov))?);
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(paths),
    }
}

type Partial = (Option<Outputs>, CliError);

pub fn compute(cmd: Command, ctx: &Context) -> Result<Outputs, Partial> {
    let cfg = &ctx.config;
    let plain = |r: Result<Outputs, CliError>| r.map_err(|e| (None, e));
    match cmd {
        Command::DeriveRates => plain(derive_rates_report(cfg).map(|r| Outputs::default().report("rates.txt", r))),
        Command::NormalModes => plain(normal_modes_table(cfg).map(|t| Outputs::default().table("normal_modes.csv", t))),
        Command::SweepSpectra => plain(pool(ctx.threads).and_then(|p| sweep_spectra(cfg, &p))),
        Command::Covariance => plain(covariance(cfg)),
        Command::Exchange => plain(exchange(cfg)),
        Command::Interference => plain(pool(ctx.threads).and_then(|p| interference(cfg, &p))),
        Command::Synthesize => plain(synthesize(cfg, ctx.seed).map(|t| Outputs::default().table("synthetic.csv", t))),
        Command::DesignStudy => plain(design(cfg)),
        Command::Fit => {
            let data_path = match (&ctx.data_override, cfg.fit.as_ref().and_then(|f| f.data.as_ref())) {
                (Some(p), _) => p.clone(),
                (None, Some(p)) => ctx.base_dir.join(p),
                (None, None) => return Err((None, CliError::Config("fit needs --data or fit.data".into()))),
            };
            let data = read_dataset(&data_path).map_err(|e| (None, e))?;
            let (report, result) = fit(cfg, &data).map_err(|e| (None, e))?;
            let out = Outputs::default().report("fit.txt", report);
            if result.converged {
                Ok(out)
            } else {
                let msg = format!("{} iterations, gradient norm {:e}", result.iterations, result.gradient_norm);
                Err((Some(out), CliError::FitNotConverged(msg)))
            }
        }
    }
}

fn hz(w: f64) -> f64 {
    to_hz(w)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Coupled-mode parameters: the `[coupling]` override if present, else derived from the model.
pub fn coupled_modes(cfg: &Config, model: &SystemModel) -> Result<CoupledModes, CliError> {
    Ok(match cfg.direct_coupling()? {
        Some(g) => CoupledModes::symmetric(
            model.membrane.omega,
            model.spin.omega,
            model.membrane.gamma0,
            model.spin.gamma0,
            g,
            model.loop_cfg.phi,
            model.loop_cfg.tau,
        ),
        None => CoupledModes::from_model(model),
    })
}

pub fn derive_rates_report(cfg: &Config) -> Result<Report, CliError> {
    let model = cfg.system_model()?;
    let r = derive_rates(&model);
    let l = &model.loop_cfg;
    let mut rep = Report::default();
    rep.num("g_hz", hz(r.g));
    rep.num("two_g_hz", hz(2.0 * r.g));
    rep.num("g_ms_hz", hz(r.g_ms));
    rep.num("g_sm_hz", hz(r.g_sm));
    rep.num("gamma_ba_m_hz", hz(r.gamma_ba_m));
    rep.num("gamma_ba_s_hz", hz(r.gamma_ba_s));
    rep.num("gamma_th_m_hz", hz(r.gamma_th_m));
    rep.num("gamma_th_s_hz", hz(r.gamma_th_s));
    rep.num("gamma_tot_m_hz", hz(r.gamma_tot_m));
    rep.num("gamma_tot_s_hz", hz(r.gamma_tot_s));
    rep.num("cooperativity", r.coop);
    rep.num("nbar_eff", r.nbar_eff.unwrap_or(f64::NAN));
    rep.num("xi_pred", r.xi_pred.unwrap_or(f64::NAN));
    let (dw, dg) = spin_self_shift(&model);
    rep.num("spin_shift_hz", hz(dw));
    rep.num("spin_damping_shift_hz", hz(dg));
    let eta_sq = l.eta12 * l.eta23;
    rep.num("eta_sq", eta_sq);
    rep.num("cooperativity_bound", cooperativity_bound(eta_sq)?.c);
    rep.num("cooperativity_bound_ratio", cooperativity_bound(eta_sq)?.ratio_opt);
    rep.num("double_loop_cooperativity", double_loop_cooperativity(eta_sq)?.c);
    Ok(rep)
}

fn detuning_grid(cfg: &Config) -> Result<Vec<f64>, CliError> {
    let s = cfg.section(&cfg.sweep, "sweep")?;
    linspace(
        freq(&s.detuning_start, "sweep.detuning_start")?,
        freq(&s.detuning_stop, "sweep.detuning_stop")?,
        s.detuning_points,
        "sweep.detuning_points",
    )
}

fn spin_at(modes: &CoupledModes, delta: f64) -> f64 {
    modes.spin_sign() * (modes.omega_m + delta)
}

pub fn normal_modes_table(cfg: &Config) -> Result<Table, CliError> {
    let model = cfg.system_model()?;
    let modes = coupled_modes(cfg, &model)?;
    let grid = detuning_grid(cfg)?;
    let mut t = Table::new(&[
        ("delta", "Hz"),
        ("spin_frequency", "Hz"),
        ("omega_plus", "Hz"),
        ("omega_minus", "Hz"),
        ("gamma_plus", "Hz"),
        ("gamma_minus", "Hz"),
        ("stable_plus", "1"),
        ("stable_minus", "1"),
    ]);
    for (d, nm) in grid.iter().zip(normal_mode_sweep(&modes, &grid)) {
        t.push(vec![
            hz(*d),
            hz(spin_at(&modes, *d)),
            hz(nm.omega_plus),
            hz(nm.omega_minus),
            hz(nm.gamma_plus),
            hz(nm.gamma_minus),
            flag(nm.stable_plus),
            flag(nm.stable_minus),
        ]);
    }
    Ok(t)
}

/// Membrane spectra over the (spin detuning, Fourier frequency) grid. Rows whose normal
/// modes are unstable carry `stable = 0` and `nan` spectra.
pub fn sweep_spectra(cfg: &Config, pool: &rayon::ThreadPool) -> Result<Outputs, CliError> {
    let model = cfg.system_model()?;
    let modes = coupled_modes(cfg, &model)?;
    let grid = detuning_grid(cfg)?;
    let s = cfg.section(&cfg.sweep, "sweep")?;
    let (fa, fb) = match (&s.frequency_start, &s.frequency_stop) {
        (Some(a), Some(b)) => (freq(a, "sweep.frequency_start")?, freq(b, "sweep.frequency_stop")?),
        _ => return Err(CliError::Config("sweep-spectra needs sweep.frequency_start and frequency_stop".into())),
    };
    let axis = linspace(fa, fb, require_points(s.frequency_points, "sweep.frequency_points")?, "sweep.frequency_points")?;
    let rows: Vec<(bool, Vec<f64>)> = pool.install(|| {
        grid.par_iter()
            .map(|&d| {
                let ws = spin_at(&modes, d);
                let md = modes.with_omega_s(ws);
                let mut sm = model;
                sm.spin.omega = ws;
                let stable = normal_modes(&md).stable();
                let psd = if stable {
                    axis.iter().map(|&w| psd_at(&sm, &md, w)).collect()
                } else {
                    vec![f64::NAN; axis.len()]
                };
                (stable, psd)
            })
            .collect()
    });
    let mut t = Table::new(&[("delta", "Hz"), ("spin_frequency", "Hz"), ("frequency", "Hz"), ("psd", "1/Hz"), ("stable", "1")]);
    for (d, (stable, psd)) in grid.iter().zip(&rows) {
        for (w, p) in axis.iter().zip(psd) {
            t.push(vec![hz(*d), hz(spin_at(&modes, *d)), hz(*w), *p, flag(*stable)]);
        }
    }
    Ok(Outputs::default().table("spectra.csv", t).table("spectra_normal_modes.csv", normal_modes_table(cfg)?))
}

fn samples_every(cfg_interval: Option<&crate::config::Quantity>, dt: f64, key: &str) -> Result<usize, CliError> {
    Ok(match cfg_interval {
        Some(q) => ((time(q, key)? / dt).round() as usize).max(1),
        None => 1,
    })
}

/// Least-squares slope of `ln y` against `t`.
pub fn log_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mt = t.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(&ly).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    sxy / sxx
}

fn argmin(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x < v[best] { i } else { best })
}

/// Collective variances along the covariance trajectory from the thermal state, without
/// and with detector noise, plus a summary.
pub fn covariance(cfg: &Config) -> Result<Outputs, CliError> {
    let model = cfg.system_model()?;
    model.require_dynamics()?;
    let integ = cfg.section(&cfg.integrator, "integrator")?;
    let t_end = time(&integ.t_end, "integrator.t_end")?;
    let fd = model_drift_diffusion(&model)?;
    let dt = match &integ.dt {
        Some(q) => time(q, "integrator.dt")?,
        None => lyapunov::default_dt(&fd),
    };
    let every = samples_every(integ.sample_interval.as_ref(), dt, "integrator.sample_interval")?;
    let traj = lyapunov::integrate(&fd, &CovarianceState::thermal(&model), t_end, dt, every)?;
    let (wm, ws, a) = (model.membrane.omega, model.spin.omega, model.alpha);
    let mut t = Table::new(&[
        ("t", "s"),
        ("var_xplus", "1"),
        ("var_xminus", "1"),
        ("var_pplus", "1"),
        ("var_pminus", "1"),
        ("xi", "1"),
        ("var_xplus_det", "1"),
        ("var_xminus_det", "1"),
        ("var_pplus_det", "1"),
        ("var_pminus_det", "1"),
        ("xi_det", "1"),
        ("heisenberg_margin", "1"),
    ]);
    let mut ts = Vec::new();
    let (mut xm, mut xm_det, mut xp, mut xi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for st in &traj {
        let c = collective_variances(st, wm, ws, a, 0.0);
        let d = collective_variances(st, wm, ws, a, model.n_det);
        t.push(vec![
            st.t,
            c.var_xplus,
            c.var_xminus,
            c.var_pplus,
            c.var_pminus,
            c.xi,
            d.var_xplus,
            d.var_xminus,
            d.var_pplus,
            d.var_pminus,
            d.xi,
            st.heisenberg_margin(),
        ]);
        ts.push(st.t);
        xm.push(c.var_xminus);
        xm_det.push(d.var_xminus);
        xp.push(c.var_xplus);
        xi.push(c.xi);
    }
    let mut rep = Report::default();
    let i = argmin(&xm);
    let j = argmin(&xm_det);
    rep.num("min_var_xminus", xm[i]);
    rep.num("t_min_var_xminus_s", ts[i]);
    rep.num("squeezing_db", 10.0 * (xm[0] / xm[i]).log10());
    rep.num("min_var_xminus_det", xm_det[j]);
    rep.num("t_min_var_xminus_det_s", ts[j]);
    rep.num("squeezing_db_det", 10.0 * (xm_det[0] / xm_det[j]).log10());
    rep.num("detector_share", 0.5 * model.n_det);
    // fit window: last 80 % of the run
    let k0 = ts.iter().position(|&x| x >= 0.2 * t_end).unwrap_or(0);
    let rate = if ts.len() - k0 >= 2 { log_slope(&ts[k0..], &xp[k0..]) } else { f64::NAN };
    rep.num("growth_rate_var_xplus_hz", hz(rate));
    rep.num("min_xi", xi[argmin(&xi)]);
    rep.num("dt_s", dt);
    Ok(Outputs::default().table("covariance.csv", t).report("covariance_summary.txt", rep))
}

fn label(s: &str) -> Result<Label, CliError> {
    match s {
        "membrane" => Ok(Label::Membrane),
        "spin" => Ok(Label::Spin),
        other => Err(CliError::Config(format!("drive.target must be membrane or spin, got '{other}'"))),
    }
}

/// First index at or after `from` that is the maximum of its `+-w` neighbourhood, so that
/// ripple at twice the carrier frequency is ignored.
fn first_peak(v: &[f64], from: usize, w: usize) -> Option<usize> {
    let w = w.max(1);
    (from.max(w)..v.len().saturating_sub(w)).find(|&i| v[i - w..=i + w].iter().all(|x| *x <= v[i]))
}

fn first_trough(v: &[f64], from: usize, w: usize) -> Option<usize> {
    let w = w.max(1);
    (from.max(w)..v.len().saturating_sub(w)).find(|&i| v[i - w..=i + w].iter().all(|x| *x >= v[i]))
}

pub fn exchange_trajectory(cfg: &Config) -> Result<(CoupledModes, MeanTrajectory), CliError> {
    let model = cfg.system_model()?;
    model.require_dynamics()?;
    let modes = coupled_modes(cfg, &model)?;
    let ex = cfg.section(&cfg.exchange, "exchange")?;
    if ex.nbar_m < 0.0 || ex.nbar_s < 0.0 {
        return Err(CliError::Config("exchange.nbar_m and nbar_s must be >= 0".into()));
    }
    let dt = match &ex.dt {
        Some(q) => time(q, "exchange.dt")?,
        None => langevin::default_dt(&modes),
    };
    let every = samples_every(ex.sample_interval.as_ref(), dt, "exchange.sample_interval")?;
    let drive = match &ex.drive {
        Some(d) => Some(Drive {
            target: label(&d.target)?,
            amplitude: d.amplitude,
            omega: freq(&d.frequency, "exchange.drive.frequency")?,
            phase: match &d.phase {
                Some(p) => angle(p, "exchange.drive.phase")?,
                None => 0.0,
            },
            t_on: time(&d.start, "exchange.drive.start")?,
            t_off: time(&d.stop, "exchange.drive.stop")?,
        }),
        None => None,
    };
    let init = [(2.0 * ex.nbar_m).sqrt(), 0.0, (2.0 * ex.nbar_s).sqrt(), 0.0];
    let traj = mean_value_trajectory(&modes, init, drive, time(&ex.t_end, "exchange.t_end")?, dt, every)?;
    Ok((modes, traj))
}

/// Excitation numbers and demodulated quadratures of the delayed mean-value equations.
pub fn exchange(cfg: &Config) -> Result<Outputs, CliError> {
    let (modes, traj) = exchange_trajectory(cfg)?;
    let mut t = Table::new(&[
        ("t", "s"),
        ("n_m", "1"),
        ("n_s", "1"),
        ("x_m_demod", "1"),
        ("p_m_demod", "1"),
        ("x_s_demod", "1"),
        ("p_s_demod", "1"),
    ]);
    for s in &traj.samples {
        t.push(vec![s.t, s.n_m, s.n_s, s.demod[0], s.demod[1], s.demod[2], s.demod[3]]);
    }
    let ts = traj.times();
    let nm: Vec<f64> = traj.samples.iter().map(|s| s.n_m).collect();
    let ns: Vec<f64> = traj.samples.iter().map(|s| s.n_s).collect();
    let mut rep = Report::default();
    let g = modes.g();
    rep.num("g_hz", hz(g));
    rep.num("period_closed_form_s", PI / g);
    let nan = f64::NAN;
    // neighbourhood of 5 % of the closed-form period
    let dt_s = if ts.len() > 1 { ts[1] - ts[0] } else { 1.0 };
    let w = ((0.05 * PI / g / dt_s).round() as usize).max(1);
    match first_peak(&ns, 1, w) {
        Some(i) => {
            rep.num("spin_max_time_s", ts[i]);
            rep.num("spin_max_n", ns[i]);
            let n0 = nm[0] + ns[0];
            rep.num("transfer_efficiency", if n0 > 0.0 { ns[i] / n0 } else { nan });
            let trough = first_trough(&nm, 1, w);
            rep.num("membrane_min_time_s", trough.map(|k| ts[k]).unwrap_or(nan));
            let revival = trough.and_then(|k| first_peak(&nm, k, w));
            rep.num("membrane_revival_time_s", revival.map(|k| ts[k]).unwrap_or(nan));
            rep.num("membrane_revival_n", revival.map(|k| nm[k]).unwrap_or(nan));
        }
        None => {
            for k in ["spin_max_time_s", "spin_max_n", "transfer_efficiency", "membrane_min_time_s"] {
                rep.num(k, nan);
            }
            rep.num("membrane_revival_time_s", nan);
            rep.num("membrane_revival_n", nan);
        }
    }
    Ok(Outputs::default().table("exchange.csv", t).report("exchange_summary.txt", rep))
}

/// Spin-signal contrast against loop phase, with optional output-field traces.
pub fn interference(cfg: &Config, pool: &rayon::ThreadPool) -> Result<Outputs, CliError> {
    let model = cfg.system_model()?;
    let sec = cfg.section(&cfg.interference, "interference")?;
    let ws = match &sec.spin_frequency {
        Some(q) => freq(q, "interference.spin_frequency")?,
        None => model.spin.omega,
    };
    let tau = match &sec.delay {
        Some(q) => time(q, "interference.delay")?,
        None => model.loop_cfg.tau,
    };
    let phases = linspace(0.0, 2.0 * PI, sec.phase_points, "interference.phase_points")?;
    let mut t = Table::new(&[("phi", "rad"), ("epsilon", "1")]);
    for &p in &phases {
        t.push(vec![p, interference_contrast(p, ws, tau)]);
    }
    let mut rep = Report::default();
    let (e0, epi) = (interference_contrast(0.0, ws, tau), interference_contrast(PI, ws, tau));
    rep.num("two_omega_s_tau", 2.0 * ws * tau);
    rep.num("epsilon_0", e0);
    rep.num("epsilon_pi", epi);
    rep.num("contrast_ratio", e0 / epi);
    let mut out = Outputs::default().table("interference.csv", t);
    if sec.trace {
        let trace_phases: Vec<f64> = if sec.trace_phases.is_empty() {
            vec![0.0, PI]
        } else {
            sec.trace_phases.iter().map(|q| angle(q, "interference.trace_phases")).collect::<Result<_, _>>()?
        };
        let t_end = match &sec.trace_t_end {
            Some(q) => time(q, "interference.trace_t_end")?,
            None => 200e-6,
        };
        let n0 = sec.trace_nbar_s.unwrap_or(1e4);
        let traces: Vec<Result<Vec<(f64, f64, f64)>, CliError>> = pool.install(|| {
            trace_phases
                .par_iter()
                .map(|&phi| output_trace(&model, phi, ws, tau, n0, t_end))
                .collect()
        });
        let mut tt = Table::new(&[("phi", "rad"), ("t", "s"), ("x_out", "1"), ("p_out", "1")]);
        for (k, (phi, tr)) in trace_phases.iter().zip(traces).enumerate() {
            let tr = tr?;
            let rms = (tr.iter().map(|(_, x, _)| x * x).sum::<f64>() / tr.len().max(1) as f64).sqrt();
            rep.num(&format!("trace_{k}_phi"), *phi);
            rep.num(&format!("trace_{k}_rms_x_out"), rms);
            for (ti, x, p) in tr {
                tt.push(vec![*phi, ti, x, p]);
            }
        }
        out = out.table("interference_trace.csv", tt);
    }
    Ok(out.report("interference_summary.txt", rep))
}

/// Output quadratures after a spin excitation with the membrane decoupled.
fn output_trace(model: &SystemModel, phi: f64, ws: f64, tau: f64, n0: f64, t_end: f64) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let mut m = *model;
    m.membrane.gamma_meas = 0.0;
    m.spin.omega = ws;
    m.loop_cfg = m.loop_cfg.with_phi(phi).with_tau(tau);
    let modes = CoupledModes::from_model(&m);
    let dt = langevin::default_dt(&modes);
    let traj = mean_value_trajectory(&modes, [0.0, 0.0, (2.0 * n0).sqrt(), 0.0], None, t_end, dt, 1)?;
    let xs = SampledSignal::new(0.0, dt, traj.samples.iter().map(|s| s.q[2]).collect());
    let xm = SampledSignal::new(0.0, dt, traj.samples.iter().map(|s| s.q[0]).collect());
    let stride = ((0.2e-6 / dt).round() as usize).max(1);
    let start = (2.0 * tau / dt).ceil() as usize;
    let mut out = Vec::new();
    for k in (start..traj.samples.len()).step_by(stride) {
        let t = k as f64 * dt;
        let o = output_quadrature(&m, &xs, &xm, t)?;
        out.push((t, o.x, o.p));
    }
    Ok(out)
}

fn fit_kind(s: &str) -> Result<ModelKind, CliError> {
    match s {
        "amplitude" => Ok(ModelKind::AmplitudeAbsChi),
        "psd" => Ok(ModelKind::PsdAbsChiSq),
        other => Err(CliError::Config(format!("model must be amplitude or psd, got '{other}'"))),
    }
}

pub fn fit_params(p: &FitParamSection, key: &str) -> Result<FitParams, CliError> {
    Ok(FitParams {
        a: p.a,
        b_offset: p.b,
        g: freq(&p.g, &format!("{key}.g"))?,
        gamma_m: freq(&p.linewidth_m, &format!("{key}.linewidth_m"))?,
        gamma_s: freq(&p.linewidth_s, &format!("{key}.linewidth_s"))?,
        omega_s: freq(&p.spin_frequency, &format!("{key}.spin_frequency"))?,
        tau: match &p.delay {
            Some(q) => time(q, &format!("{key}.delay"))?,
            None => 0.0,
        },
        phase_offset: match &p.phase_offset {
            Some(q) => angle(q, &format!("{key}.phase_offset"))?,
            None => 0.0,
        },
    })
}

fn fit_setup(cfg: &Config, kind: ModelKind) -> Result<FitSetup, CliError> {
    Ok(FitSetup::new(kind, cfg.membrane_mode()?.omega, cfg.loop_config()?.phi))
}

/// Reads `frequency` [Hz], `amplitude` and optional `phase` [rad], `weight` columns.
pub fn read_dataset(path: &Path) -> Result<ResponseDataset, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_dataset(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_dataset(text: &str) -> Result<ResponseDataset, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or("no header row")?.split(',').map(str::trim).collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let f = col("frequency").ok_or("missing frequency column")?;
    let a = col("amplitude").ok_or("missing amplitude column")?;
    let (p, w) = (col("phase"), col("weight"));
    let (mut omega, mut amp, mut phase, mut weight) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(format!("row {} has {} cells, expected {}", i + 1, cells.len(), header.len()));
        }
        let get = |k: usize| cells[k].parse::<f64>().map_err(|_| format!("row {}: cannot parse '{}'", i + 1, cells[k]));
        omega.push(2.0 * PI * get(f)?);
        amp.push(get(a)?);
        if let Some(k) = p {
            phase.push(get(k)?);
        }
        if let Some(k) = w {
            weight.push(get(k)?);
        }
    }
    Ok(ResponseDataset {
        omega,
        amplitude: amp,
        phase: p.map(|_| phase),
        weights: w.map(|_| weight),
    })
}

pub fn fit(cfg: &Config, data: &ResponseDataset) -> Result<(Report, FitResult), CliError> {
    let sec = cfg.section(&cfg.fit, "fit")?;
    let mut setup = fit_setup(cfg, fit_kind(&sec.model)?)?;
    setup.fix_tau = sec.fix_delay;
    setup.weighting = match sec.weighting.as_deref() {
        None | Some("uniform") => Weighting::Uniform,
        Some("inverse_amplitude_sq") => Weighting::InverseAmplitudeSq,
        Some(other) => return Err(CliError::Config(format!("fit.weighting: unknown '{other}'"))),
    };
    if let Some(n) = sec.max_iter {
        setup.max_iter = n;
    }
    let guess = fit_params(&sec.initial, "fit.initial")?;
    let bounds = FitBounds::default_for(setup.omega_m, guess.omega_s.signum());
    let r = fit_response(data, &setup, &guess, &bounds)?;
    let p = &r.params;
    let s = &r.param_sigmas;
    let mut rep = Report::default();
    rep.text("converged", r.converged);
    rep.text("model", &sec.model);
    rep.text("iterations", r.iterations);
    rep.text("n_points", r.n_points);
    rep.num("residual_sse", r.residual_sse);
    rep.num("initial_sse", r.initial_sse);
    rep.num("gradient_norm", r.gradient_norm);
    for (k, v, e) in [
        ("a", p.a, s.a),
        ("b", p.b_offset, s.b_offset),
        ("g_hz", hz(p.g), hz(s.g)),
        ("gamma_m_hz", hz(p.gamma_m), hz(s.gamma_m)),
        ("gamma_s_hz", hz(p.gamma_s), hz(s.gamma_s)),
        ("spin_frequency_hz", hz(p.omega_s), hz(s.omega_s)),
        ("tau_s", p.tau, s.tau),
        ("phase_offset_rad", p.phase_offset, s.phase_offset),
    ] {
        rep.num(k, v);
        rep.num(&format!("{k}_sigma"), e);
    }
    rep.num("two_g_hz", hz(2.0 * p.g));
    if let (Some(k), Some(d)) = (&sec.kappa, &sec.path_length) {
        let kappa = freq(k, "fit.kappa")?;
        let d = d.si(crate::config::Dimension::Length, "fit.path_length")?;
        let dc = delay_consistency_check_with(p.tau, kappa, d, sec.delay_threshold.unwrap_or(DEFAULT_DELAY_THRESHOLD))?;
        rep.num("tau_calculated_s", dc.calculated);
        rep.num("tau_ratio", dc.ratio);
        rep.num("tau_threshold", dc.threshold);
        rep.text("delay_consistent", dc.consistent);
    }
    Ok((rep, r))
}

pub fn synthesize(cfg: &Config, seed: u64) -> Result<Table, CliError> {
    let sec = cfg.section(&cfg.synthesize, "synthesize")?;
    let setup = fit_setup(cfg, fit_kind(&sec.model)?)?;
    let truth = fit_params(&sec.truth, "synthesize.truth")?;
    let grid = linspace(
        freq(&sec.frequency_start, "synthesize.frequency_start")?,
        freq(&sec.frequency_stop, "synthesize.frequency_stop")?,
        sec.frequency_points,
        "synthesize.frequency_points",
    )?;
    let noise = NoiseModel {
        multiplicative: sec.multiplicative_noise,
        additive: sec.additive_noise,
        phase: match &sec.phase_noise {
            Some(q) => angle(q, "synthesize.phase_noise")?,
            None => 0.0,
        },
    };
    if noise.multiplicative < 0.0 || noise.additive < 0.0 || noise.phase < 0.0 {
        return Err(CliError::Config("noise levels must be >= 0".into()));
    }
    let d = generate_synthetic(&setup, &truth, &grid, &noise, sec.with_phase, seed);
    let mut t = if sec.with_phase {
        Table::new(&[("frequency", "Hz"), ("amplitude", "arb"), ("phase", "rad")])
    } else {
        Table::new(&[("frequency", "Hz"), ("amplitude", "arb")])
    };
    for i in 0..d.omega.len() {
        let mut row = vec![hz(d.omega[i]), d.amplitude[i]];
        if let Some(p) = &d.phase {
            row.push(p[i]);
        }
        t.push(row);
    }
    Ok(t)
}

/// Rates and margins against laser-atom detuning, one table per loop variant.
pub fn design(cfg: &Config) -> Result<Outputs, CliError> {
    let phys = cfg.atoms()?;
    let mech = cfg.membrane_mode()?;
    let lc = cfg.loop_config()?;
    let d = cfg.section(&cfg.design, "design")?;
    let grid = linspace(
        freq(&d.detuning_start, "design.detuning_start")?,
        freq(&d.detuning_stop, "design.detuning_stop")?,
        d.detuning_points,
        "design.detuning_points",
    )?;
    let mut out = Outputs::default();
    for v in cfg.design_variants()? {
        let rows = design_study(&phys, &mech, &lc, &grid, v)?;
        let mut t = Table::new(&[
            ("delta_a", "Hz"),
            ("alpha1", "1"),
            ("gamma_s_meas", "Hz"),
            ("gamma_sc", "Hz"),
            ("gamma_s0", "Hz"),
            ("gamma_m_meas", "Hz"),
            ("g", "Hz"),
            ("gamma_m0", "Hz"),
            ("gamma_ba_m", "Hz"),
            ("gamma_ba_s", "Hz"),
            ("gamma_th_m", "Hz"),
            ("gamma_th_s", "Hz"),
            ("gamma_tot_m", "Hz"),
            ("gamma_tot_s", "Hz"),
            ("cooperativity", "1"),
            ("strong_margin", "Hz"),
            ("coherent_margin", "Hz"),
            ("strong", "1"),
            ("coherent", "1"),
            ("single_pass_coop", "1"),
        ]);
        for r in &rows {
            let sc1 = phys.scattering_rate(r.delta_a, phys.phi_flux);
            t.push(vec![
                hz(r.delta_a),
                r.alpha1,
                hz(r.gamma_s_meas),
                hz(r.gamma_sc),
                hz(r.gamma_s0),
                hz(r.gamma_m_meas),
                hz(r.g),
                hz(r.gamma_m0),
                hz(r.gamma_ba_m),
                hz(r.gamma_ba_s),
                hz(r.gamma_th_m),
                hz(r.gamma_th_s),
                hz(r.gamma_tot_m),
                hz(r.gamma_tot_s),
                r.coop,
                hz(r.strong_margin),
                hz(r.coherent_margin),
                flag(r.strong),
                flag(r.coherent),
                4.0 * r.gamma_s_meas / sc1,
            ]);
        }
        let name = match v {
            LoopVariant::OnSpin => "design_loop_on_spin.csv",
            LoopVariant::OnMembrane => "design_loop_on_membrane.csv",
        };
        out = out.table(name, t);
    }
    let mut rep = Report::default();
    rep.num("membrane_gamma0_hz", hz(mech.gamma0));
    rep.num("membrane_nbar", mech.nbar);
    rep.num("membrane_gamma_th_hz", hz(mech.gamma_th()));
    rep.num("membrane_measurement_rate_hz", hz(phys.membrane_measurement_rate()));
    if let Some(w) = phys.larmor(1.0) {
        rep.num("larmor_frequency_hz", hz(w?));
    }
    Ok(out.report("design_summary.txt", rep))
}
