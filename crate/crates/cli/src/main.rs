use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lightloop_cli::{context, run, Command, Options};

#[derive(Parser)]
#[command(name = "lightloop", version, about = "Spin-membrane coupling through an optical loop")]
struct Cli {
    /// Scenario file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides LIGHTLOOP_OUT and [output] dir
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Coupling, back-action and cooperativity figures
    DeriveRates,
    /// Normal-mode frequencies and damping over the detuning sweep
    NormalModes,
    /// Membrane spectra over (spin detuning, Fourier frequency)
    SweepSpectra,
    /// Covariance dynamics and collective variances
    Covariance,
    /// Mean-value exchange oscillations
    Exchange,
    /// Spin-signal contrast against loop phase
    Interference,
    /// Fit a measured response
    Fit {
        /// CSV with frequency, amplitude and optional phase columns
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Synthetic response data
    Synthesize,
    /// Rates against laser-atom detuning
    DesignStudy,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let (cmd, data) = match cli.cmd {
        Sub::DeriveRates => (Command::DeriveRates, None),
        Sub::NormalModes => (Command::NormalModes, None),
        Sub::SweepSpectra => (Command::SweepSpectra, None),
        Sub::Covariance => (Command::Covariance, None),
        Sub::Exchange => (Command::Exchange, None),
        Sub::Interference => (Command::Interference, None),
        Sub::Fit { data } => (Command::Fit, data),
        Sub::Synthesize => (Command::Synthesize, None),
        Sub::DesignStudy => (Command::DesignStudy, None),
    };
    let opts = Options { config, out: cli.out, threads: cli.threads, seed: cli.seed, data };
    let result = context(&opts).and_then(|ctx| run(cmd, &ctx));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
