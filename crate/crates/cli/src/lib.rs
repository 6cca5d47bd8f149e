//! Batch front-end for the `lightloop` simulator: TOML scenarios in, CSV tables and
//! `key = value` reports out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

pub use commands::{run, Command, Context};
pub use config::Config;
pub use error::CliError;

pub const OUT_ENV: &str = "LIGHTLOOP_OUT";

/// Output directory: the flag, then `LIGHTLOOP_OUT`, then `[output] dir`, then `./out`.
pub fn resolve_out_dir(flag: Option<&Path>, env: Option<&str>, cfg: &Config, base: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(e) = env.filter(|e| !e.is_empty()) {
        return PathBuf::from(e);
    }
    match cfg.output.as_ref().and_then(|o| o.dir.as_ref()) {
        Some(d) => base.join(d),
        None => PathBuf::from("out"),
    }
}

/// Seed: the flag, then `[synthesize] seed`, then 0.
pub fn resolve_seed(flag: Option<u64>, cfg: &Config) -> u64 {
    flag.or(cfg.synthesize.as_ref().and_then(|s| s.seed)).unwrap_or(0)
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
}

pub fn context(opts: &Options) -> Result<Context, CliError> {
    let (config, text) = Config::load(&opts.config)?;
    let base_dir = opts.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let env = std::env::var(OUT_ENV).ok();
    let out_dir = resolve_out_dir(opts.out.as_deref(), env.as_deref(), &config, &base_dir);
    let threads = match opts.threads {
        Some(0) => return Err(CliError::Config("--threads must be >= 1".into())),
        Some(n) => n,
        None => default_threads(),
    };
    Ok(Context {
        seed: resolve_seed(opts.seed, &config),
        config_hash: output::sha256_hex(&text),
        config,
        base_dir,
        out_dir,
        threads,
        data_override: opts.data.clone(),
    })
}
