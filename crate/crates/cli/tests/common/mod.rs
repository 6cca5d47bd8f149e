#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use lightloop_cli::{Config, Context};

pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load(name: &str) -> Config {
    Config::load(&config_path(name)).unwrap().0
}

pub fn context(cfg: Config, out: &Path, threads: usize, seed: u64) -> Context {
    let text = cfg.to_toml();
    Context {
        config: cfg,
        base_dir: config_path(""),
        config_hash: lightloop_cli::output::sha256_hex(&text),
        seed,
        out_dir: out.to_path_buf(),
        threads,
        data_override: None,
    }
}

pub fn bin(args: &[&str], out: &Path) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_lightloop"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove(lightloop_cli::OUT_ENV)
        .output()
        .expect("binary runs")
}

/// Data rows of a rendered CSV, header row dropped.
pub fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| if c == "nan" { f64::NAN } else { c.parse().unwrap() }).collect())
        .collect();
    (header, rows)
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    csv_rows(&std::fs::read_to_string(path).unwrap())
}

pub fn report_value(path: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    lightloop_cli::output::parse_report(&text)
        .into_iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
        .1
}

pub fn report_f64(path: &Path, key: &str) -> f64 {
    let v = report_value(path, key);
    if v == "nan" {
        f64::NAN
    } else {
        v.parse().unwrap()
    }
}

/// Vertex of the parabola through three samples around index `i`.
pub fn refine_peak(x: &[f64], y: &[f64], i: usize) -> f64 {
    let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
    let h = x[i + 1] - x[i];
    x[i] + 0.5 * h * (a - c) / (a - 2.0 * b + c)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

pub fn col(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let k = column(header, name);
    rows.iter().map(|r| r[k]).collect()
}
