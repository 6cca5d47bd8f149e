//! CSV tables with a `#` header block, and flat `key = value` reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Shortest round-tripping scientific form; non-finite values print as `nan`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "nan".to_string()
    }
}

#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

pub struct Table {
    columns: Vec<(String, String)>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    /// `columns` are `(name, unit)` pairs.
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self { columns: columns.iter().map(|(n, u)| (n.to_string(), u.to_string())).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let mut s = String::new();
        writeln!(s, "# lightloop {VERSION}").unwrap();
        writeln!(s, "# command: {}", prov.command).unwrap();
        writeln!(s, "# config_sha256: {}", prov.config_hash).unwrap();
        writeln!(s, "# seed: {}", prov.seed).unwrap();
        let units: Vec<String> = self.columns.iter().map(|(n, u)| format!("{n}[{u}]")).collect();
        writeln!(s, "# units: {}", units.join(",")).unwrap();
        let names: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(s, "{}", names.join(",")).unwrap();
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| num(*v)).collect();
            writeln!(s, "{}", cells.join(",")).unwrap();
        }
        s
    }
}

/// Ordered `key = value` lines.
#[derive(Debug, Default, Clone)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn num(&mut self, key: &str, v: f64) {
        self.entries.push((key.to_string(), num(v)));
    }

    pub fn text(&mut self, key: &str, v: impl ToString) {
        self.entries.push((key.to_string(), v.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let mut s = String::new();
        writeln!(s, "# lightloop {VERSION}").unwrap();
        writeln!(s, "# command: {}", prov.command).unwrap();
        writeln!(s, "# config_sha256: {}", prov.config_hash).unwrap();
        writeln!(s, "# seed: {}", prov.seed).unwrap();
        writeln!(s, "# units: *_hz in Hz (cyclic), *_s in s, dimensionless otherwise").unwrap();
        for (k, v) in &self.entries {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }
}

/// Parses a rendered report back into `(key, value)` pairs.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect()
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let p = dir.join(name);
    std::fs::write(&p, contents).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance { command: "test".into(), config_hash: sha256_hex(""), seed: 7 }
    }

    #[test]
    fn numbers_round_trip() {
        for v in [1.0, -2.5e-17, 6.02214076e23, std::f64::consts::PI, 0.1 + 0.2] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(num(f64::INFINITY), "nan");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&[("t", "s"), ("n", "1")]);
        t.push(vec![0.0, 1.5]);
        t.push(vec![1e-6, f64::NAN]);
        let s = t.render(&prov());
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.iter().filter(|l| l.starts_with('#')).count(), 5);
        assert_eq!(lines[5], "t,n");
        assert_eq!(lines[6], "0e0,1.5e0");
        assert_eq!(lines[7], "1e-6,nan");
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn report_parses_back() {
        let mut r = Report::default();
        r.num("g_hz", 2600.5);
        r.text("converged", true);
        let back = parse_report(&r.render(&prov()));
        assert_eq!(back, vec![("g_hz".into(), "2.6005e3".into()), ("converged".into(), "true".into())]);
    }
}
