//! CSV reports, pass/fail checks and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

/// Scientific notation with 16 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.15e}")
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Files and checks produced by one subcommand.
pub struct Report {
    dir: PathBuf,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            checks: Vec::new(),
        })
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn print_checks(&self, out: &mut impl Write) -> io::Result<()> {
        for c in &self.checks {
            writeln!(
                out,
                "{} {}: {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

pub struct Manifest {
    pub subcommand: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub threads: Option<usize>,
    pub status: &'static str,
    pub error: Option<String>,
    pub elapsed_seconds: f64,
}

pub fn write_manifest(dir: &Path, m: &Manifest, report: Option<&Report>) -> io::Result<()> {
    let checks: Vec<Value> = report
        .map(|r| {
            r.checks
                .iter()
                .map(|c| json!({"name": c.name, "pass": c.pass, "detail": c.detail}))
                .collect()
        })
        .unwrap_or_default();
    let files = report.map(|r| r.files.clone()).unwrap_or_default();
    let doc = json!({
        "tool": "flowplate",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": m.subcommand,
        "status": m.status,
        "error": m.error,
        "seed": m.seed,
        "deterministic": m.deterministic,
        "threads": m.threads,
        "elapsed_seconds": m.elapsed_seconds,
        "config": m.config,
        "checks": checks,
        "files": files,
    });
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&doc)? + "\n",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_sixteen_digits() {
        assert_eq!(num(0.1), "1.000000000000000e-1");
        let x = 1.0 / 3.0;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new(dir.path()).unwrap();
        r.csv("a.csv", &["t", "x"], &[vec!["0".into(), num(1.5)]])
            .unwrap();
        let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "t,x\n0,1.500000000000000e0\n");
        assert_eq!(r.files, vec!["a.csv"]);
    }
}
