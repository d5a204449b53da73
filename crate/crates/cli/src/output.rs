//! CSV and manifest writers.

use std::fs;
use std::path::Path;

use crate::config::Scenario;
use crate::error::{CliError, Result};

pub const RESULTS: &str = "results.csv";
pub const TRACE: &str = "trace.csv";
pub const TIMINGS: &str = "timings.csv";
pub const MANIFEST: &str = "manifest.toml";
pub const BENCH_SUMMARY: &str = "bench_summary.csv";
pub const CERTIFICATE: &str = "certificate.csv";
pub const FULL_TABLE: &str = "full_table.csv";

pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let path = dir.join(name);
    let err = |source| CliError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Writes the resolved scenario; it parses back as a config that reproduces the run.
pub fn write_manifest(dir: &Path, scenario: &Scenario) -> Result<()> {
    let body = scenario.to_toml()?;
    let text = format!("# Resolved scenario. Re-run with: sensched <verb> --config {MANIFEST}\n{body}");
    let path = dir.join(MANIFEST);
    fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

/// Sensor sets per step as `0 2|1|`.
pub fn schedule_cell(sets: &[Vec<usize>]) -> String {
    sets.iter()
        .map(|s| s.iter().map(usize::to_string).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("|")
}

pub fn millis(d: std::time::Duration) -> String {
    crate::fmt::g12(d.as_secs_f64() * 1e3)
}
