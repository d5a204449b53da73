//! Scenario-driven harness around `sensched-core`.
//!
//! Three verbs share one scenario format ([`config::Scenario`]):
//!
//! * `run` executes the configured schedulers and writes `results.csv`, `trace.csv`,
//!   `timings.csv` and `manifest.toml`;
//! * `bench` sweeps the horizon and times oracle calls on the sparse and densified
//!   prior, writing `timings.csv` and `bench_summary.csv`;
//! * `certify` enumerates every schedule and certifies the greedy ratio, writing
//!   `certificate.csv` (and `full_table.csv` on request).
//!
//! Results and traces depend only on the scenario; wall-clock numbers go to
//! `timings.csv` alone.

pub mod bench;
pub mod certify;
pub mod config;
mod error;
pub mod fmt;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{Scenario, Verb};
pub use error::{CliError, Result};

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    pub threads: Option<usize>,
}

/// Loads, overrides and resolves a scenario.
pub fn prepare(verb: Verb, config: &Path, overrides: &Overrides) -> Result<Scenario> {
    let mut scn = Scenario::load(config)?;
    if let Some(out) = &overrides.out {
        scn.output.dir = out.display().to_string();
    }
    if let Some(reps) = overrides.reps {
        scn.execution.reps = Some(reps);
    }
    if let Some(threads) = overrides.threads {
        scn.execution.threads = threads;
    }
    scn.resolve(verb)
}

/// Runs `verb` on a resolved scenario and writes its outputs; returns the output directory.
pub fn execute(verb: Verb, scn: &Scenario) -> Result<PathBuf> {
    let dir = PathBuf::from(&scn.output.dir);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(scn.execution.threads)
        .build()
        .map_err(|e| CliError::config("execution.threads", e.to_string()))?;
    pool.install(|| match verb {
        Verb::Run => run::write_run(&run::run_scenario(scn)?, scn, &dir),
        Verb::Bench => bench::write_bench(&bench::run_scaling_benchmark(scn)?, scn, &dir),
        Verb::Certify => certify::write_certify(&certify::certify_scenario(scn)?, scn, &dir),
    })?;
    Ok(dir)
}
