//! The `bench` verb: oracle cost as the horizon grows, with the prior stored
//! sparsely and, optionally, densely.

use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use sensched_core::entropy_oracle::EntropyObjective;
use sensched_core::scheduler::greedy_schedule;
use sensched_core::timing::Stopwatch;
use sensched_core::{GreedyOptions, OracleContext};

use crate::config::Scenario;
use crate::error::{Context, Result};
use crate::fmt::g12;
use crate::output::{self, write_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// The prior in its native block-tridiagonal storage.
    Sparse,
    /// The same prior stored as a full matrix.
    Dense,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Sparse => "sparse",
            Regime::Dense => "dense",
        }
    }
}

/// One greedy run.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub regime: Regime,
    pub horizon: usize,
    pub rep: usize,
    pub wall: Duration,
    pub oracle_calls: usize,
    pub per_call_median: Duration,
}

/// Medians over the repetitions of one (regime, horizon) cell.
#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub regime: Regime,
    pub horizon: usize,
    pub median_wall: Duration,
    pub median_per_call: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<BenchSummary>,
}

impl BenchReport {
    pub fn per_call(&self, regime: Regime, horizon: usize) -> Option<Duration> {
        self.summary
            .iter()
            .find(|s| s.regime == regime && s.horizon == horizon)
            .map(|s| s.median_per_call)
    }
}

/// Records the duration of every evaluation it forwards.
pub struct TimedObjective<'a, O: EntropyObjective + ?Sized> {
    inner: &'a O,
    samples: Mutex<Vec<Duration>>,
}

impl<'a, O: EntropyObjective + ?Sized> TimedObjective<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self {
            inner,
            samples: Mutex::new(Vec::new()),
        }
    }

    pub fn into_samples(self) -> Vec<Duration> {
        self.samples.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

impl<O: EntropyObjective + ?Sized> EntropyObjective for TimedObjective<'_, O> {
    fn num_sensors(&self) -> usize {
        self.inner.num_sensors()
    }
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }
    fn evaluate(&self, sets: &[Vec<usize>]) -> sensched_core::Result<f64> {
        let clock = Stopwatch::start();
        let v = self.inner.evaluate(sets);
        let dt = clock.elapsed();
        self.samples.lock().unwrap_or_else(|e| e.into_inner()).push(dt);
        v
    }
    fn empty_value(&self) -> f64 {
        self.inner.empty_value()
    }
}

pub fn median(xs: &mut [Duration]) -> Duration {
    if xs.is_empty() {
        return Duration::ZERO;
    }
    xs.sort_unstable();
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        (xs[mid - 1] + xs[mid]) / 2
    }
}

/// Times sequential eager greedy for each horizon and regime. Per-call times are
/// medians over every oracle evaluation of a run; the summary takes medians of
/// those over repetitions.
pub fn run_scaling_benchmark(scn: &Scenario) -> Result<BenchReport> {
    let budget = scn.bench.budget.unwrap_or(scn.budget_list()[0]);
    let suite = scn.build_suite()?;
    let opts = GreedyOptions {
        lazy: false,
        stop_at_zero_gain: scn.modes.stop_at_zero_gain,
        parallel: false,
    };
    let mut regimes = vec![Regime::Sparse];
    if scn.bench.densified {
        regimes.push(Regime::Dense);
    }
    let mut report = BenchReport::default();
    for &horizon in &scn.bench.horizons {
        let sparse = scn.prior.with_horizon(horizon)?.build()?;
        let budgets = vec![budget; horizon];
        for &regime in &regimes {
            let prior = match regime {
                Regime::Sparse => sparse.clone(),
                Regime::Dense => sparse.densified(),
            };
            let ctx = OracleContext::new(prior, suite.clone()).context(|| format!("bench K={horizon}"))?;
            let mut walls = Vec::new();
            let mut per_call = Vec::new();
            for rep in 0..scn.reps() {
                let timed = TimedObjective::new(&ctx);
                let clock = Stopwatch::start();
                let (_, trace) = greedy_schedule(&timed, &budgets, opts)
                    .context(|| format!("bench {} K={horizon}", regime.name()))?;
                let wall = clock.elapsed();
                let mut samples = timed.into_samples();
                let med = median(&mut samples);
                report.rows.push(BenchRow {
                    regime,
                    horizon,
                    rep,
                    wall,
                    oracle_calls: trace.oracle_calls(),
                    per_call_median: med,
                });
                walls.push(wall);
                per_call.push(med);
            }
            report.summary.push(BenchSummary {
                regime,
                horizon,
                median_wall: median(&mut walls),
                median_per_call: median(&mut per_call),
            });
        }
    }
    Ok(report)
}

fn micros(d: Duration) -> String {
    g12(d.as_secs_f64() * 1e6)
}

pub fn write_bench(report: &BenchReport, scn: &Scenario, dir: &Path) -> Result<()> {
    output::ensure_dir(dir)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.regime.name().into(),
                r.horizon.to_string(),
                r.rep.to_string(),
                output::millis(r.wall),
                r.oracle_calls.to_string(),
                micros(r.per_call_median),
            ]
        })
        .collect();
    write_csv(
        dir,
        output::TIMINGS,
        &["regime", "horizon", "rep", "wall_ms", "oracle_calls", "per_call_median_us"],
        &rows,
    )?;
    let mut summary = Vec::new();
    for s in &report.summary {
        let previous = report
            .summary
            .iter()
            .filter(|p| p.regime == s.regime && p.horizon < s.horizon)
            .max_by_key(|p| p.horizon);
        let ratio = previous
            .map(|p| g12(s.median_per_call.as_secs_f64() / p.median_per_call.as_secs_f64()))
            .unwrap_or_default();
        summary.push(vec![
            s.regime.name().into(),
            s.horizon.to_string(),
            output::millis(s.median_wall),
            micros(s.median_per_call),
            ratio,
        ]);
    }
    write_csv(
        dir,
        output::BENCH_SUMMARY,
        &["regime", "horizon", "median_wall_ms", "median_per_call_us", "per_call_ratio_to_previous"],
        &summary,
    )?;
    output::write_manifest(dir, scn)
}
