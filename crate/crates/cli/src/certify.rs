//! The `certify` verb: greedy against full enumeration.

use std::path::Path;

use sensched_core::exhaustive::certify_bound;
use sensched_core::scheduler::greedy_schedule;
use sensched_core::timing::Stopwatch;
use sensched_core::{BoundCertificate, EnumerationResult, GreedyOptions, OracleContext, Schedule};

use crate::config::Scenario;
use crate::error::{Context, Result};
use crate::fmt::g12;
use crate::output::{self, schedule_cell, write_csv};
use crate::run::{certificate_cell, enumeration_options};

#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub greedy_schedule: Schedule,
    pub greedy_entropy: f64,
    pub certificate: BoundCertificate,
    pub enumeration: EnumerationResult,
    pub wall: std::time::Duration,
}

pub fn certify_scenario(scn: &Scenario) -> Result<CertifyReport> {
    let inst = scn.build()?;
    let ctx = OracleContext::new(inst.prior, inst.suite).context(|| "linearizing at the prior mean".into())?;
    let clock = Stopwatch::start();
    let opts = GreedyOptions {
        stop_at_zero_gain: scn.modes.stop_at_zero_gain,
        ..GreedyOptions::default()
    };
    let (schedule, _) = greedy_schedule(&ctx, &inst.budgets, opts).context(|| "greedy".into())?;
    let h = ctx.conditional_entropy(schedule.sets()).context(|| "scoring greedy".into())?;
    let (certificate, enumeration) =
        certify_bound(&ctx, &inst.budgets, h, enumeration_options(scn)).context(|| "enumeration".into())?;
    Ok(CertifyReport {
        greedy_schedule: schedule,
        greedy_entropy: h,
        certificate,
        enumeration,
        wall: clock.elapsed(),
    })
}

pub fn write_certify(report: &CertifyReport, scn: &Scenario, dir: &Path) -> Result<()> {
    output::ensure_dir(dir)?;
    let e = &report.enumeration;
    let verdict = if report.certificate.within(0.5) { "pass" } else { "fail" };
    write_csv(
        dir,
        output::CERTIFICATE,
        &[
            "greedy_entropy_nats",
            "opt_entropy_nats",
            "max_entropy_nats",
            "bound_ratio",
            "verdict",
            "num_enumerated",
            "greedy_schedule",
            "opt_schedule",
        ],
        &[vec![
            g12(report.greedy_entropy),
            g12(e.opt_cost),
            g12(e.max_cost),
            certificate_cell(&report.certificate),
            verdict.into(),
            e.num_enumerated.to_string(),
            schedule_cell(report.greedy_schedule.sets()),
            schedule_cell(e.opt_schedule.sets()),
        ]],
    )?;
    if let Some(table) = &e.full_table {
        let rows: Vec<Vec<String>> = table.iter().map(|(s, v)| vec![schedule_cell(s), g12(*v)]).collect();
        write_csv(dir, output::FULL_TABLE, &["schedule", "entropy_nats"], &rows)?;
    }
    write_csv(
        dir,
        output::TIMINGS,
        &["stage", "wall_ms"],
        &[vec!["certify".into(), output::millis(report.wall)]],
    )?;
    output::write_manifest(dir, scn)
}
