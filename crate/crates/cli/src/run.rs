//! The `run` verb: every configured scheduler on one scenario.

use std::path::Path;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sensched_core::exhaustive::exhaustive_optimum;
use sensched_core::scheduler::{greedy_schedule, random_schedule, receding_greedy_schedule};
use sensched_core::timing::Stopwatch;
use sensched_core::{
    BoundCertificate, EnumerationMode, EnumerationOptions, EnumerationResult, GreedyOptions, GreedyTrace,
    OracleContext, Schedule,
};

use crate::config::{child_seed, streams, EnumerationModeSpec, Instance, Linearization, Scenario, SchedulerKind};
use crate::error::{Context, Result};
use crate::fmt::g12;
use crate::output::{self, schedule_cell, write_csv};

/// One scheduler's result. Entropies are scored at the prior mean so every scheduler
/// is judged by the same objective.
#[derive(Debug, Clone)]
pub struct SchedulerOutcome {
    pub scheduler: SchedulerKind,
    pub schedule: Schedule,
    pub entropy: f64,
    pub mutual_info: f64,
    pub oracle_calls: usize,
    pub trace: Option<GreedyTrace>,
    pub bound: Option<BoundCertificate>,
    /// Wall-clock time of each repetition.
    pub walls: Vec<Duration>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcomes: Vec<SchedulerOutcome>,
    pub enumeration: Option<EnumerationResult>,
}

pub fn enumeration_options(scn: &Scenario) -> EnumerationOptions {
    EnumerationOptions {
        mode: match scn.certify.mode {
            EnumerationModeSpec::UpToBudget => EnumerationMode::UpToBudget,
            EnumerationModeSpec::ExactBudget => EnumerationMode::ExactBudget,
        },
        cap: u128::from(scn.certify.cap),
        keep_table: scn.certify.table,
        parallel: true,
    }
}

struct Single {
    schedule: Schedule,
    oracle_calls: usize,
    trace: Option<GreedyTrace>,
    enumeration: Option<EnumerationResult>,
}

fn run_once(scn: &Scenario, inst: &Instance, ctx: &OracleContext, kind: SchedulerKind) -> Result<Single> {
    let greedy_opts = |lazy: bool| GreedyOptions {
        lazy,
        stop_at_zero_gain: scn.modes.stop_at_zero_gain,
        parallel: true,
    };
    let stage = || format!("scheduler `{}`", kind.name());
    match kind {
        SchedulerKind::Greedy | SchedulerKind::Lazy => {
            let lazy = kind == SchedulerKind::Lazy;
            let (schedule, trace) = match scn.modes.linearization {
                Linearization::PriorMean => greedy_schedule(ctx, &inst.budgets, greedy_opts(lazy)).context(stage)?,
                Linearization::Receding => {
                    let stream = if lazy { streams::RECEDING_LAZY } else { streams::RECEDING_GREEDY };
                    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(scn.seed, stream));
                    let out = receding_greedy_schedule(&inst.prior, &inst.suite, &inst.budgets, greedy_opts(lazy), &mut rng)
                        .context(stage)?;
                    (out.schedule, out.trace)
                }
            };
            Ok(Single {
                schedule,
                oracle_calls: trace.oracle_calls(),
                trace: Some(trace),
                enumeration: None,
            })
        }
        SchedulerKind::Random => Ok(Single {
            schedule: random_schedule(
                &inst.budgets,
                inst.suite.len(),
                child_seed(scn.seed, streams::RANDOM_SCHEDULE),
            )
            .context(stage)?,
            oracle_calls: 0,
            trace: None,
            enumeration: None,
        }),
        SchedulerKind::Exhaustive => {
            let res = exhaustive_optimum(ctx, &inst.budgets, enumeration_options(scn)).context(stage)?;
            Ok(Single {
                schedule: res.opt_schedule.clone(),
                oracle_calls: res.num_enumerated,
                trace: None,
                enumeration: Some(res),
            })
        }
    }
}

pub fn run_scenario(scn: &Scenario) -> Result<RunReport> {
    let inst = scn.build()?;
    let ctx = OracleContext::new(inst.prior.clone(), inst.suite.clone())
        .context(|| "linearizing at the prior mean".into())?;
    let mut outcomes = Vec::new();
    let mut enumeration = None;
    for &kind in &scn.modes.schedulers {
        let mut walls = Vec::with_capacity(scn.reps());
        let mut first = None;
        for _ in 0..scn.reps() {
            let clock = Stopwatch::start();
            let single = run_once(scn, &inst, &ctx, kind)?;
            walls.push(clock.elapsed());
            first.get_or_insert(single);
        }
        let single = first.expect("at least one repetition");
        let entropy = ctx
            .conditional_entropy(single.schedule.sets())
            .context(|| format!("scoring `{}`", kind.name()))?;
        if single.enumeration.is_some() {
            enumeration = single.enumeration;
        }
        outcomes.push(SchedulerOutcome {
            scheduler: kind,
            schedule: single.schedule,
            entropy,
            mutual_info: ctx.prior_entropy() - entropy,
            oracle_calls: single.oracle_calls,
            trace: single.trace,
            bound: None,
            walls,
        });
    }
    if let Some(res) = &enumeration {
        for o in &mut outcomes {
            o.bound = Some(BoundCertificate::from_costs(o.entropy, res.opt_cost, res.max_cost));
        }
    }
    Ok(RunReport { outcomes, enumeration })
}

pub fn certificate_cell(c: &BoundCertificate) -> String {
    match c {
        BoundCertificate::Ratio(r) => g12(*r),
        BoundCertificate::CertifiedEqual => "certified_equal".into(),
        BoundCertificate::DegenerateMismatch { .. } => "degenerate_mismatch".into(),
    }
}

pub fn write_run(report: &RunReport, scn: &Scenario, dir: &Path) -> Result<()> {
    output::ensure_dir(dir)?;
    let results: Vec<Vec<String>> = report
        .outcomes
        .iter()
        .map(|o| {
            vec![
                o.scheduler.name().into(),
                g12(o.entropy),
                g12(o.mutual_info),
                o.oracle_calls.to_string(),
                o.bound.as_ref().map(certificate_cell).unwrap_or_default(),
                schedule_cell(o.schedule.sets()),
            ]
        })
        .collect();
    write_csv(
        dir,
        output::RESULTS,
        &["scheduler", "entropy_nats", "mutual_info_nats", "oracle_calls", "bound_ratio", "schedule"],
        &results,
    )?;

    let mut trace = Vec::new();
    for o in &report.outcomes {
        let Some(t) = &o.trace else { continue };
        for step in &t.steps {
            for (order, pick) in step.picks.iter().enumerate() {
                trace.push(vec![
                    o.scheduler.name().into(),
                    step.step.to_string(),
                    order.to_string(),
                    pick.sensor.to_string(),
                    g12(pick.gain),
                ]);
            }
        }
    }
    write_csv(dir, output::TRACE, &["scheduler", "k", "pick_order", "sensor", "gain_nats"], &trace)?;

    let timings: Vec<Vec<String>> = report
        .outcomes
        .iter()
        .flat_map(|o| {
            o.walls.iter().enumerate().map(move |(rep, w)| {
                vec![
                    o.scheduler.name().into(),
                    rep.to_string(),
                    output::millis(*w),
                    o.oracle_calls.to_string(),
                ]
            })
        })
        .collect();
    write_csv(dir, output::TIMINGS, &["scheduler", "rep", "wall_ms", "oracle_calls"], &timings)?;
    output::write_manifest(dir, scn)
}
