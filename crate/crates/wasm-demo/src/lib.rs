//! Browser demo: a planar target tracked by range and bearing sensors placed on a
//! ring. Three operations are exported to JavaScript, each returning JSON:
//!
//! * `plan`: greedy and random schedules for one budget, with per-pick gains;
//! * `budget_curve`: conditional entropy against the per-step budget;
//! * `certify`: greedy against full enumeration on a small instance.
//!
//! The pure-Rust functions behind them are public so they can be tested natively.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use sensched_core::exhaustive::certify_bound;
use sensched_core::nalgebra::{DMatrix, DVector};
use sensched_core::process_models::build_tracking_prior;
use sensched_core::scheduler::{greedy_schedule, random_schedule};
use sensched_core::sensing::builtin_sensor;
use sensched_core::{BoundCertificate, EnumerationOptions, GreedyOptions, OracleContext, SensorKind, SensorSuite};

/// Demo instance parameters.
#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub seed: u32,
    pub horizon: usize,
    pub sensors: usize,
    pub budget: usize,
    /// Correlation between neighboring steps of the prior.
    pub corr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensorInfo {
    pub kind: &'static str,
    pub anchor: [f64; 2],
    pub noise_var: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleInfo {
    pub sets: Vec<Vec<usize>>,
    pub entropy: f64,
    pub mutual_info: f64,
    pub oracle_calls: usize,
    /// Gain of each pick, per step, in pick order.
    pub gains: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Plan {
    pub sensors: Vec<SensorInfo>,
    /// Prior mean position at each step.
    pub track: Vec<[f64; 2]>,
    pub prior_entropy: f64,
    pub greedy: ScheduleInfo,
    pub lazy_calls: usize,
    pub random: ScheduleInfo,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub budget: usize,
    pub greedy: f64,
    /// Mean over 20 random schedules.
    pub random: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub greedy: f64,
    pub opt: f64,
    pub max: f64,
    /// `(greedy - OPT) / (MAX - OPT)`, or `None` when `MAX == OPT`.
    pub ratio: Option<f64>,
    pub within_half: bool,
    pub enumerated: usize,
    pub greedy_sets: Vec<Vec<usize>>,
    pub opt_sets: Vec<Vec<usize>>,
}

fn check(p: &Params) -> Result<(), String> {
    if p.horizon == 0 || p.sensors == 0 {
        return Err("horizon and sensor count must be positive".into());
    }
    if p.budget > p.sensors {
        return Err(format!("budget {} exceeds {} sensors", p.budget, p.sensors));
    }
    Ok(())
}

/// The target moves left to right along a gentle arc.
fn track(horizon: usize) -> Vec<[f64; 2]> {
    (0..horizon)
        .map(|k| {
            let t = if horizon == 1 { 0.5 } else { k as f64 / (horizon - 1) as f64 };
            [-6.0 + 12.0 * t, 2.0 * (TAU * 0.5 * t).sin() - 1.0]
        })
        .collect()
}

type Built = (OracleContext, Vec<SensorInfo>, Vec<[f64; 2]>);

fn build(p: &Params) -> Result<Built, String> {
    check(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(p.seed));
    let path = track(p.horizon);
    let mean = DVector::from_iterator(2 * p.horizon, path.iter().flatten().copied());
    let prior = build_tracking_prior(2, p.horizon, 4.0, p.corr)
        .and_then(|pr| pr.with_mean(mean))
        .map_err(|e| e.to_string())?;
    let mut infos = Vec::new();
    let mut sensors = Vec::new();
    for i in 0..p.sensors {
        let angle = TAU * (i as f64 + rng.random::<f64>() * 0.5) / p.sensors as f64;
        let radius = 8.0 + 2.0 * rng.random::<f64>();
        let anchor = [radius * angle.cos(), radius * angle.sin()];
        let (kind, noise_var) = if i % 2 == 0 {
            (SensorKind::Range { anchor: DVector::from_column_slice(&anchor) }, 0.05 + rng.random::<f64>())
        } else {
            (SensorKind::Bearing { anchor, state_dim: 2 }, 0.002 + 0.02 * rng.random::<f64>())
        };
        infos.push(SensorInfo {
            kind: kind.name(),
            anchor,
            noise_var,
        });
        sensors.push(builtin_sensor(kind, DMatrix::from_element(1, 1, noise_var)).map_err(|e| e.to_string())?);
    }
    let suite = SensorSuite::new(sensors).map_err(|e| e.to_string())?;
    let ctx = OracleContext::new(prior, suite).map_err(|e| e.to_string())?;
    Ok((ctx, infos, path))
}

pub fn plan_demo(p: &Params) -> Result<Plan, String> {
    let (ctx, sensors, track) = build(p)?;
    let budgets = vec![p.budget; p.horizon];
    let opts = GreedyOptions::default();
    let (schedule, trace) = greedy_schedule(&ctx, &budgets, opts).map_err(|e| e.to_string())?;
    let (_, lazy) = greedy_schedule(&ctx, &budgets, GreedyOptions::lazy()).map_err(|e| e.to_string())?;
    let h = ctx.conditional_entropy(schedule.sets()).map_err(|e| e.to_string())?;
    let rand = random_schedule(&budgets, p.sensors, u64::from(p.seed)).map_err(|e| e.to_string())?;
    let hr = ctx.conditional_entropy(rand.sets()).map_err(|e| e.to_string())?;
    let h0 = ctx.prior_entropy();
    Ok(Plan {
        sensors,
        track,
        prior_entropy: h0,
        greedy: ScheduleInfo {
            sets: schedule.sets().to_vec(),
            entropy: h,
            mutual_info: h0 - h,
            oracle_calls: trace.oracle_calls(),
            gains: trace.steps.iter().map(|s| s.picks.iter().map(|p| p.gain).collect()).collect(),
        },
        lazy_calls: lazy.oracle_calls(),
        random: ScheduleInfo {
            sets: rand.sets().to_vec(),
            entropy: hr,
            mutual_info: h0 - hr,
            oracle_calls: 0,
            gains: vec![],
        },
    })
}

pub fn budget_curve_demo(p: &Params) -> Result<Vec<CurvePoint>, String> {
    let (ctx, _, _) = build(p)?;
    (0..=p.sensors)
        .map(|b| {
            let budgets = vec![b; p.horizon];
            let (schedule, _) = greedy_schedule(&ctx, &budgets, GreedyOptions::default()).map_err(|e| e.to_string())?;
            let greedy = ctx.conditional_entropy(schedule.sets()).map_err(|e| e.to_string())?;
            let mut total = 0.0;
            for r in 0..20u64 {
                let s = random_schedule(&budgets, p.sensors, u64::from(p.seed) * 1000 + r).map_err(|e| e.to_string())?;
                total += ctx.conditional_entropy(s.sets()).map_err(|e| e.to_string())?;
            }
            Ok(CurvePoint {
                budget: b,
                greedy,
                random: total / 20.0,
            })
        })
        .collect()
}

/// Enumeration is capped at 200 000 schedules to keep the page responsive.
pub fn certify_demo(p: &Params) -> Result<Certificate, String> {
    let (ctx, _, _) = build(p)?;
    let budgets = vec![p.budget; p.horizon];
    let (schedule, _) = greedy_schedule(&ctx, &budgets, GreedyOptions::default()).map_err(|e| e.to_string())?;
    let h = ctx.conditional_entropy(schedule.sets()).map_err(|e| e.to_string())?;
    let opts = EnumerationOptions {
        cap: 200_000,
        ..EnumerationOptions::default()
    };
    let (cert, res) = certify_bound(&ctx, &budgets, h, opts).map_err(|e| e.to_string())?;
    Ok(Certificate {
        greedy: h,
        opt: res.opt_cost,
        max: res.max_cost,
        ratio: match cert {
            BoundCertificate::Ratio(r) => Some(r),
            _ => None,
        },
        within_half: cert.within(0.5),
        enumerated: res.num_enumerated,
        greedy_sets: schedule.sets().to_vec(),
        opt_sets: res.opt_schedule.sets().to_vec(),
    })
}

fn params(seed: u32, horizon: u32, sensors: u32, budget: u32, corr: f64) -> Params {
    Params {
        seed,
        horizon: horizon as usize,
        sensors: sensors as usize,
        budget: budget as usize,
        corr,
    }
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn plan(seed: u32, horizon: u32, sensors: u32, budget: u32, corr: f64) -> Result<String, JsError> {
    to_json(plan_demo(&params(seed, horizon, sensors, budget, corr)))
}

#[wasm_bindgen]
pub fn budget_curve(seed: u32, horizon: u32, sensors: u32, corr: f64) -> Result<String, JsError> {
    to_json(budget_curve_demo(&params(seed, horizon, sensors, 0, corr)))
}

#[wasm_bindgen]
pub fn certify(seed: u32, horizon: u32, sensors: u32, budget: u32, corr: f64) -> Result<String, JsError> {
    to_json(certify_demo(&params(seed, horizon, sensors, budget, corr)))
}
