//! Greedy sensor scheduling.
//!
//! [`greedy_schedule`] walks the horizon one step at a time. At step `k` it holds the
//! sets already chosen for steps `1..k` fixed, leaves later steps empty, and grows the
//! step-`k` set one sensor at a time by largest marginal entropy decrease
//!
//! ```text
//! rho_i(S) = H(S_{1:k-1}, S) - H(S_{1:k-1}, S + {i})
//! ```
//!
//! until the budget `s_k` is met. Ties go to the lowest sensor index.
//!
//! The lazy variant keeps stale gains in a max-heap and refreshes only the top
//! candidate. Because the entropy is supermodular in the selection, a stale gain never
//! underestimates the current one, so lazy and eager greedy pick the same sensors.
//!
//! Oracle-call accounting: an eager step scans every remaining candidate once per pick,
//! so it makes at most `s_k * m` evaluations (the base value `H(S_{1:k-1}, S)` is
//! carried over from the previous pick rather than recomputed). This is `s_k * m`, not
//! `s_k^2`, whenever the ground set is larger than the budget.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Duration;

use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy_oracle::{map_linearization, EntropyObjective, OracleContext};
use crate::error::{Error, Result};
use crate::process_models::GaussianPrior;
use crate::sensing::{Schedule, SensorSuite};
use crate::timing::Stopwatch;

/// Computed gains in `[-GAIN_TOL, 0]` are treated as zero; anything below is an error.
pub const GAIN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyOptions {
    /// Use lazy evaluations.
    pub lazy: bool,
    /// Stop filling a step once no candidate has positive gain.
    pub stop_at_zero_gain: bool,
    /// Evaluate eager candidates in parallel (needs the `parallel` feature).
    pub parallel: bool,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            lazy: false,
            stop_at_zero_gain: true,
            parallel: true,
        }
    }
}

impl GreedyOptions {
    pub fn lazy() -> Self {
        Self {
            lazy: true,
            ..Self::default()
        }
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }
}

/// One greedy pick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub sensor: usize,
    /// Entropy decrease in nats, after clamping numerical noise to zero.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub step: usize,
    pub picks: Vec<Pick>,
    pub oracle_calls: usize,
    pub elapsed: Duration,
    /// `H(S_{1:k})` after the step's picks.
    pub entropy_after: f64,
}

impl StepTrace {
    /// Selected sensors in ascending index order.
    pub fn selected(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.picks.iter().map(|p| p.sensor).collect();
        s.sort_unstable();
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GreedyTrace {
    pub steps: Vec<StepTrace>,
}

impl GreedyTrace {
    pub fn oracle_calls(&self) -> usize {
        self.steps.iter().map(|s| s.oracle_calls).sum()
    }

    pub fn elapsed(&self) -> Duration {
        self.steps.iter().map(|s| s.elapsed).sum()
    }

    /// Final entropy, or `None` for an empty horizon.
    pub fn final_entropy(&self) -> Option<f64> {
        self.steps.last().map(|s| s.entropy_after)
    }
}

fn check_budgets(budgets: &[usize], m: usize, horizon: usize) -> Result<()> {
    if budgets.len() != horizon {
        return Err(Error::InvalidParams(format!(
            "{} budgets for a horizon of {horizon}",
            budgets.len()
        )));
    }
    if let Some((k, b)) = budgets.iter().enumerate().find(|(_, &b)| b > m) {
        return Err(Error::InvalidParams(format!(
            "budget {b} at step {k} exceeds the {m} available sensors"
        )));
    }
    Ok(())
}

/// Runs the per-step greedy over the whole horizon.
pub fn greedy_schedule<O: EntropyObjective + ?Sized>(
    obj: &O,
    budgets: &[usize],
    opts: GreedyOptions,
) -> Result<(Schedule, GreedyTrace)> {
    let horizon = obj.horizon();
    check_budgets(budgets, obj.num_sensors(), horizon)?;
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(horizon);
    let mut trace = GreedyTrace::default();
    let mut base = obj.empty_value();
    for (k, &budget) in budgets.iter().enumerate() {
        let step = greedy_step_from(obj, &sets, k, budget, base, opts)?;
        base = step.entropy_after;
        sets.push(step.selected());
        trace.steps.push(step);
    }
    Ok((Schedule::new(sets, budgets.to_vec())?, trace))
}

/// Eager greedy for step `k` given the sets of steps `0..k`. Evaluates the prefix once
/// to get the base value (no oracle call when the prefix is empty).
pub fn greedy_step<O: EntropyObjective + ?Sized>(
    obj: &O,
    prefix: &[Vec<usize>],
    k: usize,
    budget: usize,
    opts: GreedyOptions,
) -> Result<StepTrace> {
    run_step(obj, prefix, k, budget, GreedyOptions { lazy: false, ..opts })
}

/// Lazy greedy for step `k`; same result as [`greedy_step`].
pub fn lazy_greedy_step<O: EntropyObjective + ?Sized>(
    obj: &O,
    prefix: &[Vec<usize>],
    k: usize,
    budget: usize,
    opts: GreedyOptions,
) -> Result<StepTrace> {
    run_step(obj, prefix, k, budget, GreedyOptions { lazy: true, ..opts })
}

fn run_step<O: EntropyObjective + ?Sized>(
    obj: &O,
    prefix: &[Vec<usize>],
    k: usize,
    budget: usize,
    opts: GreedyOptions,
) -> Result<StepTrace> {
    if prefix.iter().all(Vec::is_empty) {
        check_prefix(obj, prefix, k)?;
        return greedy_step_from(obj, prefix, k, budget, obj.empty_value(), opts);
    }
    let sets = padded(obj, prefix, k)?;
    let base = obj.evaluate(&sets)?;
    let mut step = greedy_step_from(obj, prefix, k, budget, base, opts)?;
    step.oracle_calls += 1;
    Ok(step)
}

fn check_prefix<O: EntropyObjective + ?Sized>(obj: &O, prefix: &[Vec<usize>], k: usize) -> Result<()> {
    if prefix.len() != k || k >= obj.horizon() {
        return Err(Error::InvalidParams(format!(
            "step {k} needs a prefix of {k} sets within a horizon of {}, got {}",
            obj.horizon(),
            prefix.len()
        )));
    }
    Ok(())
}

fn padded<O: EntropyObjective + ?Sized>(obj: &O, prefix: &[Vec<usize>], k: usize) -> Result<Vec<Vec<usize>>> {
    check_prefix(obj, prefix, k)?;
    let mut sets = prefix.to_vec();
    sets.resize(obj.horizon(), Vec::new());
    Ok(sets)
}

fn insert_sorted(set: &[usize], i: usize) -> Vec<usize> {
    let mut s = Vec::with_capacity(set.len() + 1);
    s.extend_from_slice(set);
    let pos = s.partition_point(|&x| x < i);
    s.insert(pos, i);
    s
}

/// Shared step driver; `base` must equal `H(prefix)`.
pub(crate) fn greedy_step_from<O: EntropyObjective + ?Sized>(
    obj: &O,
    prefix: &[Vec<usize>],
    k: usize,
    budget: usize,
    base: f64,
    opts: GreedyOptions,
) -> Result<StepTrace> {
    let mut sets = padded(obj, prefix, k)?;
    if budget > obj.num_sensors() {
        return Err(Error::InvalidParams(format!(
            "budget {budget} exceeds the {} available sensors",
            obj.num_sensors()
        )));
    }
    let clock = Stopwatch::start();
    let mut state = StepState {
        base,
        calls: 0,
        picks: Vec::new(),
    };
    if opts.lazy {
        lazy_fill(obj, &mut sets, k, budget, opts, &mut state)?;
    } else {
        eager_fill(obj, &mut sets, k, budget, opts, &mut state)?;
    }
    Ok(StepTrace {
        step: k,
        picks: state.picks,
        oracle_calls: state.calls,
        elapsed: clock.elapsed(),
        entropy_after: state.base,
    })
}

struct StepState {
    base: f64,
    calls: usize,
    picks: Vec<Pick>,
}

impl StepState {
    /// Accepts or rejects the best candidate of a round. Returns `false` to stop.
    fn admit(&mut self, k: usize, sensor: usize, raw_gain: f64, value: f64, opts: GreedyOptions) -> Result<bool> {
        if raw_gain < -GAIN_TOL {
            return Err(Error::OracleInconsistency { step: k, gain: raw_gain });
        }
        let gain = raw_gain.max(0.0);
        if opts.stop_at_zero_gain && gain <= 0.0 {
            return Ok(false);
        }
        self.picks.push(Pick { sensor, gain });
        self.base = value;
        Ok(true)
    }
}

fn evaluate_candidates<O: EntropyObjective + ?Sized>(
    obj: &O,
    sets: &[Vec<usize>],
    k: usize,
    candidates: &[usize],
    parallel: bool,
) -> Result<Vec<f64>> {
    let eval = |&i: &usize| {
        let mut trial = sets.to_vec();
        trial[k] = insert_sorted(&sets[k], i);
        obj.evaluate(&trial)
    };
    #[cfg(feature = "parallel")]
    if parallel && candidates.len() > 1 {
        use rayon::prelude::*;
        return candidates.par_iter().map(eval).collect();
    }
    let _ = parallel;
    candidates.iter().map(eval).collect()
}

fn eager_fill<O: EntropyObjective + ?Sized>(
    obj: &O,
    sets: &mut [Vec<usize>],
    k: usize,
    budget: usize,
    opts: GreedyOptions,
    state: &mut StepState,
) -> Result<()> {
    let mut remaining: Vec<usize> = (0..obj.num_sensors()).collect();
    while !remaining.is_empty() && sets[k].len() < budget {
        let values = evaluate_candidates(obj, sets, k, &remaining, opts.parallel)?;
        state.calls += values.len();
        // argmax of gain == argmin of value; strict comparison keeps the lowest index.
        let mut best = 0;
        for (j, v) in values.iter().enumerate().skip(1) {
            if *v < values[best] {
                best = j;
            }
        }
        let sensor = remaining[best];
        // Algorithm step "skip candidates that would overflow the budget": every
        // candidate is a single sensor and the loop guard keeps |S| < s_k, so this
        // branch cannot fire.
        if sets[k].len() + 1 > budget {
            remaining.remove(best);
            continue;
        }
        if !state.admit(k, sensor, state.base - values[best], values[best], opts)? {
            break;
        }
        sets[k] = insert_sorted(&sets[k], sensor);
        remaining.remove(best);
    }
    Ok(())
}

/// Heap entry: stale or fresh gain of a candidate. Max gain first, then lowest index.
#[derive(Debug, Clone, Copy)]
struct Bound {
    gain: f64,
    value: f64,
    sensor: usize,
    round: usize,
}

impl PartialEq for Bound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Bound {}
impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.sensor.cmp(&self.sensor))
    }
}

fn lazy_fill<O: EntropyObjective + ?Sized>(
    obj: &O,
    sets: &mut [Vec<usize>],
    k: usize,
    budget: usize,
    opts: GreedyOptions,
    state: &mut StepState,
) -> Result<()> {
    let mut heap: BinaryHeap<Bound> = (0..obj.num_sensors())
        .map(|sensor| Bound {
            gain: f64::INFINITY,
            value: f64::NAN,
            sensor,
            round: usize::MAX,
        })
        .collect();
    let mut round = 0;
    while sets[k].len() < budget {
        let Some(top) = heap.pop() else { break };
        if top.round != round {
            let mut trial = sets.to_vec();
            trial[k] = insert_sorted(&sets[k], top.sensor);
            let value = obj.evaluate(&trial)?;
            state.calls += 1;
            heap.push(Bound {
                gain: state.base - value,
                value,
                sensor: top.sensor,
                round,
            });
            continue;
        }
        if !state.admit(k, top.sensor, top.gain, top.value, opts)? {
            break;
        }
        sets[k] = insert_sorted(&sets[k], top.sensor);
        round += 1;
    }
    Ok(())
}

/// Uniformly random `s_k`-subsets per step, reproducible from `seed`.
pub fn random_schedule(budgets: &[usize], m: usize, seed: u64) -> Result<Schedule> {
    check_budgets(budgets, m, budgets.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets = budgets
        .iter()
        .map(|&b| index::sample(&mut rng, m, b).into_vec())
        .collect();
    Schedule::new(sets, budgets.to_vec())
}

/// Result of [`receding_greedy_schedule`].
#[derive(Debug, Clone)]
pub struct RecedingOutcome {
    pub schedule: Schedule,
    pub trace: GreedyTrace,
    /// Simulated true batch state.
    pub truth: nalgebra::DVector<f64>,
    /// Simulated measurements, stacked per step in ascending sensor order.
    pub measurements: Vec<nalgebra::DVector<f64>>,
    /// Linearization point used at each step.
    pub linearizations: Vec<nalgebra::DVector<f64>>,
}

/// Greedy scheduling with re-linearization: before planning step `k`, measurements of
/// the steps already scheduled are simulated from a state drawn from the prior, and
/// the sensors are re-linearized at the MAP estimate given those measurements.
pub fn receding_greedy_schedule<R: Rng + ?Sized>(
    prior: &GaussianPrior,
    suite: &SensorSuite,
    budgets: &[usize],
    opts: GreedyOptions,
    rng: &mut R,
) -> Result<RecedingOutcome> {
    let horizon = prior.horizon();
    check_budgets(budgets, suite.len(), horizon)?;
    let n = prior.state_dim();
    let truth = prior.sample(rng)?;
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(horizon);
    let mut measurements: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(horizon);
    let mut linearizations = Vec::with_capacity(horizon);
    let mut trace = GreedyTrace::default();
    for (k, &budget) in budgets.iter().enumerate() {
        let mut past = sets.clone();
        past.resize(horizon, Vec::new());
        let mut y = measurements.clone();
        y.resize(horizon, nalgebra::DVector::zeros(0));
        let est = map_linearization(prior, suite, &past, Some(&y))?;
        let ctx = OracleContext::with_linearization(prior.clone(), suite.clone(), est.mean.clone())?;
        let base = if k == 0 { ctx.prior_entropy() } else { ctx.conditional_entropy(&past)? };
        let mut step = greedy_step_from(&ctx, &sets, k, budget, base, opts)?;
        if k > 0 {
            step.oracle_calls += 1;
        }
        let chosen = step.selected();
        let xk = truth.rows(k * n, n);
        let mut yk = Vec::new();
        for &i in &chosen {
            let sensor = suite.get(i);
            let clean = sensor.measure(xk)?;
            let noise = sample_gaussian(sensor.noise_at(k), rng)?;
            yk.extend((clean + noise).iter().copied());
        }
        measurements.push(nalgebra::DVector::from_vec(yk));
        linearizations.push(est.mean);
        sets.push(chosen);
        trace.steps.push(step);
    }
    Ok(RecedingOutcome {
        schedule: Schedule::new(sets, budgets.to_vec())?,
        trace,
        truth,
        measurements,
        linearizations,
    })
}

fn sample_gaussian<R: Rng + ?Sized>(cov: &nalgebra::DMatrix<f64>, rng: &mut R) -> Result<nalgebra::DVector<f64>> {
    let chol = nalgebra::Cholesky::new(cov.clone()).ok_or_else(Error::not_pd)?;
    let z = nalgebra::DVector::from_fn(cov.nrows(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    Ok(chol.l() * z)
}
