//! Scenario files.
//!
//! A scenario is a TOML document. [`Scenario::resolve`] fills every default and
//! expands shorthand (uniform budgets, generated sensors, per-step means, scalar
//! noise) so that the resolved scenario, written back out as the run manifest,
//! reproduces the run exactly.

use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sensched_core::nalgebra::{DMatrix, DVector};
use sensched_core::process_models::{build_gauss_markov_prior, build_tracking_prior};
use sensched_core::sensing::builtin_sensor;
use sensched_core::{GaussianPrior, PriorForm, SensorKind, SensorSuite};

use crate::error::{CliError, Context, Result};

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Root seed; every random component draws from a child stream of it.
    #[serde(default)]
    pub seed: u64,
    pub budgets: Budgets,
    #[serde(default)]
    pub modes: Modes,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub bench: Bench,
    #[serde(default)]
    pub certify: Certify,
    pub prior: PriorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_sensors: Option<GeneratedSensors>,
    #[serde(default)]
    pub sensors: Vec<SensorSpec>,
}

/// `budgets = 2` applies to every step; a list gives one budget per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Budgets {
    Uniform(usize),
    PerStep(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linearization {
    /// Linearize every sensor at the prior mean.
    PriorMean,
    /// Re-linearize at the MAP estimate given simulated measurements before each step.
    Receding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Greedy,
    Lazy,
    Random,
    Exhaustive,
}

impl SchedulerKind {
    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Greedy => "greedy",
            SchedulerKind::Lazy => "lazy",
            SchedulerKind::Random => "random",
            SchedulerKind::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modes {
    #[serde(default = "default_linearization")]
    pub linearization: Linearization,
    #[serde(default = "default_schedulers")]
    pub schedulers: Vec<SchedulerKind>,
    /// Stop filling a step once no sensor lowers the entropy.
    #[serde(default = "yes")]
    pub stop_at_zero_gain: bool,
}

fn default_linearization() -> Linearization {
    Linearization::PriorMean
}

fn default_schedulers() -> Vec<SchedulerKind> {
    vec![SchedulerKind::Greedy]
}

fn yes() -> bool {
    true
}

impl Default for Modes {
    fn default() -> Self {
        Self {
            linearization: default_linearization(),
            schedulers: default_schedulers(),
            stop_at_zero_gain: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Execution {
    /// Timing repetitions; resolves to 1 for `run` and 5 for `bench`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Worker threads; 0 lets the thread pool decide. Never affects results.
    #[serde(default)]
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bench {
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    /// Also time the same scenario with its prior stored densely.
    #[serde(default = "yes")]
    pub densified: bool,
    /// Per-step budget; resolves to the first scenario budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

fn default_horizons() -> Vec<usize> {
    vec![25, 50, 100]
}

impl Default for Bench {
    fn default() -> Self {
        Self {
            horizons: default_horizons(),
            densified: true,
            budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationModeSpec {
    UpToBudget,
    ExactBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certify {
    #[serde(default = "default_mode")]
    pub mode: EnumerationModeSpec,
    #[serde(default = "default_cap")]
    pub cap: u64,
    /// Write every enumerated schedule and its cost.
    #[serde(default)]
    pub table: bool,
}

fn default_mode() -> EnumerationModeSpec {
    EnumerationModeSpec::UpToBudget
}

fn default_cap() -> u64 {
    1_000_000
}

impl Default for Certify {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            cap: default_cap(),
            table: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Block-tridiagonal covariance: `marginal_var * I` on the diagonal,
    /// `neighbor_corr * marginal_var * I` between neighboring steps.
    Tracking {
        state_dim: usize,
        horizon: usize,
        marginal_var: f64,
        neighbor_corr: f64,
        /// Length `n` (repeated at every step) or `n * K`; zero when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
    },
    /// `x_{k+1} = A x_k + w_k`, `w_k ~ N(0, Q)`, `x_1 ~ N(mu0, Sigma0)`.
    GaussMarkov {
        horizon: usize,
        a: Matrix,
        q: Matrix,
        sigma0: Matrix,
        mu0: Vec<f64>,
    },
    /// A full `nK x nK` covariance or precision.
    DenseCustom {
        state_dim: usize,
        horizon: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        precision: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
    },
}

impl PriorSpec {
    pub fn state_dim(&self) -> usize {
        match self {
            PriorSpec::Tracking { state_dim, .. } | PriorSpec::DenseCustom { state_dim, .. } => *state_dim,
            PriorSpec::GaussMarkov { a, .. } => a.len(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            PriorSpec::Tracking { horizon, .. }
            | PriorSpec::GaussMarkov { horizon, .. }
            | PriorSpec::DenseCustom { horizon, .. } => *horizon,
        }
    }

    /// The same process over a different horizon. A tracking mean is replaced by its
    /// first step repeated; dense priors have no natural extension.
    pub fn with_horizon(&self, k: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            PriorSpec::Tracking {
                horizon, mean, state_dim, ..
            } => {
                *horizon = k;
                if let Some(m) = mean.as_mut() {
                    let first: Vec<f64> = m.iter().take(*state_dim).copied().collect();
                    *m = first.repeat(k);
                }
            }
            PriorSpec::GaussMarkov { horizon, .. } => *horizon = k,
            PriorSpec::DenseCustom { .. } => {
                return Err(CliError::config(
                    "prior.kind",
                    "a dense_custom prior cannot be swept over horizons",
                ))
            }
        }
        Ok(out)
    }

    pub fn build(&self) -> Result<GaussianPrior> {
        let n = self.state_dim();
        let horizon = self.horizon();
        match self {
            PriorSpec::Tracking {
                marginal_var,
                neighbor_corr,
                mean,
                ..
            } => {
                let prior = build_tracking_prior(n, horizon, *marginal_var, *neighbor_corr)
                    .context(|| "building the tracking prior".into())?;
                let mean = expand_mean(mean.as_deref(), n, horizon, "prior.mean")?;
                prior.with_mean(mean).context(|| "prior.mean".into())
            }
            PriorSpec::GaussMarkov { a, q, sigma0, mu0, .. } => build_gauss_markov_prior(
                &matrix(a, "prior.a")?,
                &matrix(q, "prior.q")?,
                &matrix(sigma0, "prior.sigma0")?,
                &DVector::from_column_slice(mu0),
                horizon,
            )
            .context(|| "building the Gauss-Markov prior".into()),
            PriorSpec::DenseCustom {
                covariance,
                precision,
                mean,
                ..
            } => {
                let form = match (covariance, precision) {
                    (Some(c), None) => PriorForm::CovarianceDense(matrix(c, "prior.covariance")?),
                    (None, Some(p)) => PriorForm::PrecisionDense(matrix(p, "prior.precision")?),
                    _ => {
                        return Err(CliError::config(
                            "prior",
                            "dense_custom needs exactly one of `covariance` and `precision`",
                        ))
                    }
                };
                let mean = expand_mean(mean.as_deref(), n, horizon, "prior.mean")?;
                GaussianPrior::new(n, horizon, mean, form).context(|| "building the dense prior".into())
            }
        }
    }
}

fn expand_mean(mean: Option<&[f64]>, n: usize, horizon: usize, field: &str) -> Result<DVector<f64>> {
    match mean {
        None => Ok(DVector::zeros(n * horizon)),
        Some(m) if m.len() == n * horizon => Ok(DVector::from_column_slice(m)),
        Some(m) if m.len() == n => Ok(DVector::from_vec(m.repeat(horizon))),
        Some(m) => Err(CliError::config(
            field,
            format!("length {} is neither n = {n} nor n*K = {}", m.len(), n * horizon),
        )),
    }
}

/// Row-major nested list to a matrix.
pub fn matrix(rows: &Matrix, field: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(CliError::config(field, "matrix must be non-empty"));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != c) {
        return Err(CliError::config(
            field,
            format!("row {i} has {} entries, row 0 has {c}", rows[i].len()),
        ));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn nested(m: &DMatrix<f64>) -> Matrix {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Random sensors drawn from the scenario seed, expanded into `sensors` on resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedSensors {
    pub count: usize,
    #[serde(default = "default_noise_range")]
    pub noise_var: [f64; 2],
    /// Anchors of range and bearing sensors are drawn with this spread.
    #[serde(default = "default_spread")]
    pub anchor_spread: f64,
}

fn default_noise_range() -> [f64; 2] {
    [0.1, 2.0]
}

fn default_spread() -> f64 {
    6.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensorModelSpec {
    /// Reads one state coordinate.
    LinearCoordinate { axis: usize },
    /// `H x`.
    Linear { matrix: Matrix },
    /// Distance to `anchor`.
    Range { anchor: Vec<f64> },
    /// Planar bearing from `anchor` to the first two coordinates.
    Bearing { anchor: [f64; 2] },
    /// `x^T W x / 2`.
    Quadratic { weight: Matrix },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Noise {
    Variance(f64),
    Covariance(Matrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub noise: Noise,
    #[serde(flatten)]
    pub model: SensorModelSpec,
}

impl SensorSpec {
    fn kind(&self, n: usize, field: &str) -> Result<SensorKind> {
        let bad_dim = |what: &str, got: usize| {
            CliError::config(format!("{field}.{what}"), format!("has dimension {got}, state dimension is {n}"))
        };
        Ok(match &self.model {
            SensorModelSpec::LinearCoordinate { axis } => {
                if *axis >= n {
                    return Err(CliError::config(
                        format!("{field}.axis"),
                        format!("{axis} is out of range for state dimension {n}"),
                    ));
                }
                SensorKind::LinearCoordinate { axis: *axis, state_dim: n }
            }
            SensorModelSpec::Linear { matrix: m } => {
                let m = matrix(m, &format!("{field}.matrix"))?;
                if m.ncols() != n {
                    return Err(bad_dim("matrix", m.ncols()));
                }
                SensorKind::Linear { matrix: m }
            }
            SensorModelSpec::Range { anchor } => {
                if anchor.len() != n {
                    return Err(bad_dim("anchor", anchor.len()));
                }
                SensorKind::Range {
                    anchor: DVector::from_column_slice(anchor),
                }
            }
            SensorModelSpec::Bearing { anchor } => {
                if n < 2 {
                    return Err(bad_dim("kind", n));
                }
                SensorKind::Bearing {
                    anchor: *anchor,
                    state_dim: n,
                }
            }
            SensorModelSpec::Quadratic { weight } => {
                let w = matrix(weight, &format!("{field}.weight"))?;
                if w.shape() != (n, n) {
                    return Err(bad_dim("weight", w.ncols()));
                }
                SensorKind::Quadratic { weight: w }
            }
        })
    }

    fn output_dim(&self) -> usize {
        match &self.model {
            SensorModelSpec::Linear { matrix } => matrix.len(),
            _ => 1,
        }
    }

    fn noise_matrix(&self, field: &str) -> Result<DMatrix<f64>> {
        let p = self.output_dim();
        match &self.noise {
            Noise::Variance(v) if *v > 0.0 => Ok(DMatrix::identity(p, p) * *v),
            Noise::Variance(v) => Err(CliError::config(field, format!("variance {v} must be positive"))),
            Noise::Covariance(m) => matrix(m, field),
        }
    }
}

/// A scenario's concrete objects.
#[derive(Debug, Clone)]
pub struct Instance {
    pub prior: GaussianPrior,
    pub suite: SensorSuite,
    pub budgets: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Run,
    Bench,
    Certify,
}

/// Child-stream labels, one per random component.
pub mod streams {
    pub const SENSORS: u64 = 1;
    pub const RANDOM_SCHEDULE: u64 = 2;
    pub const RECEDING_GREEDY: u64 = 3;
    pub const RECEDING_LAZY: u64 = 4;
}

/// A seed for component `stream`, derived from the root seed.
pub fn child_seed(root: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream);
    rng.next_u64()
}

impl Scenario {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Fills every default and checks cross-field consistency. Idempotent.
    pub fn resolve(mut self, verb: Verb) -> Result<Self> {
        let n = self.prior.state_dim();
        let horizon = self.prior.horizon();
        if n == 0 {
            return Err(CliError::config("prior.state_dim", "must be positive"));
        }
        if horizon == 0 {
            return Err(CliError::config("prior.horizon", "must be positive"));
        }
        if let PriorSpec::Tracking { mean: Some(m), .. } | PriorSpec::DenseCustom { mean: Some(m), .. } =
            &mut self.prior
        {
            *m = expand_mean(Some(m), n, horizon, "prior.mean")?.as_slice().to_vec();
        }

        if let Some(gen) = self.generated_sensors.take() {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(self.seed, streams::SENSORS));
            self.sensors.extend(generate_sensors(&gen, n, &mut rng)?);
        }
        if self.sensors.is_empty() {
            return Err(CliError::config("sensors", "at least one sensor is required"));
        }
        for (i, s) in self.sensors.iter_mut().enumerate() {
            let field = format!("sensors[{i}]");
            s.kind(n, &field)?;
            let noise = s.noise_matrix(&format!("{field}.noise"))?;
            s.noise = Noise::Covariance(nested(&noise));
            if s.label.is_none() {
                s.label = Some(format!("s{i}"));
            }
        }
        let m = self.sensors.len();

        self.budgets = Budgets::PerStep(match &self.budgets {
            Budgets::Uniform(b) => vec![*b; horizon],
            Budgets::PerStep(v) if v.len() == horizon => v.clone(),
            Budgets::PerStep(v) => {
                return Err(CliError::config(
                    "budgets",
                    format!("{} budgets for a horizon of {horizon}", v.len()),
                ))
            }
        });
        if let Some((k, b)) = self.budget_list().iter().enumerate().find(|(_, &b)| b > m) {
            return Err(CliError::config(
                format!("budgets[{k}]"),
                format!("{b} exceeds the {m} configured sensors"),
            ));
        }

        if self.modes.schedulers.is_empty() {
            return Err(CliError::config("modes.schedulers", "name at least one scheduler"));
        }
        let mut seen = Vec::new();
        for s in &self.modes.schedulers {
            if seen.contains(s) {
                return Err(CliError::config("modes.schedulers", format!("`{}` listed twice", s.name())));
            }
            seen.push(*s);
        }

        let reps = self.execution.reps.unwrap_or(match verb {
            Verb::Bench => 5,
            Verb::Run | Verb::Certify => 1,
        });
        if reps == 0 {
            return Err(CliError::config("execution.reps", "must be at least 1"));
        }
        self.execution.reps = Some(reps);

        if verb == Verb::Bench {
            let budget = self.bench.budget.unwrap_or(self.budget_list()[0]);
            if budget > m {
                return Err(CliError::config("bench.budget", format!("{budget} exceeds the {m} sensors")));
            }
            self.bench.budget = Some(budget);
            if self.bench.horizons.is_empty() || self.bench.horizons.contains(&0) {
                return Err(CliError::config("bench.horizons", "need positive horizons"));
            }
            self.prior.with_horizon(1)?;
        }
        Ok(self)
    }

    pub fn budget_list(&self) -> Vec<usize> {
        match &self.budgets {
            Budgets::Uniform(b) => vec![*b; self.prior.horizon()],
            Budgets::PerStep(v) => v.clone(),
        }
    }

    pub fn reps(&self) -> usize {
        self.execution.reps.unwrap_or(1)
    }

    pub fn build_suite(&self) -> Result<SensorSuite> {
        let n = self.prior.state_dim();
        let sensors = self
            .sensors
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let field = format!("sensors[{i}]");
                let sensor = builtin_sensor(s.kind(n, &field)?, s.noise_matrix(&format!("{field}.noise"))?)
                    .context(|| field.clone())?;
                Ok(match &s.label {
                    Some(l) => sensor.with_label(l.clone()),
                    None => sensor,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SensorSuite::new(sensors).context(|| "sensors".into())
    }

    /// Builds the prior and suite of a resolved scenario.
    pub fn build(&self) -> Result<Instance> {
        Ok(Instance {
            prior: self.prior.build()?,
            suite: self.build_suite()?,
            budgets: self.budget_list(),
        })
    }
}

/// Box-Muller, so generated scenarios do not depend on distribution-crate internals.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn generate_sensors(gen: &GeneratedSensors, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<SensorSpec>> {
    let [lo, hi] = gen.noise_var;
    if !(lo > 0.0 && hi >= lo) {
        return Err(CliError::config("generated_sensors.noise_var", "need 0 < low <= high"));
    }
    let spread = gen.anchor_spread;
    Ok((0..gen.count)
        .map(|i| {
            let variance = lo + (hi - lo) * rng.random::<f64>();
            let kinds = if n >= 2 { 5 } else { 4 };
            let model = match rng.random_range(0..kinds) {
                0 => SensorModelSpec::LinearCoordinate {
                    axis: rng.random_range(0..n),
                },
                1 => SensorModelSpec::Range {
                    anchor: (0..n).map(|_| spread * normal(rng)).collect(),
                },
                2 => SensorModelSpec::Linear {
                    matrix: vec![(0..n).map(|_| normal(rng)).collect()],
                },
                3 => SensorModelSpec::Quadratic {
                    weight: (0..n)
                        .map(|r| (0..n).map(|c| if r == c { 0.5 + rng.random::<f64>() } else { 0.0 }).collect())
                        .collect(),
                },
                _ => SensorModelSpec::Bearing {
                    anchor: [spread * normal(rng), spread * normal(rng)],
                },
            };
            SensorSpec {
                label: Some(format!("g{i}")),
                noise: Noise::Variance(variance),
                model,
            }
        })
        .collect())
}
