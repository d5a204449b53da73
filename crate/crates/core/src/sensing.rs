//! Sensors, sensor suites and schedules.
//!
//! A sensor is a differentiable measurement map `g_i: R^n -> R^{p_i}` with additive
//! Gaussian noise. Selection matrices never appear explicitly: a schedule is a list of
//! sorted sensor index sets, one per time step, and every stacked quantity is built by
//! gathering the selected sensors' blocks in ascending index order.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::blocklinalg::{checked_symmetric, logdet_dense, BlockDiagonalMatrix};
use crate::error::{Error, Result};

/// A differentiable measurement function.
pub trait MeasurementModel: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn measure(&self, x: DVectorView<'_, f64>) -> Result<DVector<f64>>;
    /// `output_dim x input_dim` Jacobian at `x`.
    fn jacobian(&self, x: DVectorView<'_, f64>) -> Result<DMatrix<f64>>;
}

/// Built-in measurement maps with analytic Jacobians.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorKind {
    /// `g(x) = x[axis]`.
    LinearCoordinate { axis: usize, state_dim: usize },
    /// `g(x) = H x`.
    Linear { matrix: DMatrix<f64> },
    /// `g(x) = ||x - anchor||_2`.
    Range { anchor: DVector<f64> },
    /// `g(x) = atan2(x[1] - anchor[1], x[0] - anchor[0])`; the planar position is the
    /// first two state coordinates.
    Bearing { anchor: [f64; 2], state_dim: usize },
    /// `g(x) = x^T W x / 2`.
    Quadratic { weight: DMatrix<f64> },
}

/// Distance below which range and bearing sensors treat the state as sitting on
/// their anchor.
const ANCHOR_EPS: f64 = 1e-12;

impl SensorKind {
    pub fn name(&self) -> &'static str {
        match self {
            SensorKind::LinearCoordinate { .. } => "linear_coordinate",
            SensorKind::Linear { .. } => "linear",
            SensorKind::Range { .. } => "range",
            SensorKind::Bearing { .. } => "bearing",
            SensorKind::Quadratic { .. } => "quadratic",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SensorKind::LinearCoordinate { axis, state_dim } if axis >= state_dim => Err(
                Error::InvalidParams(format!("axis {axis} out of range for state dimension {state_dim}")),
            ),
            SensorKind::Linear { matrix } if matrix.is_empty() => {
                Err(Error::InvalidParams("linear sensor needs a non-empty matrix".into()))
            }
            SensorKind::Range { anchor } if anchor.is_empty() => {
                Err(Error::InvalidParams("range anchor must be non-empty".into()))
            }
            SensorKind::Bearing { state_dim, .. } if *state_dim < 2 => Err(Error::InvalidParams(
                "bearing sensors need a state of dimension at least 2".into(),
            )),
            SensorKind::Quadratic { weight } if weight.is_empty() || !weight.is_square() => Err(
                Error::InvalidParams("quadratic weight must be a non-empty square matrix".into()),
            ),
            _ => Ok(()),
        }
    }

    fn check_input(&self, x: &DVectorView<'_, f64>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dims(format!(
                "{} sensor expects a state of dimension {}, got {}",
                self.name(),
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }
}

impl MeasurementModel for SensorKind {
    fn input_dim(&self) -> usize {
        match self {
            SensorKind::LinearCoordinate { state_dim, .. } | SensorKind::Bearing { state_dim, .. } => {
                *state_dim
            }
            SensorKind::Linear { matrix } => matrix.ncols(),
            SensorKind::Range { anchor } => anchor.len(),
            SensorKind::Quadratic { weight } => weight.ncols(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            SensorKind::Linear { matrix } => matrix.nrows(),
            _ => 1,
        }
    }

    fn measure(&self, x: DVectorView<'_, f64>) -> Result<DVector<f64>> {
        self.check_input(&x)?;
        let value = match self {
            SensorKind::LinearCoordinate { axis, .. } => x[*axis],
            SensorKind::Linear { matrix } => return Ok(matrix * x),
            SensorKind::Range { anchor } => {
                let r = (x - anchor).norm();
                if r < ANCHOR_EPS {
                    return Err(Error::InvalidParams("range sensor evaluated at its anchor".into()));
                }
                r
            }
            SensorKind::Bearing { anchor, .. } => {
                let (dx, dy) = (x[0] - anchor[0], x[1] - anchor[1]);
                if dx.hypot(dy) < ANCHOR_EPS {
                    return Err(Error::InvalidParams("bearing sensor evaluated at its anchor".into()));
                }
                dy.atan2(dx)
            }
            SensorKind::Quadratic { weight } => 0.5 * x.dot(&(weight * x)),
        };
        Ok(DVector::from_element(1, value))
    }

    fn jacobian(&self, x: DVectorView<'_, f64>) -> Result<DMatrix<f64>> {
        self.check_input(&x)?;
        let n = self.input_dim();
        match self {
            SensorKind::LinearCoordinate { axis, .. } => {
                let mut j = DMatrix::zeros(1, n);
                j[(0, *axis)] = 1.0;
                Ok(j)
            }
            SensorKind::Linear { matrix } => Ok(matrix.clone()),
            SensorKind::Range { anchor } => {
                let d = x - anchor;
                let r = d.norm();
                if r < ANCHOR_EPS {
                    return Err(Error::InvalidParams("range sensor evaluated at its anchor".into()));
                }
                Ok(DMatrix::from_row_slice(1, n, (d / r).as_slice()))
            }
            SensorKind::Bearing { anchor, .. } => {
                let (dx, dy) = (x[0] - anchor[0], x[1] - anchor[1]);
                let r2 = dx * dx + dy * dy;
                if r2.sqrt() < ANCHOR_EPS {
                    return Err(Error::InvalidParams("bearing sensor evaluated at its anchor".into()));
                }
                let mut j = DMatrix::zeros(1, n);
                j[(0, 0)] = -dy / r2;
                j[(0, 1)] = dx / r2;
                Ok(j)
            }
            SensorKind::Quadratic { weight } => {
                let sym = (weight + weight.transpose()) * 0.5;
                Ok(DMatrix::from_row_slice(1, n, (sym * x).as_slice()))
            }
        }
    }
}

/// A measurement map plus its Gaussian noise covariance.
#[derive(Debug, Clone)]
pub struct Sensor {
    model: Arc<dyn MeasurementModel>,
    noise_cov: DMatrix<f64>,
    /// Optional per-step noise covariances; `None` means time-invariant noise.
    step_noise: Option<Vec<DMatrix<f64>>>,
    label: String,
}

impl Sensor {
    /// Wraps any measurement model. The noise covariance must be symmetric positive
    /// definite and match the model's output dimension.
    pub fn new(model: Arc<dyn MeasurementModel>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let noise_cov = validate_noise(noise_cov, model.output_dim())?;
        Ok(Self {
            label: "custom".into(),
            model,
            noise_cov,
            step_noise: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Overrides the noise covariance at each time step.
    pub fn with_step_noise(mut self, step_noise: Vec<DMatrix<f64>>) -> Result<Self> {
        let p = self.output_dim();
        self.step_noise = Some(
            step_noise
                .into_iter()
                .map(|m| validate_noise(m, p))
                .collect::<Result<_>>()?,
        );
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn model(&self) -> &dyn MeasurementModel {
        self.model.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.model.output_dim()
    }

    pub fn measure(&self, x: DVectorView<'_, f64>) -> Result<DVector<f64>> {
        self.model.measure(x)
    }

    pub fn jacobian(&self, x: DVectorView<'_, f64>) -> Result<DMatrix<f64>> {
        self.model.jacobian(x)
    }

    /// Noise covariance at step `k`.
    pub fn noise_at(&self, k: usize) -> &DMatrix<f64> {
        match &self.step_noise {
            Some(v) if k < v.len() => &v[k],
            _ => &self.noise_cov,
        }
    }
}

fn validate_noise(noise: DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    if noise.shape() != (p, p) {
        return Err(Error::dims(format!(
            "noise covariance is {:?}, expected {p}x{p}",
            noise.shape()
        )));
    }
    let noise = checked_symmetric(noise, "noise covariance")?;
    logdet_dense(&noise).map_err(|_| Error::InvalidParams("noise covariance must be positive definite".into()))?;
    Ok(noise)
}

/// Builds one of the built-in sensors.
pub fn builtin_sensor(kind: SensorKind, noise_cov: DMatrix<f64>) -> Result<Sensor> {
    kind.validate()?;
    let label = kind.name();
    Ok(Sensor::new(Arc::new(kind), noise_cov)?.with_label(label))
}

/// The `m` candidate sensors, all observing the same `n`-dimensional state.
#[derive(Debug, Clone)]
pub struct SensorSuite {
    sensors: Vec<Sensor>,
    state_dim: usize,
}

impl SensorSuite {
    pub fn new(sensors: Vec<Sensor>) -> Result<Self> {
        let Some(first) = sensors.first() else {
            return Err(Error::InvalidParams("a sensor suite needs at least one sensor".into()));
        };
        let state_dim = first.input_dim();
        if let Some((i, s)) = sensors.iter().enumerate().find(|(_, s)| s.input_dim() != state_dim) {
            return Err(Error::dims(format!(
                "sensor {i} observes dimension {}, sensor 0 observes {state_dim}",
                s.input_dim()
            )));
        }
        Ok(Self { sensors, state_dim })
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn get(&self, i: usize) -> &Sensor {
        &self.sensors[i]
    }
}

/// Per-step selected sensor sets together with their budgets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    sets: Vec<Vec<usize>>,
    budgets: Vec<usize>,
}

impl Schedule {
    /// Sorts each set; rejects duplicates and sets larger than their budget.
    pub fn new(sets: Vec<Vec<usize>>, budgets: Vec<usize>) -> Result<Self> {
        if sets.len() != budgets.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} sets against {} budgets",
                sets.len(),
                budgets.len()
            )));
        }
        let sets = sets.into_iter().map(normalize_set).collect::<Result<Vec<_>>>()?;
        for (k, (set, &b)) in sets.iter().zip(&budgets).enumerate() {
            if set.len() > b {
                return Err(Error::InvalidSchedule(format!(
                    "step {k} selects {} sensors with budget {b}",
                    set.len()
                )));
            }
        }
        Ok(Self { sets, budgets })
    }

    /// All steps empty.
    pub fn empty(budgets: Vec<usize>) -> Self {
        Self {
            sets: vec![Vec::new(); budgets.len()],
            budgets,
        }
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }

    pub fn horizon(&self) -> usize {
        self.sets.len()
    }

    /// Total number of (step, sensor) selections.
    pub fn num_selected(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    /// Checks every index against a suite of `m` sensors.
    pub fn validate_for(&self, m: usize) -> Result<()> {
        validate_sets(&self.sets, m, self.sets.len())
    }

    pub fn into_sets(self) -> Vec<Vec<usize>> {
        self.sets
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.sets.iter().enumerate() {
            if k > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{s:?}")?;
        }
        Ok(())
    }
}

fn normalize_set(mut set: Vec<usize>) -> Result<Vec<usize>> {
    set.sort_unstable();
    if set.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSchedule(format!("duplicate sensor index in {set:?}")));
    }
    Ok(set)
}

/// Checks that `sets` has `horizon` entries, each sorted, duplicate-free and within `0..m`.
pub fn validate_sets(sets: &[Vec<usize>], m: usize, horizon: usize) -> Result<()> {
    if sets.len() != horizon {
        return Err(Error::InvalidSchedule(format!(
            "schedule covers {} steps, horizon is {horizon}",
            sets.len()
        )));
    }
    for (k, s) in sets.iter().enumerate() {
        if s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSchedule(format!(
                "step {k} set {s:?} is not strictly increasing"
            )));
        }
        if let Some(&i) = s.iter().find(|&&i| i >= m) {
            return Err(Error::InvalidSchedule(format!(
                "step {k} selects sensor {i} of {m}"
            )));
        }
    }
    Ok(())
}

/// Block `k` stacks the Jacobians of the sensors selected at step `k`, evaluated at
/// the `k`-th state of `linearization`. Empty steps give `0 x n` blocks.
pub fn stacked_jacobian(
    suite: &SensorSuite,
    sets: &[Vec<usize>],
    linearization: &DVector<f64>,
) -> Result<BlockDiagonalMatrix> {
    let n = suite.state_dim();
    if linearization.len() != n * sets.len() {
        return Err(Error::dims(format!(
            "linearization has length {}, expected {}",
            linearization.len(),
            n * sets.len()
        )));
    }
    validate_sets(sets, suite.len(), sets.len())?;
    let blocks = sets
        .iter()
        .enumerate()
        .map(|(k, set)| {
            let x = linearization.rows(k * n, n);
            let rows: usize = set.iter().map(|&i| suite.get(i).output_dim()).sum();
            let mut block = DMatrix::zeros(rows, n);
            let mut r = 0;
            for &i in set {
                let j = suite.get(i).jacobian(x)?;
                block.view_mut((r, 0), j.shape()).copy_from(&j);
                r += j.nrows();
            }
            Ok(block)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockDiagonalMatrix::new(blocks))
}

/// One noise block per selected (step, sensor) pair, in schedule order.
pub fn stacked_noise_cov(suite: &SensorSuite, sets: &[Vec<usize>]) -> Result<BlockDiagonalMatrix> {
    validate_sets(sets, suite.len(), sets.len())?;
    let blocks = sets
        .iter()
        .enumerate()
        .flat_map(|(k, set)| set.iter().map(move |&i| suite.get(i).noise_at(k).clone()))
        .collect();
    Ok(BlockDiagonalMatrix::new(blocks))
}

/// Stacked noiseless measurement `c(x)` of the selected sensors.
pub fn stacked_measurement(
    suite: &SensorSuite,
    sets: &[Vec<usize>],
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = suite.state_dim();
    if x.len() != n * sets.len() {
        return Err(Error::dims("batch state length does not match the schedule"));
    }
    let mut out = Vec::new();
    for (k, set) in sets.iter().enumerate() {
        for &i in set {
            out.extend_from_slice(suite.get(i).measure(x.rows(k * n, n))?.as_slice());
        }
    }
    Ok(DVector::from_vec(out))
}
