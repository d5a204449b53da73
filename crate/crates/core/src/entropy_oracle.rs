//! Closed-form conditional entropy `H(x_{1:K} | S_{1:K})` of the batch state given the
//! measurements of a schedule, for a Gaussian prior and Gaussian measurement noise
//! with the measurement maps linearized at a fixed point.
//!
//! Two formulations are implemented:
//!
//! * **precision form**: `H = -1/2 log det(Xi + Sigma^{-1}) + nK/2 ln(2 pi e)`, where
//!   `Xi` is block diagonal with step blocks `C_k^T R_k^{-1} C_k`. Block-tridiagonal
//!   when the prior precision is.
//! * **covariance form**: `H = 1/2 sum_k log det R_k - 1/2 log det Sigma(y) + H(x)`,
//!   with `Sigma(y) = C Sigma C^T + R`. Block-tridiagonal when the prior covariance
//!   is. The `(2 pi e)` factors cancel because both terms count measurement rows.
//!
//! [`OracleContext::conditional_entropy`] picks whichever matches the stored prior, so
//! a sparse prior is evaluated in time linear in `K`.

use nalgebra::{DMatrix, DVector};

use crate::blocklinalg::{
    logdet_dense, spd_inverse, symmetrize_in_place, BlockDiagonalMatrix, BlockTridiagonalMatrix,
};
use crate::error::{Error, Result};
use crate::process_models::{gaussian_entropy, GaussianPrior, PriorForm};
use crate::sensing::{stacked_jacobian, stacked_measurement, validate_sets, SensorSuite};

/// Diagonal shift applied once when the measurement covariance fails to factor.
const JITTER: f64 = 1e-12;

/// A set function over per-step sensor selections, to be minimized.
///
/// `evaluate` receives one sorted index set per time step.
pub trait EntropyObjective: Sync {
    fn num_sensors(&self) -> usize;
    fn horizon(&self) -> usize;
    fn evaluate(&self, sets: &[Vec<usize>]) -> Result<f64>;
    /// Value with nothing selected.
    fn empty_value(&self) -> f64;
}

/// Which closed-form formulation an evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyForm {
    Precision,
    Covariance,
}

/// Measurement covariance `Sigma(y_{1:K})` of a schedule.
#[derive(Debug, Clone)]
pub enum MeasurementCovariance {
    /// One block per time step, sized by the rows selected at that step.
    Sparse(BlockTridiagonalMatrix),
    Dense(DMatrix<f64>),
}

impl MeasurementCovariance {
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            MeasurementCovariance::Sparse(m) => m.to_dense(),
            MeasurementCovariance::Dense(m) => m.clone(),
        }
    }

    fn logdet_with_jitter(&self) -> Result<f64> {
        match self {
            MeasurementCovariance::Sparse(m) => m.logdet().or_else(|_| m.shifted(JITTER).logdet()),
            MeasurementCovariance::Dense(m) => logdet_dense(m).or_else(|_| {
                let n = m.nrows();
                logdet_dense(&(m + DMatrix::identity(n, n) * JITTER))
            }),
        }
    }
}

/// Prior, sensors, linearization point and everything about them that does not
/// depend on the schedule. Immutable once built.
#[derive(Debug, Clone)]
pub struct OracleContext {
    prior: GaussianPrior,
    suite: SensorSuite,
    linearization: DVector<f64>,
    prior_entropy: f64,
    /// `[k][i]`: Jacobian of sensor `i` at the `k`-th linearization state.
    jacobians: Vec<Vec<DMatrix<f64>>>,
    /// `[k][i]`: `G^T R^{-1} G`, sensor `i`'s information contribution at step `k`.
    information: Vec<Vec<DMatrix<f64>>>,
    /// `[k][i]`: `log det R_i` at step `k`.
    noise_logdet: Vec<Vec<f64>>,
}

impl OracleContext {
    /// Linearizes at the prior mean.
    pub fn new(prior: GaussianPrior, suite: SensorSuite) -> Result<Self> {
        let lin = prior.mean().clone();
        Self::with_linearization(prior, suite, lin)
    }

    pub fn with_linearization(
        prior: GaussianPrior,
        suite: SensorSuite,
        linearization: DVector<f64>,
    ) -> Result<Self> {
        let n = prior.state_dim();
        if suite.state_dim() != n {
            return Err(Error::dims(format!(
                "sensors observe dimension {}, prior state dimension is {n}",
                suite.state_dim()
            )));
        }
        if linearization.len() != prior.dim() {
            return Err(Error::dims(format!(
                "linearization has length {}, expected {}",
                linearization.len(),
                prior.dim()
            )));
        }
        let horizon = prior.horizon();
        let mut jacobians = Vec::with_capacity(horizon);
        let mut information = Vec::with_capacity(horizon);
        let mut noise_logdet = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let x = linearization.rows(k * n, n);
            let mut jac_k = Vec::with_capacity(suite.len());
            let mut info_k = Vec::with_capacity(suite.len());
            let mut ld_k = Vec::with_capacity(suite.len());
            for sensor in suite.sensors() {
                let g = sensor.jacobian(x)?;
                let r_inv = spd_inverse(sensor.noise_at(k))?;
                let mut info = g.transpose() * &r_inv * &g;
                symmetrize_in_place(&mut info);
                ld_k.push(logdet_dense(sensor.noise_at(k))?);
                jac_k.push(g);
                info_k.push(info);
            }
            jacobians.push(jac_k);
            information.push(info_k);
            noise_logdet.push(ld_k);
        }
        let prior_entropy = prior.entropy();
        Ok(Self {
            prior,
            suite,
            linearization,
            prior_entropy,
            jacobians,
            information,
            noise_logdet,
        })
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    pub fn suite(&self) -> &SensorSuite {
        &self.suite
    }

    pub fn linearization(&self) -> &DVector<f64> {
        &self.linearization
    }

    /// `H(x_{1:K})`, computed once at construction.
    pub fn prior_entropy(&self) -> f64 {
        self.prior_entropy
    }

    /// The formulation [`Self::conditional_entropy`] dispatches to.
    pub fn native_form(&self) -> EntropyForm {
        if self.prior.form().is_precision() {
            EntropyForm::Precision
        } else {
            EntropyForm::Covariance
        }
    }

    fn check(&self, sets: &[Vec<usize>]) -> Result<()> {
        validate_sets(sets, self.suite.len(), self.prior.horizon())
    }

    /// Information increment `Xi`: block `k` is the sum of the selected sensors'
    /// `G^T R^{-1} G` at step `k`.
    pub fn information_increment(&self, sets: &[Vec<usize>]) -> Result<BlockDiagonalMatrix> {
        self.check(sets)?;
        let n = self.prior.state_dim();
        Ok(BlockDiagonalMatrix::new(
            sets.iter()
                .enumerate()
                .map(|(k, set)| {
                    set.iter()
                        .fold(DMatrix::zeros(n, n), |acc, &i| acc + &self.information[k][i])
                })
                .collect(),
        ))
    }

    fn step_jacobian(&self, k: usize, set: &[usize]) -> DMatrix<f64> {
        stack_rows(set.iter().map(|&i| &self.jacobians[k][i]), self.prior.state_dim())
    }

    fn step_noise(&self, k: usize, set: &[usize]) -> DMatrix<f64> {
        BlockDiagonalMatrix::new(set.iter().map(|&i| self.suite.get(i).noise_at(k).clone()).collect())
            .to_dense()
    }

    /// Measurement covariance `C Sigma C^T + R` of a schedule. Needs a stored covariance.
    pub fn measurement_covariance(&self, sets: &[Vec<usize>]) -> Result<MeasurementCovariance> {
        self.check(sets)?;
        let c: Vec<DMatrix<f64>> =
            sets.iter().enumerate().map(|(k, s)| self.step_jacobian(k, s)).collect();
        let r: Vec<DMatrix<f64>> =
            sets.iter().enumerate().map(|(k, s)| self.step_noise(k, s)).collect();
        match self.prior.form() {
            PriorForm::CovarianceSparse(sigma) => {
                Ok(MeasurementCovariance::Sparse(measurement_cov_sparse(sigma, &c, &r)?))
            }
            PriorForm::CovarianceDense(sigma) => Ok(MeasurementCovariance::Dense(
                measurement_cov_dense(sigma, &c, &r, self.prior.state_dim()),
            )),
            _ => Err(Error::WrongForm("covariance form needs a stored covariance")),
        }
    }

    /// Precision-form entropy. Fails with `WrongForm` for covariance priors.
    pub fn conditional_entropy_precision_form(&self, sets: &[Vec<usize>]) -> Result<f64> {
        let xi = self.information_increment(sets)?;
        let logdet = match self.prior.form() {
            PriorForm::PrecisionSparse(j) => j.add_block_diagonal(&xi)?.logdet()?,
            PriorForm::PrecisionDense(j) => logdet_dense(&add_dense_block_diagonal(j, &xi))?,
            _ => return Err(Error::WrongForm("precision form needs a stored precision")),
        };
        Ok(gaussian_entropy(self.prior.dim(), -logdet))
    }

    /// Covariance-form entropy. Fails with `WrongForm` for precision priors.
    pub fn conditional_entropy_covariance_form(&self, sets: &[Vec<usize>]) -> Result<f64> {
        let sigma_y = self.measurement_covariance(sets)?;
        let noise: f64 = sets
            .iter()
            .enumerate()
            .flat_map(|(k, s)| s.iter().map(move |&i| self.noise_logdet[k][i]))
            .sum();
        let logdet_y = sigma_y.logdet_with_jitter()?;
        Ok(0.5 * noise - 0.5 * logdet_y + self.prior_entropy)
    }

    /// `H(x_{1:K} | S_{1:K})` in whichever form the stored prior supports.
    pub fn conditional_entropy(&self, sets: &[Vec<usize>]) -> Result<f64> {
        match self.native_form() {
            EntropyForm::Precision => self.conditional_entropy_precision_form(sets),
            EntropyForm::Covariance => self.conditional_entropy_covariance_form(sets),
        }
    }

    /// `I(x; y) = H(x) - H(x | y)`.
    pub fn mutual_information(&self, sets: &[Vec<usize>]) -> Result<f64> {
        Ok(self.prior_entropy - self.conditional_entropy(sets)?)
    }

    /// Error covariance of the MMSE estimator, dense `nK x nK`.
    ///
    /// Precision priors use `(Xi + Sigma^{-1})^{-1}`; covariance priors use
    /// `Sigma - Sigma C^T (C Sigma C^T + R)^{-1} C Sigma`.
    pub fn posterior_covariance(&self, sets: &[Vec<usize>]) -> Result<DMatrix<f64>> {
        match self.prior.form() {
            PriorForm::PrecisionSparse(j) => {
                let xi = self.information_increment(sets)?;
                spd_inverse(&j.add_block_diagonal(&xi)?.to_dense())
            }
            PriorForm::PrecisionDense(j) => {
                let xi = self.information_increment(sets)?;
                spd_inverse(&add_dense_block_diagonal(j, &xi))
            }
            PriorForm::CovarianceSparse(_) | PriorForm::CovarianceDense(_) => {
                let sigma = self.prior.dense_covariance()?;
                let sigma_y = self.measurement_covariance(sets)?.to_dense();
                let c = self.dense_selection_jacobian(sets);
                let sct = &sigma * c.transpose();
                let chol = nalgebra::Cholesky::new(sigma_y).ok_or_else(Error::not_pd)?;
                let mut post = &sigma - &sct * chol.solve(&sct.transpose());
                symmetrize_in_place(&mut post);
                Ok(post)
            }
        }
    }

    /// Dense `rows x nK` Jacobian of the selected sensors at the linearization point.
    pub fn dense_selection_jacobian(&self, sets: &[Vec<usize>]) -> DMatrix<f64> {
        BlockDiagonalMatrix::new(
            sets.iter().enumerate().map(|(k, s)| self.step_jacobian(k, s)).collect(),
        )
        .to_dense()
    }
}

impl EntropyObjective for OracleContext {
    fn num_sensors(&self) -> usize {
        self.suite.len()
    }

    fn horizon(&self) -> usize {
        self.prior.horizon()
    }

    fn evaluate(&self, sets: &[Vec<usize>]) -> Result<f64> {
        self.conditional_entropy(sets)
    }

    fn empty_value(&self) -> f64 {
        self.prior_entropy
    }
}

fn stack_rows<'a>(blocks: impl Iterator<Item = &'a DMatrix<f64>> + Clone, n: usize) -> DMatrix<f64> {
    let rows: usize = blocks.clone().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, n);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

fn add_dense_block_diagonal(m: &DMatrix<f64>, d: &BlockDiagonalMatrix) -> DMatrix<f64> {
    let mut out = m.clone();
    let mut off = 0;
    for b in d.blocks() {
        let mut view = out.view_mut((off, off), b.shape());
        view += b;
        off += b.nrows();
    }
    out
}

/// `C Sigma C^T + R` for a block-tridiagonal `Sigma` and per-step `C_k`, `R_k`.
fn measurement_cov_sparse(
    sigma: &BlockTridiagonalMatrix,
    c: &[DMatrix<f64>],
    r: &[DMatrix<f64>],
) -> Result<BlockTridiagonalMatrix> {
    let diag = c
        .iter()
        .zip(r)
        .enumerate()
        .map(|(k, (ck, rk))| ck * sigma.diag_block(k) * ck.transpose() + rk)
        .collect();
    let upper = (0..c.len().saturating_sub(1))
        .map(|k| &c[k] * sigma.upper_block(k) * c[k + 1].transpose())
        .collect();
    BlockTridiagonalMatrix::new(diag, upper)
}

/// `C Sigma C^T + R` for a dense `Sigma`, assembled from step-pair blocks so that
/// unselected steps cost nothing.
fn measurement_cov_dense(
    sigma: &DMatrix<f64>,
    c: &[DMatrix<f64>],
    r: &[DMatrix<f64>],
    n: usize,
) -> DMatrix<f64> {
    let active: Vec<usize> = (0..c.len()).filter(|&k| c[k].nrows() > 0).collect();
    let mut offsets = Vec::with_capacity(active.len());
    let mut rows = 0;
    for &k in &active {
        offsets.push(rows);
        rows += c[k].nrows();
    }
    let mut out = DMatrix::zeros(rows, rows);
    for (ai, &a) in active.iter().enumerate() {
        for (bi, &b) in active.iter().enumerate().skip(ai) {
            let sab = sigma.view((a * n, b * n), (n, n));
            let mut block = &c[a] * sab * c[b].transpose();
            if a == b {
                block += &r[a];
            }
            out.view_mut((offsets[ai], offsets[bi]), block.shape()).copy_from(&block);
            if a != b {
                out.view_mut((offsets[bi], offsets[ai]), (block.ncols(), block.nrows()))
                    .copy_from(&block.transpose());
            }
        }
    }
    symmetrize_in_place(&mut out);
    out
}

/// Result of [`map_linearization`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapEstimate {
    pub mean: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Gauss-Newton stopping rule: `||delta||_inf` threshold and iteration cap.
pub const MAP_TOL: f64 = 1e-8;
pub const MAP_MAX_ITERS: usize = 50;

/// MAP estimate of `x_{1:K}` given realized measurements of a past schedule, used as
/// the linearization point of later planning steps.
///
/// `measurements[k]` stacks the readings of the sensors in `past[k]` in ascending
/// index order. With no measurements the prior mean is returned. Otherwise
/// Gauss-Newton runs from the prior mean until `||delta||_inf <= 1e-8` or 50
/// iterations; hitting the cap returns the last iterate with `converged == false`.
pub fn map_linearization(
    prior: &GaussianPrior,
    suite: &SensorSuite,
    past: &[Vec<usize>],
    measurements: Option<&[DVector<f64>]>,
) -> Result<MapEstimate> {
    let prior_mode = MapEstimate {
        mean: prior.mean().clone(),
        iterations: 0,
        converged: true,
    };
    let Some(y) = measurements else {
        return Ok(prior_mode);
    };
    validate_sets(past, suite.len(), prior.horizon())?;
    if y.len() != past.len() {
        return Err(Error::dims(format!(
            "{} measurement vectors for {} steps",
            y.len(),
            past.len()
        )));
    }
    for (k, (set, yk)) in past.iter().zip(y).enumerate() {
        let rows: usize = set.iter().map(|&i| suite.get(i).output_dim()).sum();
        if yk.len() != rows {
            return Err(Error::dims(format!(
                "step {k} measurement has length {}, selected sensors produce {rows}",
                yk.len()
            )));
        }
    }
    if past.iter().all(Vec::is_empty) {
        return Ok(prior_mode);
    }
    let y_all = DVector::from_iterator(
        y.iter().map(|v| v.len()).sum(),
        y.iter().flat_map(|v| v.iter().copied()),
    );
    let noise = crate::sensing::stacked_noise_cov(suite, past)?;
    let r_inv = noise.spd_inverse()?;
    let n = prior.state_dim();

    let mut est = prior.mean().clone();
    for iter in 1..=MAP_MAX_ITERS {
        let c = stacked_jacobian(suite, past, &est)?;
        let resid = &y_all - stacked_measurement(suite, past, &est)?;
        let next = match prior.form() {
            PriorForm::PrecisionSparse(_) | PriorForm::PrecisionDense(_) => {
                // (Xi + J) delta = C^T R^-1 (y - c) - J (est - mu)
                let r_inv_steps = regroup_by_step(&r_inv, past);
                let xi = BlockDiagonalMatrix::new(
                    c.blocks()
                        .iter()
                        .zip(&r_inv_steps)
                        .map(|(ck, rk)| ck.transpose() * rk * ck)
                        .collect(),
                );
                let dev = &est - prior.mean();
                let ct_rinv_r = c.transpose().mul_vec(&r_inv.mul_vec(&resid)?)?;
                let delta = match prior.form() {
                    PriorForm::PrecisionSparse(j) => {
                        let rhs = ct_rinv_r - j.mul_vec(&dev)?;
                        j.add_block_diagonal(&xi)?.solve(&rhs)?
                    }
                    PriorForm::PrecisionDense(j) => {
                        let rhs = ct_rinv_r - j * &dev;
                        let h = add_dense_block_diagonal(j, &xi);
                        nalgebra::Cholesky::new(h).ok_or_else(Error::not_pd)?.solve(&rhs)
                    }
                    _ => unreachable!(),
                };
                &est + delta
            }
            PriorForm::CovarianceSparse(sigma) => {
                // mu + Sigma C^T Sigma(y)^{-1} (y - c(est) - C (mu - est))
                let innov = &resid - c.mul_vec(&(prior.mean() - &est))?;
                let r_steps = regroup_by_step(&noise, past);
                let sy = measurement_cov_sparse(sigma, c.blocks(), &r_steps)?;
                let w = sy.solve(&innov)?;
                prior.mean() + sigma.mul_vec(&c.transpose().mul_vec(&w)?)?
            }
            PriorForm::CovarianceDense(sigma) => {
                let innov = &resid - c.mul_vec(&(prior.mean() - &est))?;
                let r_steps = regroup_by_step(&noise, past);
                let sy = measurement_cov_dense(sigma, c.blocks(), &r_steps, n);
                let w = nalgebra::Cholesky::new(sy).ok_or_else(Error::not_pd)?.solve(&innov);
                prior.mean() + sigma * c.transpose().mul_vec(&w)?
            }
        };
        let step = (&next - &est).amax();
        est = next;
        if step <= MAP_TOL {
            return Ok(MapEstimate {
                mean: est,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(MapEstimate {
        mean: est,
        iterations: MAP_MAX_ITERS,
        converged: false,
    })
}

/// Groups a per-(step, sensor) block-diagonal matrix into one dense block per step.
fn regroup_by_step(per_sensor: &BlockDiagonalMatrix, sets: &[Vec<usize>]) -> Vec<DMatrix<f64>> {
    let mut blocks = per_sensor.blocks().iter();
    sets.iter()
        .map(|set| {
            BlockDiagonalMatrix::new(set.iter().map(|_| blocks.next().unwrap().clone()).collect())
                .to_dense()
        })
        .collect()
}
