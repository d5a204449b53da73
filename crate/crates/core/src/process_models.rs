//! Gaussian priors over the batch state `x_{1:K}`.
//!
//! A prior stores its mean and exactly one matrix: the batch covariance or the batch
//! precision, either as a block-tridiagonal matrix or densely. Which one is stored
//! decides which closed-form entropy the oracle can evaluate cheaply.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::blocklinalg::{checked_symmetric, logdet_dense, spd_inverse, BlockTridiagonalMatrix};
use crate::error::{Error, Result};

/// `ln(2 pi e)`, the per-dimension constant of the Gaussian differential entropy.
pub const LN_2PI_E: f64 = 2.837_877_066_409_345_5;

/// Entropy in nats of a Gaussian of dimension `dim` with covariance log-det `logdet_cov`.
pub fn gaussian_entropy(dim: usize, logdet_cov: f64) -> f64 {
    0.5 * dim as f64 * LN_2PI_E + 0.5 * logdet_cov
}

/// Stored representation of the batch covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorForm {
    CovarianceSparse(BlockTridiagonalMatrix),
    PrecisionSparse(BlockTridiagonalMatrix),
    CovarianceDense(DMatrix<f64>),
    PrecisionDense(DMatrix<f64>),
}

impl PriorForm {
    pub fn is_precision(&self) -> bool {
        matches!(self, PriorForm::PrecisionSparse(_) | PriorForm::PrecisionDense(_))
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, PriorForm::CovarianceSparse(_) | PriorForm::PrecisionSparse(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorForm::CovarianceSparse(_) => "covariance_sparse",
            PriorForm::PrecisionSparse(_) => "precision_sparse",
            PriorForm::CovarianceDense(_) => "covariance_dense",
            PriorForm::PrecisionDense(_) => "precision_dense",
        }
    }

    fn dim(&self) -> usize {
        match self {
            PriorForm::CovarianceSparse(m) | PriorForm::PrecisionSparse(m) => m.dim(),
            PriorForm::CovarianceDense(m) | PriorForm::PrecisionDense(m) => m.nrows(),
        }
    }

    fn logdet(&self) -> Result<f64> {
        match self {
            PriorForm::CovarianceSparse(m) | PriorForm::PrecisionSparse(m) => m.logdet(),
            PriorForm::CovarianceDense(m) | PriorForm::PrecisionDense(m) => logdet_dense(m),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            PriorForm::CovarianceSparse(m) | PriorForm::PrecisionSparse(m) => m.to_dense(),
            PriorForm::CovarianceDense(m) | PriorForm::PrecisionDense(m) => m.clone(),
        }
    }
}

/// Gaussian prior `N(mu_{1:K}, Sigma(x_{1:K}))` over `K` stacked `n`-dimensional states.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    state_dim: usize,
    horizon: usize,
    mean: DVector<f64>,
    form: PriorForm,
    /// Log-determinant of the stored matrix, validated at construction.
    stored_logdet: f64,
}

impl GaussianPrior {
    /// Validates dimensions and positive definiteness of the stored matrix.
    pub fn new(state_dim: usize, horizon: usize, mean: DVector<f64>, form: PriorForm) -> Result<Self> {
        if state_dim == 0 || horizon == 0 {
            return Err(Error::InvalidParams(
                "state dimension and horizon must be positive".into(),
            ));
        }
        let dim = state_dim * horizon;
        if mean.len() != dim {
            return Err(Error::dims(format!("mean has length {}, expected {dim}", mean.len())));
        }
        if form.dim() != dim {
            return Err(Error::dims(format!(
                "prior matrix is {}-dimensional, expected {dim}",
                form.dim()
            )));
        }
        let form = match form {
            PriorForm::CovarianceSparse(m) | PriorForm::PrecisionSparse(m)
                if m.block_dim() != Some(state_dim) || m.num_blocks() != horizon =>
            {
                return Err(Error::dims(format!(
                    "sparse prior needs {horizon} blocks of size {state_dim}"
                )));
            }
            PriorForm::CovarianceDense(m) => {
                PriorForm::CovarianceDense(checked_symmetric(m, "dense covariance")?)
            }
            PriorForm::PrecisionDense(m) => {
                PriorForm::PrecisionDense(checked_symmetric(m, "dense precision")?)
            }
            other => other,
        };
        let stored_logdet = form.logdet()?;
        Ok(Self {
            state_dim,
            horizon,
            mean,
            form,
            stored_logdet,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `n K`.
    pub fn dim(&self) -> usize {
        self.state_dim * self.horizon
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn form(&self) -> &PriorForm {
        &self.form
    }

    pub fn with_mean(mut self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::dims(format!(
                "mean has length {}, expected {}",
                mean.len(),
                self.dim()
            )));
        }
        self.mean = mean;
        Ok(self)
    }

    /// Log-determinant of the batch covariance.
    pub fn logdet_covariance(&self) -> f64 {
        if self.form.is_precision() {
            -self.stored_logdet
        } else {
            self.stored_logdet
        }
    }

    /// Differential entropy `H(x_{1:K})` in nats.
    pub fn entropy(&self) -> f64 {
        gaussian_entropy(self.dim(), self.logdet_covariance())
    }

    /// Dense batch covariance. Inverts densely when a precision is stored.
    pub fn dense_covariance(&self) -> Result<DMatrix<f64>> {
        let m = self.form.to_dense();
        if self.form.is_precision() {
            spd_inverse(&m)
        } else {
            Ok(m)
        }
    }

    /// Dense batch precision. Inverts densely when a covariance is stored.
    pub fn dense_precision(&self) -> Result<DMatrix<f64>> {
        let m = self.form.to_dense();
        if self.form.is_precision() {
            Ok(m)
        } else {
            spd_inverse(&m)
        }
    }

    /// Same representation (covariance or precision), stored densely.
    pub fn densified(&self) -> Self {
        let form = match &self.form {
            PriorForm::CovarianceSparse(m) => PriorForm::CovarianceDense(m.to_dense()),
            PriorForm::PrecisionSparse(m) => PriorForm::PrecisionDense(m.to_dense()),
            other => other.clone(),
        };
        Self { form, ..self.clone() }
    }

    /// Same Gaussian in dense covariance form.
    pub fn to_covariance_dense(&self) -> Result<Self> {
        Self::new(
            self.state_dim,
            self.horizon,
            self.mean.clone(),
            PriorForm::CovarianceDense(self.dense_covariance()?),
        )
    }

    /// Same Gaussian in dense precision form.
    pub fn to_precision_dense(&self) -> Result<Self> {
        Self::new(
            self.state_dim,
            self.horizon,
            self.mean.clone(),
            PriorForm::PrecisionDense(self.dense_precision()?),
        )
    }

    /// State sub-vector `k` of a batch vector.
    pub fn step_slice<'a>(&self, v: &'a DVector<f64>, k: usize) -> nalgebra::DVectorView<'a, f64> {
        v.rows(k * self.state_dim, self.state_dim)
    }

    /// Draws one batch state from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = self.dense_covariance()?;
        let chol = nalgebra::Cholesky::new(cov).ok_or_else(Error::not_pd)?;
        Ok(&self.mean + chol.l() * z)
    }
}

/// Stationary tracking prior: block-tridiagonal covariance with diagonal blocks
/// `marginal_var * I` and off-diagonal blocks `neighbor_corr * marginal_var * I`.
pub fn build_tracking_prior(
    state_dim: usize,
    horizon: usize,
    marginal_var: f64,
    neighbor_corr: f64,
) -> Result<GaussianPrior> {
    if !marginal_var.is_finite() || marginal_var <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "marginal variance must be positive, got {marginal_var}"
        )));
    }
    if !(neighbor_corr > -1.0 && neighbor_corr < 1.0) {
        return Err(Error::InvalidParams(format!(
            "neighbor correlation must lie in (-1, 1), got {neighbor_corr}"
        )));
    }
    if state_dim == 0 || horizon == 0 {
        return Err(Error::InvalidParams(
            "state dimension and horizon must be positive".into(),
        ));
    }
    let eye = DMatrix::<f64>::identity(state_dim, state_dim);
    let diag = vec![&eye * marginal_var; horizon];
    let upper = vec![&eye * (neighbor_corr * marginal_var); horizon - 1];
    let cov = BlockTridiagonalMatrix::new(diag, upper)?;
    GaussianPrior::new(
        state_dim,
        horizon,
        DVector::zeros(state_dim * horizon),
        PriorForm::CovarianceSparse(cov),
    )
}

/// Prior of the linear Gauss-Markov chain `x_{k+1} = A x_k + w_k`, `w_k ~ N(0, Q)`,
/// `x_1 ~ N(mu0, Sigma0)`, in block-tridiagonal precision form.
pub fn build_gauss_markov_prior(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    sigma0: &DMatrix<f64>,
    mu0: &DVector<f64>,
    horizon: usize,
) -> Result<GaussianPrior> {
    let n = a.nrows();
    if n == 0 || !a.is_square() {
        return Err(Error::dims(format!("transition matrix is {:?}", a.shape())));
    }
    if q.shape() != (n, n) || sigma0.shape() != (n, n) || mu0.len() != n {
        return Err(Error::dims(format!(
            "Q {:?}, Sigma0 {:?}, mu0 length {} against state dimension {n}",
            q.shape(),
            sigma0.shape(),
            mu0.len()
        )));
    }
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be positive".into()));
    }
    let q_inv = spd_inverse(&checked_symmetric(q.clone(), "Q")?)?;
    let s0_inv = spd_inverse(&checked_symmetric(sigma0.clone(), "Sigma0")?)?;
    let at_qinv = a.transpose() * &q_inv;
    let at_qinv_a = &at_qinv * a;

    let diag = (0..horizon)
        .map(|k| {
            let mut block = if k == 0 { s0_inv.clone() } else { q_inv.clone() };
            if k + 1 < horizon {
                block += &at_qinv_a;
            }
            block
        })
        .collect();
    let upper = vec![-at_qinv; horizon - 1];
    let precision = BlockTridiagonalMatrix::new(diag, upper)?;

    let mut mean = DVector::zeros(n * horizon);
    let mut mu = mu0.clone();
    for k in 0..horizon {
        mean.rows_mut(k * n, n).copy_from(&mu);
        mu = a * mu;
    }
    GaussianPrior::new(n, horizon, mean, PriorForm::PrecisionSparse(precision))
}

/// Free-function form of [`GaussianPrior::entropy`].
pub fn prior_entropy(prior: &GaussianPrior) -> f64 {
    prior.entropy()
}
