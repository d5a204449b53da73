//! Seeded synthetic instances for tests, benchmarks and demos.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::blocklinalg::BlockTridiagonalMatrix;
use crate::entropy_oracle::OracleContext;
use crate::error::Result;
use crate::process_models::{
    build_gauss_markov_prior, build_tracking_prior, GaussianPrior, PriorForm,
};
use crate::sensing::{builtin_sensor, SensorKind, SensorSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    /// Block-tridiagonal covariance.
    Tracking,
    /// Block-tridiagonal precision.
    GaussMarkov,
    /// Dense covariance.
    Dense,
}

impl PriorKind {
    pub const ALL: [PriorKind; 3] = [PriorKind::Tracking, PriorKind::GaussMarkov, PriorKind::Dense];
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn random_vector<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * normal(rng))
}

/// `A A^T / n + floor * I` with a Gaussian `A`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, floor: f64, rng: &mut R) -> DMatrix<f64> {
    let a = random_matrix(n, n, rng);
    let mut m = &a * a.transpose() / n.max(1) as f64 + DMatrix::identity(n, n) * floor;
    crate::blocklinalg::symmetrize_in_place(&mut m);
    m
}

/// `L L^T` for a random lower block-bidiagonal `L` with well-conditioned diagonal
/// blocks: symmetric positive definite and block tridiagonal.
pub fn random_spd_block_tridiagonal<R: Rng + ?Sized>(
    block_dim: usize,
    num_blocks: usize,
    rng: &mut R,
) -> BlockTridiagonalMatrix {
    let n = block_dim;
    let lower_tri = |rng: &mut R| {
        let mut l = random_matrix(n, n, rng) * 0.5;
        for i in 0..n {
            l[(i, i)] = 0.5 + rng.random::<f64>() * 1.5;
            for j in (i + 1)..n {
                l[(i, j)] = 0.0;
            }
        }
        l
    };
    let diag_l: Vec<DMatrix<f64>> = (0..num_blocks).map(|_| lower_tri(rng)).collect();
    let sub: Vec<DMatrix<f64>> = (1..num_blocks).map(|_| random_matrix(n, n, rng) * 0.7).collect();
    let diag = (0..num_blocks)
        .map(|k| {
            let mut b = &diag_l[k] * diag_l[k].transpose();
            if k > 0 {
                b += &sub[k - 1] * sub[k - 1].transpose();
            }
            b
        })
        .collect();
    let upper = (1..num_blocks)
        .map(|k| &diag_l[k - 1] * sub[k - 1].transpose())
        .collect();
    BlockTridiagonalMatrix::new(diag, upper).expect("block shapes are consistent")
}

/// A random prior of the given kind with a nonzero mean.
pub fn random_prior<R: Rng + ?Sized>(
    kind: PriorKind,
    state_dim: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<GaussianPrior> {
    let n = state_dim;
    let mean = random_vector(n * horizon, 2.0, rng);
    match kind {
        PriorKind::Tracking => {
            let var = 0.5 + 1.5 * rng.random::<f64>();
            let corr = 0.8 * (rng.random::<f64>() - 0.5);
            build_tracking_prior(n, horizon, var, corr)?.with_mean(mean)
        }
        PriorKind::GaussMarkov => {
            let a = random_matrix(n, n, rng) * (0.9 / (n as f64).sqrt());
            let q = random_spd(n, 0.2, rng);
            let s0 = random_spd(n, 0.5, rng);
            let mu0 = random_vector(n, 2.0, rng);
            build_gauss_markov_prior(&a, &q, &s0, &mu0, horizon)
        }
        PriorKind::Dense => {
            let cov = random_spd(n * horizon, 0.3, rng);
            GaussianPrior::new(n, horizon, mean, PriorForm::CovarianceDense(cov))
        }
    }
}

/// `m` sensors of mixed kinds observing an `n`-dimensional state; noise variances
/// are drawn from `[0.1, 2]`.
pub fn random_suite<R: Rng + ?Sized>(state_dim: usize, m: usize, rng: &mut R) -> Result<SensorSuite> {
    let n = state_dim;
    let sensors = (0..m)
        .map(|_| {
            let noise_var = 0.1 + 1.9 * rng.random::<f64>();
            let choice = rng.random_range(0..5u32);
            let kind = match choice {
                0 => SensorKind::LinearCoordinate {
                    axis: rng.random_range(0..n),
                    state_dim: n,
                },
                1 => SensorKind::Range {
                    anchor: random_vector(n, 6.0, rng),
                },
                2 if n >= 2 => SensorKind::Bearing {
                    anchor: [6.0 * normal(rng), 6.0 * normal(rng)],
                    state_dim: n,
                },
                3 => SensorKind::Quadratic {
                    weight: random_spd(n, 0.1, rng) * 0.5,
                },
                _ => SensorKind::Linear {
                    matrix: random_matrix(1, n, rng),
                },
            };
            builtin_sensor(kind, DMatrix::from_element(1, 1, noise_var))
        })
        .collect::<Result<Vec<_>>>()?;
    SensorSuite::new(sensors)
}

/// A random prior and suite, linearized at the prior mean.
pub fn random_instance<R: Rng + ?Sized>(
    kind: PriorKind,
    state_dim: usize,
    horizon: usize,
    num_sensors: usize,
    rng: &mut R,
) -> Result<OracleContext> {
    let prior = random_prior(kind, state_dim, horizon, rng)?;
    let suite = random_suite(state_dim, num_sensors, rng)?;
    OracleContext::new(prior, suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_objects_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in PriorKind::ALL {
            for n in 1..=3 {
                for k in 1..=4 {
                    let ctx = random_instance(kind, n, k, 4, &mut rng).unwrap();
                    assert_eq!(ctx.prior().dim(), n * k);
                }
            }
        }
        let m = random_spd_block_tridiagonal(3, 5, &mut rng);
        assert!(m.logdet().is_ok());
    }
}
