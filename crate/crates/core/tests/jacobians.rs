//! Analytic Jacobians against central differences, and the linearized entropy
//! against an entropy built from finite-difference Jacobians.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sensched_core::instances::{random_prior, random_suite, random_vector, PriorKind};
use sensched_core::sensing::{builtin_sensor, MeasurementModel};
use sensched_core::{OracleContext, Sensor, SensorKind, SensorSuite};

const STEP: f64 = 1e-6;

fn fd_jacobian(f: &dyn MeasurementModel, x: &DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let p = f.output_dim();
    let mut j = DMatrix::zeros(p, n);
    for c in 0..n {
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[c] += STEP;
        lo[c] -= STEP;
        let d = (f.measure(hi.as_view()).unwrap() - f.measure(lo.as_view()).unwrap()) / (2.0 * STEP);
        j.set_column(c, &d);
    }
    j
}

#[test]
fn builtin_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for point in 0..100 {
        let n = 2 + point % 3;
        let suite = random_suite(n, 6, &mut rng).unwrap();
        let x = random_vector(n, 2.0, &mut rng);
        for s in suite.sensors() {
            let analytic = s.jacobian(x.as_view()).unwrap();
            let numeric = fd_jacobian(s.model(), &x);
            let err = (&analytic - &numeric).amax();
            assert!(err < 1e-5, "{} at {x}: {err}", s.label());
            checked += 1;
        }
    }
    assert_eq!(checked, 600);
}

#[test]
fn range_example_is_unit_vector() {
    let range = SensorKind::Range { anchor: DVector::zeros(2) };
    let j = range.jacobian(DVector::from_vec(vec![3.0, 4.0]).as_view()).unwrap();
    assert!((j[(0, 0)] - 0.6).abs() < 1e-15 && (j[(0, 1)] - 0.8).abs() < 1e-15);
    assert!(range.measure(DVector::zeros(2).as_view()).is_err());
}

/// Sensor with no analytic Jacobian of its own: delegates measurement to an inner
/// model and differentiates numerically.
#[derive(Debug)]
struct Numeric(SensorKind);

impl MeasurementModel for Numeric {
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.0.output_dim()
    }
    fn measure(&self, x: nalgebra::DVectorView<'_, f64>) -> sensched_core::Result<DVector<f64>> {
        self.0.measure(x)
    }
    fn jacobian(&self, x: nalgebra::DVectorView<'_, f64>) -> sensched_core::Result<DMatrix<f64>> {
        Ok(fd_jacobian(&self.0, &x.into_owned()))
    }
}

fn kinds(rng: &mut ChaCha8Rng) -> Vec<SensorKind> {
    vec![
        SensorKind::Range { anchor: random_vector(2, 6.0, rng) + DVector::from_element(2, 8.0) },
        SensorKind::Bearing { anchor: [-7.0, 5.0], state_dim: 2 },
        SensorKind::Quadratic { weight: DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]) },
        SensorKind::LinearCoordinate { axis: 1, state_dim: 2 },
    ]
}

#[test]
fn entropy_is_stable_under_finite_difference_jacobians() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for kind in PriorKind::ALL {
        for _ in 0..5 {
            let prior = random_prior(kind, 2, 3, &mut rng).unwrap();
            let noise = DMatrix::from_element(1, 1, 0.4);
            let ks = kinds(&mut rng);
            let analytic = SensorSuite::new(
                ks.iter().map(|k| builtin_sensor(k.clone(), noise.clone()).unwrap()).collect(),
            )
            .unwrap();
            let numeric = SensorSuite::new(
                ks.into_iter()
                    .map(|k| Sensor::new(Arc::new(Numeric(k)), noise.clone()).unwrap())
                    .collect(),
            )
            .unwrap();
            let a = OracleContext::new(prior.clone(), analytic).unwrap();
            let b = OracleContext::new(prior, numeric).unwrap();
            let sets = vec![vec![0, 1], vec![2], vec![1, 3]];
            let ha = a.conditional_entropy(&sets).unwrap();
            let hb = b.conditional_entropy(&sets).unwrap();
            assert!((ha - hb).abs() < 1e-4, "{ha} vs {hb}");
        }
    }
}
