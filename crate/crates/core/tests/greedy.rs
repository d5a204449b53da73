use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sensched_core::entropy_oracle::EntropyObjective;
use sensched_core::exhaustive::{certify_bound, exhaustive_optimum};
use sensched_core::instances::{random_instance, PriorKind};
use sensched_core::process_models::build_tracking_prior;
use sensched_core::scheduler::{greedy_schedule, greedy_step, lazy_greedy_step, random_schedule, receding_greedy_schedule};
use sensched_core::sensing::builtin_sensor;
use sensched_core::{EnumerationMode, EnumerationOptions, GreedyOptions, OracleContext, SensorKind, SensorSuite};

fn linear_suite(noise: &[f64]) -> SensorSuite {
    SensorSuite::new(
        noise
            .iter()
            .map(|&v| {
                builtin_sensor(
                    SensorKind::LinearCoordinate { axis: 0, state_dim: 1 },
                    DMatrix::from_element(1, 1, v),
                )
                .unwrap()
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn single_sensor_selected_every_step() {
    let prior = build_tracking_prior(1, 4, 1.0, 0.3).unwrap();
    let ctx = OracleContext::new(prior, linear_suite(&[0.5])).unwrap();
    let (schedule, trace) = greedy_schedule(&ctx, &[1; 4], GreedyOptions::default()).unwrap();
    assert_eq!(schedule.sets(), &[vec![0], vec![0], vec![0], vec![0]]);
    assert_eq!(trace.oracle_calls(), 4);
}

#[test]
fn low_noise_sensor_wins() {
    let prior = build_tracking_prior(1, 3, 1.0, 0.2).unwrap();
    let ctx = OracleContext::new(prior, linear_suite(&[100.0, 0.01])).unwrap();
    let (schedule, _) = greedy_schedule(&ctx, &[1; 3], GreedyOptions::default()).unwrap();
    assert_eq!(schedule.sets(), &[vec![1], vec![1], vec![1]]);
    // Exhaustively, the low-noise singleton is the best choice at each step.
    for k in 0..3 {
        let mut prefix: Vec<Vec<usize>> = schedule.sets()[..k].to_vec();
        prefix.resize(3, vec![]);
        let with = |i: usize| {
            let mut s = prefix.clone();
            s[k] = vec![i];
            ctx.evaluate(&s).unwrap()
        };
        assert!(with(1) < with(0));
    }
}

#[test]
fn identical_sensors_tie_break_by_index() {
    let prior = build_tracking_prior(1, 2, 1.0, 0.0).unwrap();
    let ctx = OracleContext::new(prior, linear_suite(&[1.0; 5])).unwrap();
    let eager = greedy_step(&ctx, &[], 0, 3, GreedyOptions::default()).unwrap();
    assert_eq!(eager.selected(), vec![0, 1, 2]);
    assert_eq!(eager.oracle_calls, 5 + 4 + 3);
    // Gains strictly shrink after each pick, so every stale entry gets refreshed.
    let lazy = lazy_greedy_step(&ctx, &[], 0, 3, GreedyOptions::default()).unwrap();
    assert_eq!(lazy.selected(), vec![0, 1, 2]);
    assert_eq!(lazy.oracle_calls, eager.oracle_calls);
    assert!(greedy_step(&ctx, &[], 0, 0, GreedyOptions::default()).unwrap().picks.is_empty());
}

#[test]
fn lazy_skips_refreshes_when_gains_are_independent() {
    // Uncorrelated coordinates, one sensor per coordinate: gains never change.
    let prior = build_tracking_prior(5, 1, 1.0, 0.0).unwrap();
    let sensors = (0..5)
        .map(|axis| {
            builtin_sensor(
                SensorKind::LinearCoordinate { axis, state_dim: 5 },
                DMatrix::from_element(1, 1, 0.2 + axis as f64),
            )
            .unwrap()
        })
        .collect();
    let ctx = OracleContext::new(prior, SensorSuite::new(sensors).unwrap()).unwrap();
    let eager = greedy_step(&ctx, &[], 0, 3, GreedyOptions::default()).unwrap();
    let lazy = lazy_greedy_step(&ctx, &[], 0, 3, GreedyOptions::default()).unwrap();
    assert_eq!(eager.selected(), vec![0, 1, 2]);
    assert_eq!(lazy.selected(), vec![0, 1, 2]);
    assert_eq!(eager.oracle_calls, 5 + 4 + 3);
    assert_eq!(lazy.oracle_calls, 5 + 2);
}

#[test]
fn gains_are_non_increasing_within_a_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for kind in PriorKind::ALL {
        for _ in 0..10 {
            let ctx = random_instance(kind, 2, 3, 6, &mut rng).unwrap();
            let (_, trace) = greedy_schedule(&ctx, &[3, 2, 4], GreedyOptions::default()).unwrap();
            for step in &trace.steps {
                for w in step.picks.windows(2) {
                    assert!(w[1].gain <= w[0].gain + 1e-9);
                }
            }
            assert!(trace.oracle_calls() <= (3 + 2 + 4) * 6);
        }
    }
}

#[test]
fn seeded_bound_example() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for kind in PriorKind::ALL {
        let ctx = random_instance(kind, 1, 2, 4, &mut rng).unwrap();
        let (_, trace) = greedy_schedule(&ctx, &[2, 2], GreedyOptions::default()).unwrap();
        let h = trace.final_entropy().unwrap();
        let (cert, res) = certify_bound(&ctx, &[2, 2], h, EnumerationOptions::default()).unwrap();
        assert!(cert.within(0.5), "{cert:?}");
        assert!(res.opt_cost <= h + 1e-12 && h <= res.max_cost + 1e-12);
        assert_eq!(res.num_enumerated, 11 * 11);
    }
}

#[test]
fn lazy_matches_eager_with_fewer_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut strictly_fewer = 0;
    let trials = 20;
    for t in 0..trials {
        let ctx = random_instance(PriorKind::ALL[t % 3], 2, 3, 20, &mut rng).unwrap();
        let budgets = [3, 4, 2];
        let (eager, et) = greedy_schedule(&ctx, &budgets, GreedyOptions::default()).unwrap();
        let (lazy, lt) = greedy_schedule(&ctx, &budgets, GreedyOptions::lazy()).unwrap();
        assert_eq!(eager, lazy);
        assert!(lt.oracle_calls() <= et.oracle_calls());
        strictly_fewer += usize::from(lt.oracle_calls() < et.oracle_calls());
    }
    assert_eq!(strictly_fewer, trials);
}

#[test]
fn greedy_beats_random_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let ctx = random_instance(PriorKind::Tracking, 2, 4, 6, &mut rng).unwrap();
    let budgets = [2; 4];
    let (_, trace) = greedy_schedule(&ctx, &budgets, GreedyOptions::default()).unwrap();
    let greedy = trace.final_entropy().unwrap();
    let mut total = 0.0;
    for seed in 0..1000 {
        let s = random_schedule(&budgets, 6, seed).unwrap();
        total += ctx.evaluate(s.sets()).unwrap();
    }
    assert!(greedy < total / 1000.0);
}

/// Straightforward recursive enumeration, written independently of the library's
/// mixed-radix walk.
fn brute_force(ctx: &OracleContext, budgets: &[usize]) -> (f64, f64, usize) {
    fn subsets(m: usize, max: usize) -> Vec<Vec<usize>> {
        let mut out = vec![];
        for mask in 0..1usize << m {
            if mask.count_ones() as usize <= max {
                out.push((0..m).filter(|i| mask >> i & 1 == 1).collect());
            }
        }
        out
    }
    fn go(ctx: &OracleContext, per: &[Vec<Vec<usize>>], acc: &mut Vec<Vec<usize>>, best: &mut (f64, f64, usize)) {
        if acc.len() == per.len() {
            let h = ctx.evaluate(acc).unwrap();
            best.0 = best.0.min(h);
            best.1 = best.1.max(h);
            best.2 += 1;
            return;
        }
        for s in &per[acc.len()] {
            acc.push(s.clone());
            go(ctx, per, acc, best);
            acc.pop();
        }
    }
    let m = ctx.num_sensors();
    let per: Vec<_> = budgets.iter().map(|&b| subsets(m, b)).collect();
    let mut best = (f64::INFINITY, f64::NEG_INFINITY, 0);
    go(ctx, &per, &mut vec![], &mut best);
    best
}

#[test]
fn enumeration_agrees_with_independent_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for t in 0..9 {
        let m = 2 + t % 3;
        let ctx = random_instance(PriorKind::ALL[t % 3], 2, 2, m, &mut rng).unwrap();
        let budgets = [rng.random_range(0..=m), rng.random_range(0..=m)];
        let res = exhaustive_optimum(&ctx, &budgets, EnumerationOptions::default()).unwrap();
        let (opt, max, count) = brute_force(&ctx, &budgets);
        assert_eq!(res.num_enumerated, count);
        assert!((res.opt_cost - opt).abs() < 1e-12);
        assert!((res.max_cost - max).abs() < 1e-12);
        assert!((ctx.evaluate(res.opt_schedule.sets()).unwrap() - opt).abs() < 1e-12);
        // Monotonicity puts an optimum at full budget.
        let exact = exhaustive_optimum(
            &ctx,
            &budgets,
            EnumerationOptions { mode: EnumerationMode::ExactBudget, ..Default::default() },
        )
        .unwrap();
        assert!((exact.opt_cost - opt).abs() < 1e-9);
    }
}

#[test]
fn full_budget_optimum_is_everything() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let ctx = random_instance(PriorKind::GaussMarkov, 1, 2, 3, &mut rng).unwrap();
    let res = exhaustive_optimum(&ctx, &[3, 3], EnumerationOptions::default()).unwrap();
    let all = ctx.evaluate(&[vec![0, 1, 2], vec![0, 1, 2]]).unwrap();
    assert!((res.opt_cost - all).abs() < 1e-12);
    assert!((res.max_cost - ctx.empty_value()).abs() < 1e-12);
}

#[test]
fn receding_mode_relinearizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let prior = build_tracking_prior(2, 3, 1.0, 0.3)
        .unwrap()
        .with_mean(DVector::from_vec(vec![1.0, 2.0, 1.5, 2.5, 2.0, 3.0]))
        .unwrap();
    let suite = SensorSuite::new(vec![
        builtin_sensor(SensorKind::Range { anchor: DVector::from_vec(vec![5.0, 0.0]) }, DMatrix::identity(1, 1) * 0.1)
            .unwrap(),
        builtin_sensor(SensorKind::Bearing { anchor: [-3.0, 1.0], state_dim: 2 }, DMatrix::identity(1, 1) * 0.05)
            .unwrap(),
        builtin_sensor(SensorKind::LinearCoordinate { axis: 0, state_dim: 2 }, DMatrix::identity(1, 1)).unwrap(),
    ])
    .unwrap();
    let out = receding_greedy_schedule(&prior, &suite, &[1, 2, 1], GreedyOptions::default(), &mut rng).unwrap();
    assert_eq!(out.linearizations.len(), 3);
    assert_eq!(&out.linearizations[0], prior.mean());
    assert_ne!(&out.linearizations[1], prior.mean());
    assert_eq!(out.schedule.num_selected(), 4);
    assert_eq!(out.measurements[1].len(), 2);
}
