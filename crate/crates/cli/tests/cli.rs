use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use sensched::config::{Budgets, Noise, SchedulerKind};
use sensched::{execute, prepare, CliError, Overrides, Scenario, Verb};
use sensched_core::process_models::build_tracking_prior;
use sensched_core::scheduler::greedy_schedule;
use sensched_core::sensing::builtin_sensor;
use sensched_core::{GreedyOptions, OracleContext, SensorKind, SensorSuite};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

fn run_in(dir: &Path, verb: Verb, config: &Path) -> sensched::Result<PathBuf> {
    let overrides = Overrides {
        out: Some(dir.to_path_buf()),
        ..Default::default()
    };
    execute(verb, &prepare(verb, config, &overrides)?)
}

#[test]
fn minimal_run_matches_library_call() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), Verb::Run, &scenarios().join("minimal.toml")).unwrap();
    let rows = read_csv(&out.join("results.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "greedy");

    let prior = build_tracking_prior(1, 2, 1.0, 0.5).unwrap();
    let suite = SensorSuite::new(vec![builtin_sensor(
        SensorKind::LinearCoordinate { axis: 0, state_dim: 1 },
        sensched_core::nalgebra::DMatrix::from_element(1, 1, 0.5),
    )
    .unwrap()])
    .unwrap();
    let ctx = OracleContext::new(prior, suite).unwrap();
    let (_, trace) = greedy_schedule(&ctx, &[1, 1], GreedyOptions::default()).unwrap();
    let expected = sensched::fmt::g12(trace.final_entropy().unwrap());
    assert_eq!(rows[0][1], expected);

    let trace_rows = read_csv(&out.join("trace.csv"));
    assert_eq!(trace_rows.len(), 2);
    assert!(out.join("timings.csv").exists());
    assert!(out.join("manifest.toml").exists());
}

#[test]
fn exhaustive_run_reports_bound_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), Verb::Run, &scenarios().join("planar_tracking.toml")).unwrap();
    let rows = read_csv(&out.join("results.csv"));
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["greedy", "lazy", "random", "exhaustive"]);
    for r in &rows {
        let ratio: f64 = r[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&ratio));
        if r[0] != "random" {
            assert!(ratio <= 0.5, "{r:?}");
        }
    }
    assert_eq!(rows[0][5], rows[1][5], "lazy and eager agree");
}

#[test]
fn manifest_reruns_to_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = run_in(&tmp.path().join("a"), Verb::Run, &scenarios().join("gauss_markov_receding.toml")).unwrap();
    let again = run_in(&tmp.path().join("b"), Verb::Run, &first.join("manifest.toml")).unwrap();
    for f in ["results.csv", "trace.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn resolution_is_idempotent_and_explicit() {
    let path = scenarios().join("certify_small.toml");
    let once = Scenario::load(&path).unwrap().resolve(Verb::Run).unwrap();
    let text = once.to_toml().unwrap();
    let twice = Scenario::from_toml(&text, &path).unwrap().resolve(Verb::Run).unwrap();
    assert_eq!(once, twice);
    assert!(once.generated_sensors.is_none());
    assert_eq!(once.sensors.len(), 4);
    assert!(once.sensors.iter().all(|s| matches!(s.noise, Noise::Covariance(_)) && s.label.is_some()));
    assert_eq!(once.budgets, Budgets::PerStep(vec![2, 2, 2]));
    assert_eq!(once.execution.reps, Some(1));
    assert_eq!(once.modes.schedulers, vec![SchedulerKind::Greedy]);
}

fn config_error(text: &str) -> String {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "bad.toml", text);
    match prepare(Verb::Run, &p, &Overrides::default()) {
        Err(CliError::Config { field, .. }) => field,
        other => panic!("expected a config error, got {other:?}"),
    }
}

const PRIOR: &str = r#"
[prior]
kind = "tracking"
state_dim = 2
horizon = 3
marginal_var = 1.0
neighbor_corr = 0.2
"#;

#[test]
fn config_errors_name_the_field() {
    let sensor = "\n[[sensors]]\nkind = \"linear_coordinate\"\naxis = 0\nnoise = 1.0\n";
    assert_eq!(config_error(&format!("budgets = [1, 1]\n{PRIOR}{sensor}")), "budgets");
    assert_eq!(config_error(&format!("budgets = 2\n{PRIOR}{sensor}")), "budgets[0]");
    assert_eq!(
        config_error(&format!("budgets = 1\n{PRIOR}\n[[sensors]]\nkind = \"linear_coordinate\"\naxis = 5\nnoise = 1.0\n")),
        "sensors[0].axis"
    );
    assert_eq!(
        config_error(&format!("budgets = 1\n{PRIOR}\n[[sensors]]\nkind = \"range\"\nanchor = [1.0]\nnoise = 1.0\n")),
        "sensors[0].anchor"
    );
    assert_eq!(
        config_error(&format!("budgets = 1\n{PRIOR}\n[[sensors]]\nkind = \"range\"\nanchor = [1.0, 2.0]\nnoise = -1.0\n")),
        "sensors[0].noise"
    );
    assert_eq!(config_error(&format!("budgets = 1\n{PRIOR}")), "sensors");
    assert_eq!(
        config_error(&format!("budgets = 1\n[modes]\nschedulers = [\"greedy\", \"greedy\"]\n{PRIOR}{sensor}")),
        "modes.schedulers"
    );
}

#[test]
fn parse_errors_and_indefinite_priors_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "typo.toml", &format!("budget = 1\n{PRIOR}"));
    assert!(matches!(prepare(Verb::Run, &p, &Overrides::default()), Err(CliError::Parse { .. })));

    let bad = PRIOR.replace("0.2", "0.9");
    let p = write(
        tmp.path(),
        "indef.toml",
        &format!("budgets = 1\n{bad}\n[[sensors]]\nkind = \"linear_coordinate\"\naxis = 0\nnoise = 1.0\n"),
    );
    let scn = prepare(Verb::Run, &p, &Overrides::default()).unwrap();
    let err = execute(Verb::Run, &scn).unwrap_err();
    assert!(matches!(err, CliError::Compute { .. }), "{err}");
}

#[test]
fn bench_writes_one_row_per_repetition() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "bench.toml",
        r#"
budgets = 1
[bench]
horizons = [3, 6]
[prior]
kind = "gauss_markov"
horizon = 1
a = [[0.9]]
q = [[0.2]]
sigma0 = [[1.0]]
mu0 = [1.0]
[[sensors]]
kind = "linear_coordinate"
axis = 0
noise = 0.5
[[sensors]]
kind = "quadratic"
weight = [[1.0]]
noise = 0.5
"#,
    );
    let overrides = Overrides {
        out: Some(tmp.path().join("out")),
        reps: Some(5),
        threads: Some(1),
    };
    let scn = prepare(Verb::Bench, &p, &overrides).unwrap();
    assert_eq!(scn.bench.budget, Some(1));
    let out = execute(Verb::Bench, &scn).unwrap();
    let rows = read_csv(&out.join("timings.csv"));
    assert_eq!(rows.len(), 2 * 2 * 5);
    let summary = read_csv(&out.join("bench_summary.csv"));
    assert_eq!(summary.len(), 4);
    assert!(summary.iter().filter(|r| r[1] == "6").all(|r| !r[4].is_empty()));
}

#[test]
fn certify_writes_certificate_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), Verb::Certify, &scenarios().join("certify_small.toml")).unwrap();
    let cert = read_csv(&out.join("certificate.csv"));
    assert_eq!(cert[0][4], "pass");
    assert_eq!(cert[0][5], "1331");
    assert_eq!(read_csv(&out.join("full_table.csv")).len(), 1331);
}

#[test]
fn binary_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scenarios().join("planar_tracking.toml");
    let bin = env!("CARGO_BIN_EXE_sensched");
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let status = Command::new(bin)
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(tmp.path().join(name))
            .args(["--threads", threads, "--reps", "2"])
            .status()
            .unwrap();
        assert!(status.success());
    }
    for f in ["results.csv", "trace.csv"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap()
        );
    }
    let timings = read_csv(&tmp.path().join("a/timings.csv"));
    assert_eq!(timings.len(), 4 * 2);

    let missing = Command::new(bin).args(["run", "--config", "/nonexistent.toml"]).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("reading /nonexistent.toml"));
}
