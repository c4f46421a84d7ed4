use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rdsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdsm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn obstacle_run(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--objective",
        "linear-gradient-obstacle",
        "--x0=-0.75,0.35",
        "--max-iter",
        "50",
        "--max-eval",
        "100",
        "--out-dir",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    rdsm(&args)
}

#[test]
fn run_prints_summary_and_writes_archives() {
    let dir = tempfile::tempdir().unwrap();
    let o = obstacle_run(dir.path(), &["--emit-trajectory"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("algorithm    rdsm"));
    assert!(text.contains("evaluations  "));
    for name in [
        "SimplexHistory.txt",
        "PointsDatabase.txt",
        "ReevaluationHistory.txt",
        "LearningCurve.csv",
        "SimplexTrajectory.svg",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn missing_start_point_is_a_configuration_error() {
    let o = rdsm(&["run", "--objective", "linear-gradient"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--x0"));
}

#[test]
fn bad_values_are_rejected() {
    assert_eq!(rdsm(&["run", "--x0=0.1,0.1", "--rho", "1.5"]).status.code(), Some(2));
    assert_eq!(
        rdsm(&["run", "--x0=0.1,0.1", "--noise", "poisson:1"]).status.code(),
        Some(2)
    );
    assert_eq!(rdsm(&["run", "--x0=0.1,0.1,0.1"]).status.code(), Some(2));
    assert_eq!(rdsm(&["run", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    fs::write(&file, "x").unwrap();
    let o = obstacle_run(&file, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let noise = ["--noise", "uniform:0,0.02", "--seed", "7"];
    let first = obstacle_run(dir.path(), &noise);
    let files: Vec<Vec<u8>> = [
        "SimplexHistory.txt",
        "PointsDatabase.txt",
        "ReevaluationHistory.txt",
        "LearningCurve.csv",
    ]
    .iter()
    .map(|n| fs::read(dir.path().join(n)).unwrap())
    .collect();
    let second = obstacle_run(dir.path(), &noise);
    assert_eq!(first.stdout, second.stdout);
    for (n, bytes) in [
        "SimplexHistory.txt",
        "PointsDatabase.txt",
        "ReevaluationHistory.txt",
        "LearningCurve.csv",
    ]
    .iter()
    .zip(files)
    {
        assert_eq!(fs::read(dir.path().join(n)).unwrap(), bytes, "{n}");
    }
}

#[test]
fn saved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    let a = obstacle_run(
        &out,
        &[
            "--theta-e",
            "0.2",
            "--init-rule",
            "domain",
            "--save-config",
            cfg.to_str().unwrap(),
        ],
    );
    assert!(a.status.success(), "{}", stderr(&a));
    let text = fs::read_to_string(&cfg).unwrap();
    assert!(text.contains("theta-e = 0.2"), "{text}");
    let b = rdsm(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(b.status.success(), "{}", stderr(&b));
    assert_eq!(stdout(&a), stdout(&b));
    // Flags override the file.
    let c = rdsm(&["run", "--config", cfg.to_str().unwrap(), "--algorithm", "dsm"]);
    assert!(stdout(&c).contains("algorithm    dsm"));
}

#[test]
fn repeat_writes_a_summary_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = rdsm(&[
        "run",
        "--x0=-0.75,0.35",
        "--noise",
        "gaussian:0.005",
        "--max-iter",
        "30",
        "--repeat",
        "4",
        "--seed",
        "10",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("Summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("run,seed,x_1,x_2,J,iters,evals"));
    let seeds: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds, ["10", "11", "12", "13"]);
}

#[test]
fn reproduce_runs_only_the_selected_scenario() {
    let o = rdsm(&["reproduce", "--only", "2d-obstacle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("2d-obstacle"));
    assert!(!text.contains("rosenbrock-5d"));
    assert!(
        text.lines()
            .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
            .count()
            == 3
    );
    assert_eq!(rdsm(&["reproduce", "--only", "nope"]).status.code(), Some(2));
}
