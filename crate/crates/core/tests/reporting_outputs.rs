use std::fs;
use std::path::Path;

use rdsm::objective::{NoiseModel, ObjectiveSpec};
use rdsm::optimizer::run;
use rdsm::reporting::{
    export_learning_curve, learning_curve, write_outputs, LEARNING_CURVE_CSV, POINTS_DATABASE, POINTS_DATABASE_DAT,
    REEVALUATION_HISTORY, SIMPLEX_HISTORY, SIMPLEX_HISTORY_DAT, SIMPLEX_TRAJECTORY_SVG,
};
use rdsm::state::{Algorithm, OptimizerConfig, RunRecord, StopCriteria};

const START: [f64; 2] = [-0.75, 0.35];

fn record(objective: &str, algorithm: Algorithm, noise: Option<NoiseModel>, seed: u64) -> RunRecord {
    let spec = ObjectiveSpec::builtin(objective, None)
        .unwrap()
        .with_noise(noise)
        .unwrap();
    let cfg = OptimizerConfig {
        algorithm,
        stop: StopCriteria::budget(50, 100),
        ..Default::default()
    };
    run(&cfg, &spec, &START, seed).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn rows(text: &str) -> usize {
    text.lines().count() - 1
}

#[test]
fn archives_have_one_row_per_record_entry() {
    let rec = record("linear-gradient-obstacle", Algorithm::Rdsm, None, 0);
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&rec, dir.path(), false).unwrap();
    assert_eq!(rows(&read(dir.path(), SIMPLEX_HISTORY)), rec.steps.len());
    assert_eq!(rows(&read(dir.path(), POINTS_DATABASE)), rec.points.len());
    assert_eq!(rows(&read(dir.path(), REEVALUATION_HISTORY)), rec.reevaluations.len());
    assert_eq!(rows(&read(dir.path(), LEARNING_CURVE_CSV)), rec.total_evaluations());
    assert_eq!(read(dir.path(), SIMPLEX_HISTORY), read(dir.path(), SIMPLEX_HISTORY_DAT));
    assert_eq!(read(dir.path(), POINTS_DATABASE), read(dir.path(), POINTS_DATABASE_DAT));
    assert!(!dir.path().join(SIMPLEX_TRAJECTORY_SVG).exists());
    assert!(read(dir.path(), SIMPLEX_HISTORY).contains("degeneracy-correction"));
}

#[test]
fn obstacle_penalty_is_printed_in_pinned_format() {
    let rec = record("linear-gradient-obstacle", Algorithm::Dsm, None, 0);
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&rec, dir.path(), true).unwrap();
    let db = read(dir.path(), POINTS_DATABASE);
    let penalized = db
        .lines()
        .skip(1)
        .filter(|l| l.split('\t').nth(3) == Some("1.000000000e3"))
        .count();
    let inside = rec
        .points
        .iter()
        .filter(|p| p.coords[0] < 0.0 && p.coords[1] < 0.0)
        .count();
    assert!(inside > 0);
    assert_eq!(penalized, inside);
    assert!(read(dir.path(), SIMPLEX_TRAJECTORY_SVG).starts_with("<svg"));
}

#[test]
fn identical_runs_write_identical_bytes() {
    let noise = Some(NoiseModel::Gaussian { variance: 0.005 });
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_outputs(&record("linear-gradient", Algorithm::Rdsm, noise, 9), a.path(), true).unwrap();
    write_outputs(&record("linear-gradient", Algorithm::Rdsm, noise, 9), b.path(), true).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name:?}"
        );
    }
    let leftovers = fs::read_dir(a.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension() == Some("tmp".as_ref()));
    assert_eq!(leftovers.count(), 0);
}

#[test]
fn noisy_costs_stay_within_noise_of_true_costs() {
    let spec = ObjectiveSpec::builtin("linear-gradient", None).unwrap();
    let rec = record(
        "linear-gradient",
        Algorithm::Rdsm,
        Some(NoiseModel::Uniform { low: 0.0, high: 0.02 }),
        4,
    );
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&rec, dir.path(), false).unwrap();
    for line in read(dir.path(), POINTS_DATABASE).lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let x: Vec<f64> = f[1..3].iter().map(|s| s.parse().unwrap()).collect();
        let j: f64 = f[3].parse().unwrap();
        let truth = spec.true_value(&x).unwrap();
        if truth.is_infinite() {
            // Outside the domain.
            assert_eq!(j, truth, "{line}");
            continue;
        }
        assert!((j - truth).abs() <= 0.02 + 1e-9, "{line}");
    }
}

#[test]
fn learning_curve_tracks_best_so_far() {
    let rec = record(
        "linear-gradient",
        Algorithm::Rdsm,
        Some(NoiseModel::Uniform { low: 0.0, high: 0.01 }),
        1,
    );
    let curve = learning_curve(&rec);
    assert_eq!(curve.len(), rec.total_evaluations());
    let mut best = f64::INFINITY;
    for (k, (i, j, b)) in curve.iter().enumerate() {
        assert_eq!(*i, k + 1);
        best = best.min(*j);
        assert_eq!(*b, best);
    }
    let dir = tempfile::tempdir().unwrap();
    let svg = export_learning_curve(&rec, &dir.path().join("curve.csv")).unwrap();
    assert_eq!(svg, dir.path().join("curve.svg"));
    assert!(fs::read_to_string(svg).unwrap().contains("<path d="));
}

#[test]
fn scaled_runs_report_objective_units() {
    let base = ObjectiveSpec::builtin("rosenbrock", Some(3)).unwrap();
    let cfg = OptimizerConfig {
        stop: StopCriteria::budget(30, usize::MAX),
        ..Default::default()
    };
    let plain = run(&cfg, &base, &[-1.0, 0.5, 2.0], 0).unwrap();
    let scaled = run(&cfg, &base.clone().with_scale(1e-4).unwrap(), &[-1.0, 0.5, 2.0], 0).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_outputs(&plain, a.path(), false).unwrap();
    write_outputs(&scaled, b.path(), false).unwrap();
    let first_j = |dir: &Path| -> f64 {
        let db = read(dir, POINTS_DATABASE);
        db.lines().nth(1).unwrap().split('\t').nth(4).unwrap().parse().unwrap()
    };
    let (ja, jb) = (first_j(a.path()), first_j(b.path()));
    assert!((ja - jb).abs() <= 1e-9 * ja.abs(), "{ja} vs {jb}");
}
