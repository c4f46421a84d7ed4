//! Seeded replication studies and the fixed reproduction suite.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objective::{NoiseModel, ObjectiveSpec};
use crate::optimizer::run;
use crate::reporting::format_float;
use crate::state::{Algorithm, Operation, OptimizerConfig, RunRecord, StopCriteria};

pub const START_2D: [f64; 2] = [-0.75, 0.35];
pub const ROSENBROCK_START: [f64; 5] = [-0.9598, -1.66907, -0.19862, -3.61086, -3.77915];
pub const NOISE_MODELS: [NoiseModel; 4] = [
    NoiseModel::Uniform { low: 0.0, high: 0.01 },
    NoiseModel::Uniform { low: 0.0, high: 0.02 },
    NoiseModel::Gaussian { variance: 0.005 },
    NoiseModel::Gaussian { variance: 0.01 },
];
pub const NOISE_REPEATS: usize = 20;

/// 50 iterations, 100 evaluations.
pub fn config_2d(algorithm: Algorithm) -> OptimizerConfig {
    OptimizerConfig {
        algorithm,
        stop: StopCriteria::budget(50, 100),
        ..Default::default()
    }
}

/// 50 iterations, no evaluation cap.
pub fn config_noise(algorithm: Algorithm) -> OptimizerConfig {
    OptimizerConfig {
        algorithm,
        stop: StopCriteria::budget(50, usize::MAX),
        ..Default::default()
    }
}

/// 500 iterations, both thresholds 1e-5.
pub fn config_rosenbrock(algorithm: Algorithm) -> OptimizerConfig {
    let mut cfg = OptimizerConfig {
        algorithm,
        stop: StopCriteria::budget(500, usize::MAX),
        ..Default::default()
    };
    cfg.coefficients.edge_threshold = 1e-5;
    cfg.coefficients.volume_threshold = 1e-5;
    cfg
}

/// 5D Rosenbrock with the cost scaled by 1e-4 during optimization.
pub fn rosenbrock_5d() -> ObjectiveSpec {
    ObjectiveSpec::builtin("rosenbrock", Some(5))
        .and_then(|s| s.with_scale(1e-4))
        .expect("builtin objective")
}

/// Compact outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub endpoint: Vec<f64>,
    /// Noise-free cost at the endpoint.
    pub true_cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

impl RunSummary {
    pub fn from_record(record: &RunRecord, spec: &ObjectiveSpec, seed: u64) -> Result<Self> {
        Ok(RunSummary {
            seed,
            endpoint: record.endpoint().to_vec(),
            true_cost: spec.true_value(record.endpoint())?,
            iterations: record.iterations,
            evaluations: record.total_evaluations(),
        })
    }
}

/// Mean and sample variance (0 for a single value).
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Statistics over R runs with seeds `seed..seed+R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub label: String,
    pub algorithm: Algorithm,
    pub runs: Vec<RunSummary>,
    pub endpoint_mean: Vec<f64>,
    pub endpoint_variance: Vec<f64>,
    pub cost_mean: f64,
    pub cost_variance: f64,
}

impl ReplicationSummary {
    pub fn from_runs(label: impl Into<String>, algorithm: Algorithm, runs: Vec<RunSummary>) -> Result<Self> {
        let Some(first) = runs.first() else {
            return Err(Error::Config("a replication study needs at least one run".into()));
        };
        let n = first.endpoint.len();
        let (endpoint_mean, endpoint_variance) = (0..n)
            .map(|i| mean_variance(&runs.iter().map(|r| r.endpoint[i]).collect::<Vec<_>>()))
            .unzip();
        let (cost_mean, cost_variance) = mean_variance(&runs.iter().map(|r| r.true_cost).collect::<Vec<_>>());
        Ok(ReplicationSummary {
            label: label.into(),
            algorithm,
            runs,
            endpoint_mean,
            endpoint_variance,
            cost_mean,
            cost_variance,
        })
    }

    pub fn endpoint_std(&self) -> Vec<f64> {
        self.endpoint_variance.iter().map(|v| v.sqrt()).collect()
    }

    pub fn cost_std(&self) -> f64 {
        self.cost_variance.sqrt()
    }

    pub fn mean_evaluations(&self) -> f64 {
        self.runs.iter().map(|r| r.evaluations as f64).sum::<f64>() / self.runs.len() as f64
    }

    /// Header `run,seed,x_1..x_n,J,iters,evals`, one row per run.
    pub fn to_csv(&self) -> String {
        let n = self.endpoint_mean.len();
        let xs: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
        let mut out = format!("run,seed,{},J,iters,evals\n", xs.join(","));
        for (i, r) in self.runs.iter().enumerate() {
            let coords: Vec<String> = r.endpoint.iter().map(|&x| format_float(x)).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                i + 1,
                r.seed,
                coords.join(","),
                format_float(r.true_cost),
                r.iterations,
                r.evaluations
            );
        }
        out
    }
}

impl fmt::Display for ReplicationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pm = |m: f64, v: f64| format!("{m:.4} \u{b1} {v:.1e}");
        let end: Vec<String> = self
            .endpoint_mean
            .iter()
            .zip(&self.endpoint_variance)
            .map(|(&m, &v)| pm(m, v))
            .collect();
        write!(
            f,
            "{:<24} {:<5} R={:<3} endpoint ({}) J {} (std {:.1e}) evals {:.1}",
            self.label,
            self.algorithm,
            self.runs.len(),
            end.join(", "),
            pm(self.cost_mean, self.cost_variance),
            self.cost_std(),
            self.mean_evaluations()
        )
    }
}

/// Runs `repeats` seeded optimizations in parallel and summarizes them.
pub fn run_replications(
    label: &str,
    config: &OptimizerConfig,
    spec: &ObjectiveSpec,
    x0: &[f64],
    seed: u64,
    repeats: usize,
) -> Result<ReplicationSummary> {
    if repeats == 0 {
        return Err(Error::Config("repeat count must be >= 1".into()));
    }
    let runs = (0..repeats as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed + k;
            RunSummary::from_record(&run(config, spec, x0, s)?, spec, s)
        })
        .collect::<Result<Vec<_>>>()?;
    ReplicationSummary::from_runs(label, config.algorithm, runs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    NoObstacle2d,
    Obstacle2d,
    Noise,
    Rosenbrock5d,
    ThresholdCalibration,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::NoObstacle2d,
        Scenario::Obstacle2d,
        Scenario::Noise,
        Scenario::Rosenbrock5d,
        Scenario::ThresholdCalibration,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::NoObstacle2d => "2d-no-obstacle",
            Scenario::Obstacle2d => "2d-obstacle",
            Scenario::Noise => "noise",
            Scenario::Rosenbrock5d => "rosenbrock-5d",
            Scenario::ThresholdCalibration => "threshold-calibration",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|sc| sc.label() == s).ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.label()).collect();
            Error::InvalidInput(format!("unknown scenario `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// One pass/fail row of the reproduction table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub scenario: Scenario,
    pub name: String,
    pub measured: String,
    /// `None` for informational rows.
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub replications: Vec<ReplicationSummary>,
}

impl Report {
    fn check(&mut self, scenario: Scenario, name: impl Into<String>, measured: String, passed: bool) {
        self.checks.push(Check {
            scenario,
            name: name.into(),
            measured,
            passed: Some(passed),
        });
    }

    fn info(&mut self, scenario: Scenario, name: impl Into<String>, measured: String) {
        self.checks.push(Check {
            scenario,
            name: name.into(),
            measured,
            passed: None,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.passed == Some(false)).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.replications.is_empty() {
            writeln!(f, "replications (mean \u{b1} variance):")?;
            for r in &self.replications {
                writeln!(f, "  {r}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "{:<6} {:<22} {:<48} measured", "status", "scenario", "check")?;
        for c in &self.checks {
            let status = match c.passed {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "info",
            };
            writeln!(
                f,
                "{status:<6} {:<22} {:<48} {}",
                c.scenario.label(),
                c.name,
                c.measured
            )?;
        }
        let total = self.checks.iter().filter(|c| c.passed.is_some()).count();
        write!(f, "{} of {total} checks passed", total - self.failures())
    }
}

fn corrections(record: &RunRecord) -> usize {
    record
        .steps
        .iter()
        .filter(|s| s.operation == Operation::DegeneracyCorrection)
        .count()
}

fn fmt_point(p: &[f64]) -> String {
    let xs: Vec<String> = p.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", xs.join(", "))
}

fn no_obstacle(report: &mut Report) -> Result<()> {
    let sc = Scenario::NoObstacle2d;
    let spec = ObjectiveSpec::builtin("linear-gradient", None)?;
    let r = run(&config_2d(Algorithm::Dsm), &spec, &START_2D, 0)?;
    let end = r.endpoint();
    let dist = (end[0] - 1.0).abs().max((end[1] + 1.0).abs());
    report.check(
        sc,
        "dsm endpoint within 0.05 of (1,-1)",
        format!("{} in {} evals", fmt_point(end), r.total_evaluations()),
        dist <= 0.05 && r.total_evaluations() <= 100,
    );
    report.check(
        sc,
        "dsm J <= 1e-3",
        format!("{:.4e}", r.best_cost()),
        r.best_cost() <= 1e-3,
    );
    Ok(())
}

fn obstacle(report: &mut Report) -> Result<()> {
    let sc = Scenario::Obstacle2d;
    let spec = ObjectiveSpec::builtin("linear-gradient-obstacle", None)?;
    let dsm = run(&config_2d(Algorithm::Dsm), &spec, &START_2D, 0)?;
    report.check(
        sc,
        "dsm J >= 0.1",
        format!("{:.4} at {}", dsm.best_cost(), fmt_point(dsm.endpoint())),
        dsm.best_cost() >= 0.1,
    );
    let rdsm = run(&config_2d(Algorithm::Rdsm), &spec, &START_2D, 0)?;
    report.check(
        sc,
        "rdsm J <= 0.05",
        format!("{:.4} at {}", rdsm.best_cost(), fmt_point(rdsm.endpoint())),
        rdsm.best_cost() <= 0.05,
    );
    let n = corrections(&rdsm);
    report.check(sc, "rdsm logs >= 1 degeneracy correction", n.to_string(), n >= 1);
    Ok(())
}

fn noise(report: &mut Report, seed: u64) -> Result<()> {
    let sc = Scenario::Noise;
    for model in NOISE_MODELS {
        let spec = ObjectiveSpec::builtin("linear-gradient", None)?.with_noise(Some(model))?;
        let label = format!("linear-gradient {model}");
        let dsm = run_replications(
            &label,
            &config_noise(Algorithm::Dsm),
            &spec,
            &START_2D,
            seed,
            NOISE_REPEATS,
        )?;
        let rdsm = run_replications(
            &label,
            &config_noise(Algorithm::Rdsm),
            &spec,
            &START_2D,
            seed,
            NOISE_REPEATS,
        )?;
        let (d, r) = (dsm.cost_mean, rdsm.cost_mean);
        if model == (NoiseModel::Uniform { low: 0.0, high: 0.02 }) {
            report.check(
                sc,
                format!("{model}: rdsm mean J <= 0.05"),
                format!("{r:.4}"),
                r <= 0.05,
            );
            report.check(sc, format!("{model}: dsm mean J >= 0.05"), format!("{d:.4}"), d >= 0.05);
        }
        report.check(
            sc,
            format!("{model}: rdsm mean J < dsm mean J"),
            format!("{r:.4} vs {d:.4}"),
            r < d,
        );
        report.replications.push(dsm);
        report.replications.push(rdsm);
    }
    Ok(())
}

fn rosenbrock(report: &mut Report) -> Result<()> {
    let sc = Scenario::Rosenbrock5d;
    let spec = rosenbrock_5d();
    let dsm = run(&config_rosenbrock(Algorithm::Dsm), &spec, &ROSENBROCK_START, 0)?;
    let rdsm = run(&config_rosenbrock(Algorithm::Rdsm), &spec, &ROSENBROCK_START, 0)?;
    let near_ones = |p: &[f64]| p.iter().all(|x| (x - 1.0).abs() <= 1e-2);
    report.check(
        sc,
        "rdsm endpoint within 1e-2 of ones",
        fmt_point(rdsm.endpoint()),
        near_ones(rdsm.endpoint()),
    );
    report.check(
        sc,
        "rdsm J <= 1e-6",
        format!("{:.3e}", rdsm.best_cost()),
        rdsm.best_cost() <= 1e-6,
    );
    report.check(
        sc,
        "dsm endpoint not within 1e-2 of ones",
        format!("{} J {:.3e}", fmt_point(dsm.endpoint()), dsm.best_cost()),
        !near_ones(dsm.endpoint()),
    );
    report.check(
        sc,
        "rdsm evals >= dsm evals",
        format!("{} vs {}", rdsm.total_evaluations(), dsm.total_evaluations()),
        rdsm.total_evaluations() >= dsm.total_evaluations(),
    );
    Ok(())
}

fn calibration(report: &mut Report, seed: u64) -> Result<()> {
    let sc = Scenario::ThresholdCalibration;
    let model = NoiseModel::Uniform { low: 0.0, high: 0.02 };
    let spec = ObjectiveSpec::builtin("linear-gradient", None)?.with_noise(Some(model))?;
    for factor in [1.5, 2.0] {
        let cfg = OptimizerConfig {
            reevaluation_factor: factor,
            ..config_noise(Algorithm::Rdsm)
        };
        let s = run_replications("calibration", &cfg, &spec, &START_2D, seed, NOISE_REPEATS)?;
        report.info(
            sc,
            format!("{model}: reevaluation at {factor}n"),
            format!("mean J {:.4}, mean evals {:.1}", s.cost_mean, s.mean_evaluations()),
        );
    }
    Ok(())
}

/// Runs the selected scenarios (all when `only` is empty). Noise studies use
/// seeds `seed..seed+20`; the deterministic scenarios use seed 0.
pub fn reproduce(only: &[Scenario], seed: u64) -> Result<Report> {
    let mut report = Report::default();
    for sc in Scenario::ALL {
        if !only.is_empty() && !only.contains(&sc) {
            continue;
        }
        match sc {
            Scenario::NoObstacle2d => no_obstacle(&mut report)?,
            Scenario::Obstacle2d => obstacle(&mut report)?,
            Scenario::Noise => noise(&mut report, seed)?,
            Scenario::Rosenbrock5d => rosenbrock(&mut report)?,
            Scenario::ThresholdCalibration => calibration(&mut report, seed)?,
        }
    }
    Ok(report)
}
