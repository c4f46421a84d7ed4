//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{reproduce, run_replications, Scenario};
use crate::objective::{NoiseModel, ObjectiveSpec};
use crate::optimizer::run;
use crate::reporting::{format_float, write_outputs};
use crate::state::{Algorithm, InitialRule, OptimizerConfig, Termination};

#[derive(Debug, Parser)]
#[command(
    name = "rdsm",
    version,
    about = "Downhill simplex optimizer with degeneracy correction and reevaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Optimize one objective (or a seeded batch with --repeat).
    Run(RunArgs),
    /// Run the fixed experiment suite and print a pass/fail table.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// key = value file with any of the flags below; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the effective configuration to this file.
    #[arg(long)]
    pub save_config: Option<PathBuf>,
    /// dsm or rdsm.
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    /// linear-gradient, linear-gradient-obstacle or rosenbrock.
    #[arg(long)]
    pub objective: Option<String>,
    /// Objective dimension (defaults to the length of --x0).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Start point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub max_eval: Option<usize>,
    /// Stop once the spread of vertex costs drops to this value.
    #[arg(long)]
    pub cost_tol: Option<f64>,
    /// Stop once every vertex lies within this distance of the best one.
    #[arg(long)]
    pub simplex_tol: Option<f64>,
    /// Reflection coefficient.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Expansion coefficient.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Contraction coefficient.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Shrink coefficient.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Edge degeneracy threshold (0 disables).
    #[arg(long)]
    pub theta_e: Option<f64>,
    /// Volume degeneracy threshold (0 disables).
    #[arg(long)]
    pub theta_v: Option<f64>,
    /// Initial simplex coefficient.
    #[arg(long)]
    pub init_coeff: Option<f64>,
    /// auto, relative or domain.
    #[arg(long)]
    pub init_rule: Option<InitialRule>,
    /// Reevaluate vertices whose counter reaches ceil(factor * n); inf disables.
    #[arg(long)]
    pub reevaluation_factor: Option<f64>,
    /// uniform:a,b or gaussian:variance.
    #[arg(long)]
    pub noise: Option<NoiseModel>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of seeded runs (seeds seed, seed+1, ...).
    #[arg(long)]
    pub repeat: Option<usize>,
    /// Multiplier applied to the cost during optimization.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also write SimplexTrajectory.svg (2D only).
    #[arg(long)]
    pub emit_trajectory: bool,
}

#[derive(Debug, Default, Args)]
pub struct ReproduceArgs {
    /// Restrict to these scenarios (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<Scenario>,
    /// First seed of the noise replications.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Fully resolved settings of a `run` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub objective: String,
    pub dim: Option<usize>,
    pub x0: Vec<f64>,
    pub optimizer: OptimizerConfig,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
    pub repeat: usize,
    pub scale: f64,
    pub out_dir: PathBuf,
    pub emit_trajectory: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            objective: "linear-gradient".into(),
            dim: None,
            x0: Vec::new(),
            optimizer: OptimizerConfig::default(),
            noise: None,
            seed: 0,
            repeat: 1,
            scale: 1.0,
            out_dir: PathBuf::from("output"),
            emit_trajectory: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value `{value}` for `{key}`: {e}")))
}

fn parse_point(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|s| parse_value(key, s.trim())).collect()
}

fn parse_optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if value == "none" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn show_optional<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), ToString::to_string)
}

impl ExperimentConfig {
    /// Applies one `key = value` setting. Keys are the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.optimizer.coefficients;
        let stop = &mut self.optimizer.stop;
        match key {
            "algorithm" => self.optimizer.algorithm = value.parse()?,
            "objective" => self.objective = value.to_string(),
            "dim" => self.dim = parse_optional(key, value)?,
            "x0" => self.x0 = parse_point(key, value)?,
            "max-iter" => stop.max_iterations = parse_value(key, value)?,
            "max-eval" => stop.max_evaluations = parse_value(key, value)?,
            "cost-tol" => stop.cost_tolerance = parse_optional(key, value)?,
            "simplex-tol" => stop.simplex_tolerance = parse_optional(key, value)?,
            "alpha" => c.alpha = parse_value(key, value)?,
            "gamma" => c.gamma = parse_value(key, value)?,
            "rho" => c.rho = parse_value(key, value)?,
            "sigma" => c.sigma = parse_value(key, value)?,
            "theta-e" => c.edge_threshold = parse_value(key, value)?,
            "theta-v" => c.volume_threshold = parse_value(key, value)?,
            "init-coeff" => c.initial_simplex_coeff = parse_value(key, value)?,
            "init-rule" => self.optimizer.initial_rule = value.parse()?,
            "reevaluation-factor" => self.optimizer.reevaluation_factor = parse_value(key, value)?,
            "noise" => self.noise = parse_optional(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "repeat" => self.repeat = parse_value(key, value)?,
            "scale" => self.scale = parse_value(key, value)?,
            "out-dir" => self.out_dir = PathBuf::from(value),
            "emit-trajectory" => self.emit_trajectory = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every setting as `key = value` lines; `parse` reads it back unchanged.
    pub fn to_config_string(&self) -> String {
        let o = &self.optimizer;
        let c = &o.coefficients;
        let x0: Vec<String> = self.x0.iter().map(f64::to_string).collect();
        let entries = [
            ("algorithm", o.algorithm.to_string()),
            ("objective", self.objective.clone()),
            ("dim", show_optional(&self.dim)),
            ("x0", x0.join(",")),
            ("max-iter", o.stop.max_iterations.to_string()),
            ("max-eval", o.stop.max_evaluations.to_string()),
            ("cost-tol", show_optional(&o.stop.cost_tolerance)),
            ("simplex-tol", show_optional(&o.stop.simplex_tolerance)),
            ("alpha", c.alpha.to_string()),
            ("gamma", c.gamma.to_string()),
            ("rho", c.rho.to_string()),
            ("sigma", c.sigma.to_string()),
            ("theta-e", c.edge_threshold.to_string()),
            ("theta-v", c.volume_threshold.to_string()),
            ("init-coeff", c.initial_simplex_coeff.to_string()),
            ("init-rule", o.initial_rule.to_string()),
            ("reevaluation-factor", o.reevaluation_factor.to_string()),
            ("noise", show_optional(&self.noise)),
            ("seed", self.seed.to_string()),
            ("repeat", self.repeat.to_string()),
            ("scale", self.scale.to_string()),
            ("out-dir", self.out_dir.display().to_string()),
            ("emit-trajectory", self.emit_trajectory.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Config file (if any) with command-line flags layered on top.
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        let o = &mut cfg.optimizer;
        let c = &mut o.coefficients;
        macro_rules! take {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        take!(args.algorithm => o.algorithm);
        take!(args.objective => cfg.objective);
        take!(args.x0 => cfg.x0);
        take!(args.max_iter => o.stop.max_iterations);
        take!(args.max_eval => o.stop.max_evaluations);
        take!(args.alpha => c.alpha);
        take!(args.gamma => c.gamma);
        take!(args.rho => c.rho);
        take!(args.sigma => c.sigma);
        take!(args.theta_e => c.edge_threshold);
        take!(args.theta_v => c.volume_threshold);
        take!(args.init_coeff => c.initial_simplex_coeff);
        take!(args.init_rule => o.initial_rule);
        take!(args.reevaluation_factor => o.reevaluation_factor);
        take!(args.seed => cfg.seed);
        take!(args.repeat => cfg.repeat);
        take!(args.scale => cfg.scale);
        take!(args.out_dir => cfg.out_dir);
        if args.dim.is_some() {
            cfg.dim = args.dim;
        }
        if args.cost_tol.is_some() {
            o.stop.cost_tolerance = args.cost_tol;
        }
        if args.simplex_tol.is_some() {
            o.stop.simplex_tolerance = args.simplex_tol;
        }
        if args.noise.is_some() {
            cfg.noise = args.noise;
        }
        cfg.emit_trajectory |= args.emit_trajectory;
        Ok(cfg)
    }

    /// Builds the objective, checking the start point against its dimension.
    pub fn objective_spec(&self) -> Result<ObjectiveSpec> {
        if self.x0.is_empty() {
            return Err(Error::Config("missing start point (--x0)".into()));
        }
        let dim = self.dim.unwrap_or(self.x0.len());
        let spec = ObjectiveSpec::builtin(&self.objective, Some(dim))?
            .with_noise(self.noise)?
            .with_scale(self.scale)?;
        if self.x0.len() != spec.dimension() {
            return Err(Error::Config(format!(
                "start point has {} coordinates but {} is {}-dimensional",
                self.x0.len(),
                self.objective,
                spec.dimension()
            )));
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.repeat == 0 {
            return Err(Error::Config("repeat count must be >= 1".into()));
        }
        self.objective_spec().map(drop)
    }
}

fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::MaxIterations => "max-iterations",
        Termination::MaxEvaluations => "max-evaluations",
        Termination::Tolerance => "tolerance",
    }
}

fn point(p: &[f64]) -> String {
    let xs: Vec<String> = p.iter().map(|&x| format_float(x)).collect();
    format!("({})", xs.join(", "))
}

/// Single run: optimizes, writes the archives and prints a summary.
pub fn run_single(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let spec = cfg.objective_spec()?;
    let record = run(&cfg.optimizer, &spec, &cfg.x0, cfg.seed)?;
    let bundle = write_outputs(&record, &cfg.out_dir, cfg.emit_trajectory)?;
    let io = |e| Error::io("<stdout>", e);
    writeln!(out, "algorithm    {}", record.algorithm).map_err(io)?;
    writeln!(out, "objective    {} ({}D)", spec.name(), spec.dimension()).map_err(io)?;
    writeln!(out, "endpoint     {}", point(record.endpoint())).map_err(io)?;
    writeln!(out, "J            {}", format_float(record.best_cost())).map_err(io)?;
    writeln!(out, "iterations   {}", record.iterations).map_err(io)?;
    writeln!(out, "evaluations  {}", record.total_evaluations()).map_err(io)?;
    writeln!(out, "corrections  {}", record.degeneracy_events.len()).map_err(io)?;
    writeln!(out, "reevaluated  {}", record.reevaluations.len()).map_err(io)?;
    writeln!(out, "stopped by   {}", termination_label(record.termination)).map_err(io)?;
    writeln!(out, "output       {}", bundle.directory.display()).map_err(io)?;
    Ok(())
}

/// Seeded batch: prints mean and variance and writes `Summary.csv`.
pub fn run_batch(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let spec = cfg.objective_spec()?;
    let label = match &cfg.noise {
        Some(n) => format!("{} {n}", spec.name()),
        None => spec.name().to_string(),
    };
    let summary = run_replications(&label, &cfg.optimizer, &spec, &cfg.x0, cfg.seed, cfg.repeat)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let csv = cfg.out_dir.join("Summary.csv");
    fs::write(&csv, summary.to_csv()).map_err(|e| Error::io(&csv, e))?;
    let io = |e| Error::io("<stdout>", e);
    writeln!(out, "{summary}").map_err(io)?;
    writeln!(out, "summary      {}", csv.display()).map_err(io)?;
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Run(args) => {
            let cfg = ExperimentConfig::from_args(args)?;
            if let Some(path) = &args.save_config {
                fs::write(path, cfg.to_config_string()).map_err(|e| Error::io(path, e))?;
            }
            cfg.validate()?;
            if cfg.repeat > 1 {
                run_batch(&cfg, out)
            } else {
                run_single(&cfg, out)
            }
        }
        Command::Reproduce(args) => {
            let report = reproduce(&args.only, args.seed)?;
            writeln!(out, "{report}").map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Exit status for an error: 1 for I/O failures, 2 for usage and
/// configuration problems.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 1,
        _ => 2,
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let mut cfg = ExperimentConfig {
            x0: vec![-0.9598, -1.66907, -0.19862, -3.61086, -3.77915],
            objective: "rosenbrock".into(),
            dim: Some(5),
            noise: Some(NoiseModel::Gaussian { variance: 0.005 }),
            scale: 1e-4,
            seed: 42,
            ..Default::default()
        };
        cfg.optimizer.coefficients.edge_threshold = 1e-5;
        cfg.optimizer.stop.cost_tolerance = Some(1e-12);
        cfg.optimizer.reevaluation_factor = f64::INFINITY;
        let text = cfg.to_config_string();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn defaults_match_parameter_table() {
        let cfg = ExperimentConfig::parse("").unwrap();
        let c = cfg.optimizer.coefficients;
        assert_eq!((c.alpha, c.gamma, c.rho, c.sigma), (1.0, 2.0, 0.5, 0.5));
        assert_eq!(
            (c.edge_threshold, c.volume_threshold, c.initial_simplex_coeff),
            (0.1, 0.1, 0.05)
        );
        assert_eq!(cfg.optimizer.reevaluation_factor, 1.5);
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = ExperimentConfig::parse("colour = blue").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "algorithm = dsm\nx0 = 0.1, 0.2\nseed = 5\n").unwrap();
        let cli = Cli::try_parse_from([
            "rdsm",
            "run",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
            "--x0",
            "-0.75,0.35",
        ])
        .unwrap();
        let Command::Run(args) = &cli.command else { panic!() };
        let cfg = ExperimentConfig::from_args(args).unwrap();
        assert_eq!(cfg.optimizer.algorithm, Algorithm::Dsm);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.x0, vec![-0.75, 0.35]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cfg = ExperimentConfig {
            objective: "linear-gradient".into(),
            x0: vec![0.0, 0.0, 0.0],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
