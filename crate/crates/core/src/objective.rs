//! Objective functions, domain penalties, noise and the evaluation gateway.
//!
//! Every raw objective call made by the optimizer goes through
//! [`ObjectiveSpec::evaluate`], which applies the domain bounds, the obstacle
//! penalty, additive noise and the cost scale, and appends the value to the
//! [`EvaluationLedger`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::state::{Evaluation, PointId};

/// Generator used for noise draws. One per run.
pub type NoiseRng = ChaCha8Rng;

pub fn noise_rng(seed: u64) -> NoiseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub type BaseFunction = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Value assigned to points inside the obstacle of the built-in problem.
pub const OBSTACLE_PENALTY: f64 = 1e3;

/// `J(x1, x2) = -(x1 - x2)/4 + 0.5`, minimal (zero) at (1, -1) on [-1, 1]^2.
pub fn linear_gradient(x1: f64, x2: f64) -> f64 {
    -(x1 - x2) / 4.0 + 0.5
}

/// Sum over consecutive coordinate pairs of `100 (x[i+1] - x[i]^2)^2 + (x[i] - 1)^2`.
pub fn rosenbrock(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "rosenbrock needs at least 2 coordinates, got {}",
            x.len()
        )));
    }
    Ok(x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum())
}

/// Rectangular search domain. Points outside cost `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidInput(format!(
                "bound {i}: lower {} is not below upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Bounds::new(vec![lo; n], vec![hi; n])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// Box region with a fixed penalty. Membership is strict on every side.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    lower: Vec<f64>,
    upper: Vec<f64>,
    pub penalty: f64,
}

impl Obstacle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, penalty: f64) -> Result<Self> {
        // Same shape rules as a bounds box.
        let b = Bounds::new(lower, upper)?;
        Ok(Obstacle {
            lower: b.lower,
            upper: b.upper,
            penalty,
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v > *lo && *v < *hi)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}

/// Additive noise on non-penalized evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Uniform on the closed interval `[low, high]`.
    Uniform { low: f64, high: f64 },
    /// Zero-mean normal with the given variance.
    Gaussian { variance: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Uniform { low, high } if low.is_finite() && high.is_finite() && low <= high => Ok(()),
            NoiseModel::Gaussian { variance } if variance.is_finite() && variance >= 0.0 => Ok(()),
            _ => Err(Error::InvalidInput(format!("invalid noise model {self}"))),
        }
    }

    pub fn sample(&self, rng: &mut NoiseRng) -> f64 {
        match *self {
            NoiseModel::Uniform { low, high } => {
                if low == high {
                    low
                } else {
                    rng.random_range(low..=high)
                }
            }
            NoiseModel::Gaussian { variance } => {
                let normal = Normal::new(0.0, variance.sqrt()).expect("variance validated as finite and non-negative");
                normal.sample(rng)
            }
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Uniform { low, high } => write!(f, "uniform:{low},{high}"),
            NoiseModel::Gaussian { variance } => write!(f, "gaussian:{variance}"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// Accepts `uniform:a,b` and `gaussian:variance`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidInput(format!(
                "cannot parse noise `{s}` (expected uniform:a,b or gaussian:variance)"
            ))
        };
        let (kind, params) = s.split_once(':').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let model = match kind.trim().to_ascii_lowercase().as_str() {
            "uniform" => {
                let (a, b) = params.split_once(',').ok_or_else(bad)?;
                NoiseModel::Uniform {
                    low: num(a)?,
                    high: num(b)?,
                }
            }
            "gaussian" => NoiseModel::Gaussian { variance: num(params)? },
            _ => return Err(bad()),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Raw objective calls of one run, in call order, plus per-point histories.
#[derive(Debug, Clone, Default)]
pub struct EvaluationLedger {
    evaluations: Vec<Evaluation>,
    histories: BTreeMap<PointId, Vec<f64>>,
}

/// Marker returned by [`EvaluationLedger::checkpoint`].
#[derive(Debug, Clone, Copy)]
pub struct LedgerCheckpoint(usize);

impl EvaluationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total_calls(&self) -> usize {
        self.evaluations.len()
    }

    pub fn evaluations(&self) -> &[Evaluation] {
        &self.evaluations
    }

    pub fn history(&self, id: PointId) -> &[f64] {
        self.histories.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn histories(&self) -> impl Iterator<Item = (PointId, &[f64])> {
        self.histories.iter().map(|(id, h)| (*id, h.as_slice()))
    }

    pub fn record(&mut self, point_id: PointId, value: f64) {
        self.evaluations.push(Evaluation { point_id, value });
        self.histories.entry(point_id).or_default().push(value);
    }

    pub fn checkpoint(&self) -> LedgerCheckpoint {
        LedgerCheckpoint(self.evaluations.len())
    }

    /// Forgets every call made after `cp`.
    pub fn rollback(&mut self, cp: LedgerCheckpoint) {
        while self.evaluations.len() > cp.0 {
            let e = self.evaluations.pop().expect("length checked");
            if let Some(h) = self.histories.get_mut(&e.point_id) {
                h.pop();
                if h.is_empty() {
                    self.histories.remove(&e.point_id);
                }
            }
        }
    }

    pub fn into_evaluations(self) -> Vec<Evaluation> {
        self.evaluations
    }
}

/// An objective: base function plus domain, obstacle, noise and cost scale.
#[derive(Clone)]
pub struct ObjectiveSpec {
    name: String,
    dimension: usize,
    function: BaseFunction,
    bounds: Option<Bounds>,
    obstacle: Option<Obstacle>,
    noise: Option<NoiseModel>,
    scale: f64,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("bounds", &self.bounds)
            .field("obstacle", &self.obstacle)
            .field("noise", &self.noise)
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

impl ObjectiveSpec {
    /// Wraps a deterministic user function of `dimension` coordinates.
    pub fn new<F>(name: impl Into<String>, dimension: usize, function: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(Error::InvalidInput("objective dimension must be positive".into()));
        }
        Ok(ObjectiveSpec {
            name: name.into(),
            dimension,
            function: Arc::new(function),
            bounds: None,
            obstacle: None,
            noise: None,
            scale: 1.0,
        })
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Result<Self> {
        self.check_len(bounds.lower.len())?;
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Result<Self> {
        self.check_len(obstacle.lower.len())?;
        self.obstacle = Some(obstacle);
        Ok(self)
    }

    pub fn with_noise(mut self, noise: Option<NoiseModel>) -> Result<Self> {
        if let Some(n) = &noise {
            n.validate()?;
        }
        self.noise = noise;
        Ok(self)
    }

    /// Multiplies every cost seen by the optimizer. Reported costs are unscaled.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!("cost scale must be positive, got {scale}")));
        }
        self.scale = scale;
        Ok(self)
    }

    /// Built-in objectives by name: `linear-gradient`,
    /// `linear-gradient-obstacle` (both 2D on [-1, 1]^2) and `rosenbrock`
    /// (any n >= 2 on [-5, 10]^n).
    pub fn builtin(name: &str, dimension: Option<usize>) -> Result<Self> {
        match name {
            "linear-gradient" | "linear-gradient-obstacle" => {
                if let Some(d) = dimension.filter(|&d| d != 2) {
                    return Err(Error::Config(format!("{name} is two-dimensional, got dimension {d}")));
                }
                let spec = ObjectiveSpec::new(name, 2, |x| linear_gradient(x[0], x[1]))?
                    .with_bounds(Bounds::uniform(2, -1.0, 1.0)?)?;
                if name == "linear-gradient-obstacle" {
                    spec.with_obstacle(Obstacle::new(vec![-1.0, -1.0], vec![0.0, 0.0], OBSTACLE_PENALTY)?)
                } else {
                    Ok(spec)
                }
            }
            "rosenbrock" => {
                let n = dimension.ok_or_else(|| Error::Config("rosenbrock needs a dimension".into()))?;
                if n < 2 {
                    return Err(Error::Config(format!("rosenbrock needs dimension >= 2, got {n}")));
                }
                ObjectiveSpec::new(name, n, |x| rosenbrock(x).expect("dimension checked"))?
                    .with_bounds(Bounds::uniform(n, -5.0, 10.0)?)
            }
            _ => Err(Error::Config(format!(
                "unknown objective `{name}` (expected linear-gradient, linear-gradient-obstacle or rosenbrock)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bounds(&self) -> Option<&Bounds> {
        self.bounds.as_ref()
    }

    pub fn obstacle(&self) -> Option<&Obstacle> {
        self.obstacle.as_ref()
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got == self.dimension {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dimension,
                got,
            })
        }
    }

    /// Penalty for `point` if it is out of bounds or inside the obstacle.
    fn penalty(&self, point: &[f64]) -> Option<f64> {
        if let Some(b) = &self.bounds {
            if !b.contains(point) {
                return Some(f64::INFINITY);
            }
        }
        self.obstacle.as_ref().filter(|o| o.contains(point)).map(|o| o.penalty)
    }

    /// Noise-free, unscaled cost. Not recorded anywhere.
    pub fn true_value(&self, point: &[f64]) -> Result<f64> {
        self.check_len(point.len())?;
        Ok(self.penalty(point).unwrap_or_else(|| (self.function)(point)))
    }

    /// One raw objective call, in optimizer units (scaled). Records the value
    /// under `id` in the ledger.
    pub fn evaluate(
        &self,
        id: PointId,
        point: &[f64],
        ledger: &mut EvaluationLedger,
        rng: &mut NoiseRng,
    ) -> Result<f64> {
        self.check_len(point.len())?;
        let raw = match self.penalty(point) {
            Some(p) => p,
            None => {
                let base = (self.function)(point);
                base + self.noise.map_or(0.0, |m| m.sample(rng))
            }
        };
        let value = raw * self.scale;
        ledger.record(id, value);
        Ok(value)
    }
}
