//! Plain data shared by the optimizer, the reporting layer and the CLI.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::DegeneracyReport;

/// Stable identifier of an evaluated point. Ids are handed out in evaluation
/// order starting at 1 and are never reused within a run.
pub type PointId = u64;

/// What produced a simplex (or a point).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operation {
    Initial,
    Reflection,
    Expansion,
    OutsideContraction,
    InsideContraction,
    Shrink,
    DegeneracyCorrection,
    Reevaluation,
}

impl Operation {
    pub const ALL: [Operation; 8] = [
        Operation::Initial,
        Operation::Reflection,
        Operation::Expansion,
        Operation::OutsideContraction,
        Operation::InsideContraction,
        Operation::Shrink,
        Operation::DegeneracyCorrection,
        Operation::Reevaluation,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Operation::Initial => "initial",
            Operation::Reflection => "reflection",
            Operation::Expansion => "expansion",
            Operation::OutsideContraction => "outside-contraction",
            Operation::InsideContraction => "inside-contraction",
            Operation::Shrink => "shrink",
            Operation::DegeneracyCorrection => "degeneracy-correction",
            Operation::Reevaluation => "reevaluation",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Operation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Operation::ALL
            .into_iter()
            .find(|op| op.label() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown operation label `{s}`")))
    }
}

/// One simplex vertex together with its evaluation bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: PointId,
    pub coords: Vec<f64>,
    /// Stored cost: the latest raw evaluation, or the mean of `history`
    /// after a reevaluation.
    pub cost: f64,
    /// Number of completed iterations this vertex has stayed in the simplex
    /// since it entered (or since its last reevaluation).
    pub counter: u32,
    /// Every raw evaluation made at `coords` during this run.
    pub history: Vec<f64>,
}

impl Vertex {
    pub fn new(id: PointId, coords: Vec<f64>, cost: f64) -> Self {
        Vertex {
            id,
            coords,
            cost,
            counter: 0,
            history: vec![cost],
        }
    }
}

/// Orders by cost ascending, ties broken by lower id.
pub(crate) fn vertex_order(a: &Vertex, b: &Vertex) -> std::cmp::Ordering {
    a.cost.total_cmp(&b.cost).then(a.id.cmp(&b.id))
}

/// The n+1 vertices of the working simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexState {
    vertices: Vec<Vertex>,
    pub iteration: usize,
}

impl SimplexState {
    /// Builds an ordered state. Requires exactly n+1 vertices of equal
    /// dimension n >= 1.
    pub fn new(vertices: Vec<Vertex>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a simplex needs at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        let n = vertices.len() - 1;
        for v in &vertices {
            if v.coords.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.coords.len(),
                });
            }
        }
        let mut state = SimplexState { vertices, iteration: 0 };
        state.sort();
        Ok(state)
    }

    pub fn dimension(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub(crate) fn vertices_mut(&mut self) -> &mut [Vertex] {
        &mut self.vertices
    }

    pub fn best(&self) -> &Vertex {
        &self.vertices[0]
    }

    pub fn worst(&self) -> &Vertex {
        &self.vertices[self.vertices.len() - 1]
    }

    pub fn sort(&mut self) {
        self.vertices.sort_by(vertex_order);
    }

    pub fn is_ordered(&self) -> bool {
        self.vertices.windows(2).all(|w| vertex_order(&w[0], &w[1]).is_le())
    }

    pub fn ids(&self) -> Vec<PointId> {
        self.vertices.iter().map(|v| v.id).collect()
    }

    pub fn counters(&self) -> Vec<u32> {
        self.vertices.iter().map(|v| v.counter).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.vertices.iter().map(|v| v.cost).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.vertices.iter().map(|v| v.coords.clone()).collect()
    }

    /// Spread between worst and best stored cost.
    pub fn cost_spread(&self) -> f64 {
        self.worst().cost - self.best().cost
    }

    /// Largest infinity-norm distance from the best vertex to any other.
    pub fn size(&self) -> f64 {
        let best = &self.best().coords;
        self.vertices[1..]
            .iter()
            .flat_map(|v| v.coords.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

/// Nelder-Mead operation coefficients, degeneracy thresholds and the
/// initial simplex coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma: f64,
    pub edge_threshold: f64,
    pub volume_threshold: f64,
    pub initial_simplex_coeff: f64,
}

impl Default for CoefficientSet {
    fn default() -> Self {
        CoefficientSet {
            alpha: 1.0,
            gamma: 2.0,
            rho: 0.5,
            sigma: 0.5,
            edge_threshold: 0.1,
            volume_threshold: 0.1,
            initial_simplex_coeff: 0.05,
        }
    }
}

impl CoefficientSet {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.alpha > 0.0) {
            return bad("reflection coefficient must be > 0");
        }
        if !(self.gamma > 1.0) {
            return bad("expansion coefficient must be > 1");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("contraction coefficient must lie in (0, 1)");
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad("shrink coefficient must lie in (0, 1)");
        }
        // A zero threshold switches the corresponding criterion off.
        if !(0.0..1.0).contains(&self.edge_threshold) {
            return bad("edge threshold must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.volume_threshold) {
            return bad("volume threshold must lie in [0, 1)");
        }
        if !(self.initial_simplex_coeff > 0.0 && self.initial_simplex_coeff.is_finite()) {
            return bad("initial simplex coefficient must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    pub max_iterations: usize,
    pub max_evaluations: usize,
    /// Stop once the spread of stored vertex costs drops to this value.
    pub cost_tolerance: Option<f64>,
    /// Stop once every vertex lies within this distance of the best one.
    pub simplex_tolerance: Option<f64>,
}

impl StopCriteria {
    pub fn budget(max_iterations: usize, max_evaluations: usize) -> Self {
        StopCriteria {
            max_iterations,
            max_evaluations,
            cost_tolerance: None,
            simplex_tolerance: None,
        }
    }

    /// Both tolerances must hold when both are set.
    pub fn tolerance_met(&self, state: &SimplexState) -> bool {
        let cost = self.cost_tolerance.map(|t| state.cost_spread() <= t);
        let size = self.simplex_tolerance.map(|t| state.size() <= t);
        match (cost, size) {
            (None, None) => false,
            (Some(c), None) => c,
            (None, Some(s)) => s,
            (Some(c), Some(s)) => c && s,
        }
    }
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria::budget(1000, 2000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Dsm,
    Rdsm,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Dsm => "dsm",
            Algorithm::Rdsm => "rdsm",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dsm" => Ok(Algorithm::Dsm),
            "rdsm" => Ok(Algorithm::Rdsm),
            _ => Err(Error::InvalidInput(format!(
                "unknown algorithm `{s}` (expected dsm or rdsm)"
            ))),
        }
    }
}

/// How the initial simplex is laid out around the start point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InitialRule {
    /// Domain steps for bounded objectives, relative steps otherwise.
    #[default]
    Auto,
    /// Coordinate `i` scaled by `1 + coeff` (zero coordinates get a fixed step).
    Relative,
    /// Coordinate `i` moved by `coeff` times the domain width along axis `i`.
    Domain,
}

impl InitialRule {
    pub fn label(self) -> &'static str {
        match self {
            InitialRule::Auto => "auto",
            InitialRule::Relative => "relative",
            InitialRule::Domain => "domain",
        }
    }
}

impl fmt::Display for InitialRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for InitialRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(InitialRule::Auto),
            "relative" => Ok(InitialRule::Relative),
            "domain" => Ok(InitialRule::Domain),
            _ => Err(Error::InvalidInput(format!(
                "unknown initial simplex rule `{s}` (expected auto, relative or domain)"
            ))),
        }
    }
}

/// Everything the optimizer needs besides the objective, start point and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub coefficients: CoefficientSet,
    pub stop: StopCriteria,
    /// Reevaluation fires when a vertex counter reaches
    /// `ceil(reevaluation_factor * n)`. `f64::INFINITY` disables it.
    pub reevaluation_factor: f64,
    pub initial_rule: InitialRule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: Algorithm::Rdsm,
            coefficients: CoefficientSet::default(),
            stop: StopCriteria::default(),
            reevaluation_factor: 1.5,
            initial_rule: InitialRule::Auto,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        if !(self.reevaluation_factor > 0.0) {
            return Err(Error::Config(
                "reevaluation factor must be > 0 (use inf to disable)".into(),
            ));
        }
        Ok(())
    }

    /// Counter value at which a vertex gets reevaluated, `None` when disabled.
    pub fn reevaluation_threshold(&self, n: usize) -> Option<u32> {
        let t = (self.reevaluation_factor * n as f64).ceil();
        (t.is_finite() && t <= u32::MAX as f64).then_some(t as u32)
    }
}

/// One row of the simplex history: the simplex before a step, after it
/// (replaced slots substituted in place) and the resulting counters.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEntry {
    pub iteration: usize,
    pub simplex_id: usize,
    pub before: Vec<PointId>,
    pub after: Vec<PointId>,
    pub operation: Operation,
    /// Counters aligned with `after`.
    pub counters: Vec<u32>,
    /// Best stored cost of the simplex after the step, optimizer units.
    pub best_cost: f64,
}

/// A point as first evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub id: PointId,
    pub coords: Vec<f64>,
    pub cost: f64,
    pub simplex_id: usize,
    pub operation: Operation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReevaluationEvent {
    pub iteration: usize,
    pub point_id: PointId,
    pub coords: Vec<f64>,
    pub cost_before: f64,
    pub cost_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyEvent {
    pub iteration: usize,
    pub report: DegeneracyReport,
    /// Ids of the vertices that were moved.
    pub replaced: Vec<PointId>,
    /// Ids given to the corrected vertices, aligned with `replaced`.
    pub corrected: Vec<PointId>,
    /// Set when no vertex could be moved.
    pub failed: bool,
}

/// One raw objective call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub point_id: PointId,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxIterations,
    MaxEvaluations,
    Tolerance,
}

/// Full log of a run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub dimension: usize,
    /// Multiplier applied to the objective during optimization. Reported
    /// costs divide it back out.
    pub cost_scale: f64,
    pub steps: Vec<StepEntry>,
    pub points: Vec<PointRecord>,
    pub evaluations: Vec<Evaluation>,
    pub reevaluations: Vec<ReevaluationEvent>,
    pub degeneracy_events: Vec<DegeneracyEvent>,
    pub iterations: usize,
    pub termination: Termination,
    pub final_simplex: SimplexState,
}

impl RunRecord {
    pub fn total_evaluations(&self) -> usize {
        self.evaluations.len()
    }

    pub fn best(&self) -> &Vertex {
        self.final_simplex.best()
    }

    pub fn endpoint(&self) -> &[f64] {
        &self.best().coords
    }

    /// Stored cost of the final best vertex, in objective units.
    pub fn best_cost(&self) -> f64 {
        self.unscale(self.best().cost)
    }

    pub fn unscale(&self, cost: f64) -> f64 {
        cost / self.cost_scale
    }

    /// Operation labels of the Nelder-Mead steps, in order.
    pub fn operation_sequence(&self) -> Vec<Operation> {
        self.steps
            .iter()
            .map(|s| s.operation)
            .filter(|op| !matches!(op, Operation::DegeneracyCorrection | Operation::Reevaluation))
            .collect()
    }
}
