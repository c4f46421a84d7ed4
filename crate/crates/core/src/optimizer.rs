//! Downhill simplex iteration and the robust loop built on top of it.
//!
//! One robust iteration is a Nelder-Mead step, then a degeneracy check with
//! correction, then a reevaluation pass over long-standing vertices. The
//! classic method is the same loop with the last two phases skipped.

use crate::error::{Error, Result};
use crate::geometry::{correct_degeneracy, detect_degeneracy};
use crate::objective::{noise_rng, Bounds, EvaluationLedger, LedgerCheckpoint, NoiseRng, ObjectiveSpec};
use crate::state::{
    Algorithm, CoefficientSet, DegeneracyEvent, InitialRule, Operation, OptimizerConfig, PointId, PointRecord,
    ReevaluationEvent, RunRecord, SimplexState, StepEntry, Termination, Vertex,
};

/// Step used for zero coordinates of the start point.
pub const ZERO_COORD_STEP: f64 = 0.00025;

/// Why a step could not complete.
#[derive(Debug)]
pub enum StepError {
    BudgetExhausted,
    Objective(Error),
}

impl From<Error> for StepError {
    fn from(e: Error) -> Self {
        StepError::Objective(e)
    }
}

/// Evaluation gateway for one run: owns the ledger, the noise generator, the
/// point database and the id counter, and enforces the evaluation budget.
pub struct Evaluator<'a> {
    spec: &'a ObjectiveSpec,
    ledger: EvaluationLedger,
    rng: NoiseRng,
    limit: usize,
    points: Vec<PointRecord>,
    next_id: PointId,
    /// Simplex id attached to newly created points.
    pub simplex_id: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EvaluatorCheckpoint {
    ledger: LedgerCheckpoint,
    points: usize,
    next_id: PointId,
    simplex_id: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a ObjectiveSpec, seed: u64) -> Self {
        Evaluator {
            spec,
            ledger: EvaluationLedger::new(),
            rng: noise_rng(seed),
            limit: usize::MAX,
            points: Vec::new(),
            next_id: 1,
            simplex_id: 0,
        }
    }

    #[cfg(test)]
    pub(crate) fn set_next_id(&mut self, id: PointId) {
        self.next_id = id;
    }

    pub fn set_limit(&mut self, limit: usize) {
        self.limit = limit;
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        self.spec
    }

    pub fn calls(&self) -> usize {
        self.ledger.total_calls()
    }

    pub fn ledger(&self) -> &EvaluationLedger {
        &self.ledger
    }

    pub fn points(&self) -> &[PointRecord] {
        &self.points
    }

    fn charge(&self) -> Result<(), StepError> {
        if self.calls() >= self.limit {
            Err(StepError::BudgetExhausted)
        } else {
            Ok(())
        }
    }

    /// Evaluates a new point and returns it as a fresh vertex.
    pub fn new_vertex(&mut self, coords: Vec<f64>, operation: Operation) -> Result<Vertex, StepError> {
        self.charge()?;
        let id = self.next_id;
        let cost = self.spec.evaluate(id, &coords, &mut self.ledger, &mut self.rng)?;
        self.next_id += 1;
        self.points.push(PointRecord {
            id,
            coords: coords.clone(),
            cost,
            simplex_id: self.simplex_id,
            operation,
        });
        Ok(Vertex::new(id, coords, cost))
    }

    /// One more raw evaluation at an existing vertex.
    pub fn reevaluate(&mut self, vertex: &Vertex) -> Result<f64, StepError> {
        self.charge()?;
        Ok(self
            .spec
            .evaluate(vertex.id, &vertex.coords, &mut self.ledger, &mut self.rng)?)
    }

    pub fn checkpoint(&self) -> EvaluatorCheckpoint {
        EvaluatorCheckpoint {
            ledger: self.ledger.checkpoint(),
            points: self.points.len(),
            next_id: self.next_id,
            simplex_id: self.simplex_id,
        }
    }

    pub fn rollback(&mut self, cp: EvaluatorCheckpoint) {
        self.ledger.rollback(cp.ledger);
        self.points.truncate(cp.points);
        self.next_id = cp.next_id;
        self.simplex_id = cp.simplex_id;
    }
}

/// Start point plus one point per axis with that coordinate scaled by
/// `1 + coeff` (or set to [`ZERO_COORD_STEP`] when it is zero).
pub fn initial_points(x0: &[f64], coeff: f64) -> Vec<Vec<f64>> {
    let mut pts = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut p = x0.to_vec();
        p[i] = if p[i] != 0.0 {
            (1.0 + coeff) * p[i]
        } else {
            ZERO_COORD_STEP
        };
        pts.push(p);
    }
    pts
}

/// Start point plus one point per axis stepped by `coeff` times the width of
/// the domain along that axis.
pub fn initial_points_in_domain(x0: &[f64], coeff: f64, bounds: &Bounds) -> Vec<Vec<f64>> {
    let mut pts = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut p = x0.to_vec();
        p[i] += coeff * (bounds.upper()[i] - bounds.lower()[i]);
        pts.push(p);
    }
    pts
}

/// Initial simplex points for `rule`; [`InitialRule::Auto`] uses the domain
/// width when the objective is bounded.
pub fn initial_points_for(rule: InitialRule, x0: &[f64], coeff: f64, spec: &ObjectiveSpec) -> Result<Vec<Vec<f64>>> {
    match (rule, spec.bounds()) {
        (InitialRule::Relative, _) | (InitialRule::Auto, None) => Ok(initial_points(x0, coeff)),
        (InitialRule::Domain | InitialRule::Auto, Some(b)) => Ok(initial_points_in_domain(x0, coeff, b)),
        (InitialRule::Domain, None) => Err(Error::Config(
            "the domain initial-simplex rule needs a bounded objective".into(),
        )),
    }
}

/// Evaluates the initial simplex around `x0` and returns it ordered.
pub fn initial_simplex(
    x0: &[f64],
    coeff: f64,
    rule: InitialRule,
    ev: &mut Evaluator<'_>,
) -> Result<SimplexState, StepError> {
    let dim = ev.spec().dimension();
    if x0.len() != dim {
        return Err(Error::Config(format!(
            "start point has {} coordinates but the objective is {dim}-dimensional",
            x0.len()
        ))
        .into());
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("start point must be finite".into()).into());
    }
    let vertices = initial_points_for(rule, x0, coeff, ev.spec())?
        .into_iter()
        .map(|p| ev.new_vertex(p, Operation::Initial))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimplexState::new(vertices)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub operation: Operation,
    /// Ids in cost order before the step.
    pub before: Vec<PointId>,
    /// `before` with replaced slots substituted.
    pub after: Vec<PointId>,
    /// Counters aligned with `after`.
    pub counters: Vec<u32>,
    /// `(outgoing, incoming)` id pairs.
    pub replaced: Vec<(PointId, PointId)>,
    /// Raw evaluations consumed by the step, trial points included.
    pub evaluations: usize,
}

fn centroid(vertices: &[Vertex]) -> Vec<f64> {
    let n = vertices[0].coords.len();
    let mut c = vec![0.0; n];
    for v in vertices {
        for (ci, xi) in c.iter_mut().zip(&v.coords) {
            *ci += xi;
        }
    }
    c.iter_mut().for_each(|ci| *ci /= vertices.len() as f64);
    c
}

/// `a + t (b - a)`
fn along(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect()
}

/// Substitutes `incoming` into the slots of `state`, bumps survivor counters
/// and re-orders. Returns the slot-order ids and counters.
fn commit(state: &mut SimplexState, incoming: Vec<(usize, Vertex)>) -> (Vec<PointId>, Vec<u32>) {
    let slots: Vec<usize> = incoming.iter().map(|(s, _)| *s).collect();
    for (i, v) in state.vertices_mut().iter_mut().enumerate() {
        if !slots.contains(&i) {
            v.counter += 1;
        }
    }
    for (slot, v) in incoming {
        state.vertices_mut()[slot] = v;
    }
    let ids = state.ids();
    let counters = state.counters();
    state.sort();
    (ids, counters)
}

/// One Nelder-Mead step on an ordered simplex.
pub fn dsm_iteration(
    state: &mut SimplexState,
    coeffs: &CoefficientSet,
    ev: &mut Evaluator<'_>,
) -> Result<IterationOutcome, StepError> {
    let n = state.dimension();
    let calls0 = ev.calls();
    let before = state.ids();
    let verts = state.vertices();
    let x_o = centroid(&verts[..n]);
    let worst = verts[n].clone();
    let (f_best, f_second, f_worst) = (verts[0].cost, verts[n - 1].cost, worst.cost);

    let reflected = ev.new_vertex(along(&x_o, &worst.coords, -coeffs.alpha), Operation::Reflection)?;
    let accepted = if reflected.cost < f_best {
        let expanded = ev.new_vertex(along(&x_o, &reflected.coords, coeffs.gamma), Operation::Expansion)?;
        if expanded.cost < reflected.cost {
            Some((Operation::Expansion, expanded))
        } else {
            Some((Operation::Reflection, reflected))
        }
    } else if reflected.cost < f_second {
        Some((Operation::Reflection, reflected))
    } else if reflected.cost < f_worst {
        let contracted = ev.new_vertex(
            along(&x_o, &reflected.coords, coeffs.rho),
            Operation::OutsideContraction,
        )?;
        (contracted.cost <= reflected.cost).then_some((Operation::OutsideContraction, contracted))
    } else {
        let contracted = ev.new_vertex(along(&x_o, &worst.coords, coeffs.rho), Operation::InsideContraction)?;
        (contracted.cost < f_worst).then_some((Operation::InsideContraction, contracted))
    };

    let (operation, incoming) = match accepted {
        Some((op, v)) => (op, vec![(n, v)]),
        None => {
            let best = state.best().coords.clone();
            let shrunk = (1..=n)
                .map(|i| {
                    let p = along(&best, &state.vertices()[i].coords, coeffs.sigma);
                    ev.new_vertex(p, Operation::Shrink).map(|v| (i, v))
                })
                .collect::<Result<Vec<_>, _>>()?;
            (Operation::Shrink, shrunk)
        }
    };
    let replaced = incoming.iter().map(|(slot, v)| (before[*slot], v.id)).collect();
    let (after, counters) = commit(state, incoming);
    Ok(IterationOutcome {
        operation,
        before,
        after,
        counters,
        replaced,
        evaluations: ev.calls() - calls0,
    })
}

/// Mean of `values`, exact when all entries are equal.
fn history_mean(values: &[f64]) -> f64 {
    let pivot = values[0];
    pivot + values.iter().map(|v| v - pivot).sum::<f64>() / values.len() as f64
}

/// Reevaluates every vertex whose counter has reached `threshold`: one fresh
/// raw evaluation is appended to its history, the stored cost becomes the
/// history mean and the counter restarts at zero. Re-orders the simplex.
pub fn reevaluation_pass(
    state: &mut SimplexState,
    threshold: u32,
    ev: &mut Evaluator<'_>,
) -> Result<Vec<ReevaluationEvent>, StepError> {
    let iteration = state.iteration;
    let mut events = Vec::new();
    for i in 0..state.vertices().len() {
        if state.vertices()[i].counter < threshold {
            continue;
        }
        let fresh = ev.reevaluate(&state.vertices()[i])?;
        let v = &mut state.vertices_mut()[i];
        v.history.push(fresh);
        let before = v.cost;
        v.cost = history_mean(&v.history);
        v.counter = 0;
        events.push(ReevaluationEvent {
            iteration,
            point_id: v.id,
            coords: v.coords.clone(),
            cost_before: before,
            cost_after: v.cost,
        });
    }
    state.sort();
    Ok(events)
}

/// Degeneracy check and, when needed, correction of the simplex. Moved
/// vertices are evaluated afresh with counter 0.
pub fn correction_pass(
    state: &mut SimplexState,
    coeffs: &CoefficientSet,
    ev: &mut Evaluator<'_>,
) -> Result<Option<(DegeneracyEvent, Option<IterationOutcome>)>, StepError> {
    let pts = state.points();
    let report = detect_degeneracy(&pts, coeffs.edge_threshold, coeffs.volume_threshold)?;
    if !report.is_degenerate() {
        return Ok(None);
    }
    let calls0 = ev.calls();
    let before = state.ids();
    let correction = correct_degeneracy(&pts, &state.costs(), coeffs.edge_threshold, coeffs.volume_threshold)?;
    let mut event = DegeneracyEvent {
        iteration: state.iteration,
        report,
        replaced: Vec::new(),
        corrected: Vec::new(),
        failed: correction.failed,
    };
    if correction.moved.is_empty() {
        return Ok(Some((event, None)));
    }
    let mut incoming = Vec::new();
    for &slot in &correction.moved {
        let v = ev.new_vertex(correction.vertices[slot].clone(), Operation::DegeneracyCorrection)?;
        event.replaced.push(before[slot]);
        event.corrected.push(v.id);
        incoming.push((slot, v));
    }
    let replaced = event
        .replaced
        .iter()
        .copied()
        .zip(event.corrected.iter().copied())
        .collect();
    // Counters only advance at Nelder-Mead iteration boundaries.
    for (slot, v) in incoming {
        state.vertices_mut()[slot] = v;
    }
    let after = state.ids();
    let counters = state.counters();
    state.sort();
    let outcome = IterationOutcome {
        operation: Operation::DegeneracyCorrection,
        before,
        after,
        counters,
        replaced,
        evaluations: ev.calls() - calls0,
    };
    Ok(Some((event, Some(outcome))))
}

/// Drives complete runs and collects the [`RunRecord`].
pub struct Optimizer<'a> {
    config: OptimizerConfig,
    ev: Evaluator<'a>,
    state: SimplexState,
    steps: Vec<StepEntry>,
    reevaluations: Vec<ReevaluationEvent>,
    degeneracy_events: Vec<DegeneracyEvent>,
    iterations: usize,
}

impl<'a> Optimizer<'a> {
    /// Validates the configuration and evaluates the initial simplex. The
    /// initial evaluations are made even when they exceed the budget.
    pub fn new(config: OptimizerConfig, spec: &'a ObjectiveSpec, x0: &[f64], seed: u64) -> Result<Self> {
        config.validate()?;
        let mut ev = Evaluator::new(spec, seed);
        let state = match initial_simplex(
            x0,
            config.coefficients.initial_simplex_coeff,
            config.initial_rule,
            &mut ev,
        ) {
            Ok(s) => s,
            Err(StepError::Objective(e)) => return Err(e),
            Err(StepError::BudgetExhausted) => unreachable!("no limit during initialization"),
        };
        ev.set_limit(config.stop.max_evaluations);
        Ok(Optimizer {
            config,
            ev,
            state,
            steps: Vec::new(),
            reevaluations: Vec::new(),
            degeneracy_events: Vec::new(),
            iterations: 0,
        })
    }

    pub fn state(&self) -> &SimplexState {
        &self.state
    }

    pub fn evaluations(&self) -> usize {
        self.ev.calls()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn log(&mut self, outcome: &IterationOutcome) {
        self.steps.push(StepEntry {
            iteration: self.state.iteration,
            simplex_id: self.ev.simplex_id,
            before: outcome.before.clone(),
            after: outcome.after.clone(),
            operation: outcome.operation,
            counters: outcome.counters.clone(),
            best_cost: self.state.best().cost,
        });
    }

    fn iterate(&mut self) -> Result<(), StepError> {
        self.state.iteration = self.iterations + 1;
        self.ev.simplex_id += 1;
        let outcome = dsm_iteration(&mut self.state, &self.config.coefficients, &mut self.ev)?;
        self.log(&outcome);
        if self.config.algorithm == Algorithm::Dsm {
            return Ok(());
        }

        self.ev.simplex_id += 1;
        match correction_pass(&mut self.state, &self.config.coefficients, &mut self.ev)? {
            Some((event, outcome)) => {
                if let Some(outcome) = &outcome {
                    self.log(outcome);
                } else {
                    self.ev.simplex_id -= 1;
                }
                self.degeneracy_events.push(event);
            }
            None => self.ev.simplex_id -= 1,
        }

        if let Some(threshold) = self.config.reevaluation_threshold(self.state.dimension()) {
            self.ev.simplex_id += 1;
            let before = self.state.ids();
            let events = reevaluation_pass(&mut self.state, threshold, &mut self.ev)?;
            if events.is_empty() {
                self.ev.simplex_id -= 1;
            } else {
                let outcome = IterationOutcome {
                    operation: Operation::Reevaluation,
                    after: before.clone(),
                    counters: before
                        .iter()
                        .map(|id| {
                            self.state
                                .vertices()
                                .iter()
                                .find(|v| v.id == *id)
                                .map_or(0, |v| v.counter)
                        })
                        .collect(),
                    before,
                    replaced: Vec::new(),
                    evaluations: events.len(),
                };
                self.log(&outcome);
                self.reevaluations.extend(events);
            }
        }
        Ok(())
    }

    /// Performs one full iteration. A step that runs out of budget is rolled
    /// back and `Ok(false)` is returned.
    pub fn step(&mut self) -> Result<bool> {
        let cp = self.ev.checkpoint();
        let saved = (
            self.state.clone(),
            self.steps.len(),
            self.reevaluations.len(),
            self.degeneracy_events.len(),
        );
        match self.iterate() {
            Ok(()) => {
                self.iterations += 1;
                Ok(true)
            }
            Err(StepError::BudgetExhausted) => {
                self.ev.rollback(cp);
                self.state = saved.0;
                self.steps.truncate(saved.1);
                self.reevaluations.truncate(saved.2);
                self.degeneracy_events.truncate(saved.3);
                Ok(false)
            }
            Err(StepError::Objective(e)) => Err(e),
        }
    }

    /// Iterates until a stop criterion fires.
    pub fn run(mut self) -> Result<RunRecord> {
        let stop = self.config.stop;
        let termination = loop {
            if self.iterations >= stop.max_iterations {
                break Termination::MaxIterations;
            }
            if self.ev.calls() >= stop.max_evaluations {
                break Termination::MaxEvaluations;
            }
            if stop.tolerance_met(&self.state) {
                break Termination::Tolerance;
            }
            if !self.step()? {
                break Termination::MaxEvaluations;
            }
        };
        Ok(self.finish(termination))
    }

    fn finish(self, termination: Termination) -> RunRecord {
        let Evaluator {
            spec, ledger, points, ..
        } = self.ev;
        RunRecord {
            algorithm: self.config.algorithm,
            dimension: self.state.dimension(),
            cost_scale: spec.scale(),
            steps: self.steps,
            points,
            evaluations: ledger.into_evaluations(),
            reevaluations: self.reevaluations,
            degeneracy_events: self.degeneracy_events,
            iterations: self.iterations,
            termination,
            final_simplex: self.state,
        }
    }
}

/// Runs `config.algorithm` from `x0`.
pub fn run(config: &OptimizerConfig, spec: &ObjectiveSpec, x0: &[f64], seed: u64) -> Result<RunRecord> {
    Optimizer::new(*config, spec, x0, seed)?.run()
}

/// Classic downhill simplex run.
pub fn run_dsm(config: &OptimizerConfig, spec: &ObjectiveSpec, x0: &[f64], seed: u64) -> Result<RunRecord> {
    let config = OptimizerConfig {
        algorithm: Algorithm::Dsm,
        ..*config
    };
    run(&config, spec, x0, seed)
}

/// Robust run: Nelder-Mead step, degeneracy correction, reevaluation.
pub fn run_rdsm(config: &OptimizerConfig, spec: &ObjectiveSpec, x0: &[f64], seed: u64) -> Result<RunRecord> {
    let config = OptimizerConfig {
        algorithm: Algorithm::Rdsm,
        ..*config
    };
    run(&config, spec, x0, seed)
}
