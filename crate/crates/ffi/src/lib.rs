//! C interface to the rdsm optimizer.
//!
//! Objects are opaque handles created by `*_new`/`*_builtin` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`RdsmStatus`]; on failure a message is available from
//! [`rdsm_last_error_message`] on the same thread. Panics never cross the
//! boundary and are reported as [`RdsmStatus::Panic`].
//!
//! Simplex vertices are passed row-major: `(n + 1) * n` doubles, vertex `i`
//! at offset `i * n`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rdsm::geometry::{self, Degeneracy};
use rdsm::objective::Bounds;
use rdsm::reporting::write_outputs;
use rdsm::{Algorithm, Error, NoiseModel, ObjectiveSpec, OptimizerConfig, RunRecord};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    DimensionMismatch = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdsmAlgorithm {
    Dsm = 0,
    Rdsm = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdsmDegeneracy {
    None = 0,
    Edge = 1,
    Volume = 2,
    Both = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdsmDegeneracyReport {
    pub epsilon_e: f64,
    pub epsilon_v: f64,
    pub classification: RdsmDegeneracy,
}

/// Operation coefficients, degeneracy thresholds and initial simplex
/// coefficient.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdsmCoefficients {
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma: f64,
    pub edge_threshold: f64,
    pub volume_threshold: f64,
    pub initial_simplex_coeff: f64,
}

/// Cost callback: `x` points at `n` coordinates.
pub type RdsmCostFn = Option<unsafe extern "C" fn(x: *const f64, n: usize, user_data: *mut c_void) -> f64>;

/// Objective function, domain and noise.
pub struct RdsmObjective {
    spec: ObjectiveSpec,
}

/// Optimizer settings.
pub struct RdsmConfig {
    config: OptimizerConfig,
}

/// Finished run.
pub struct RdsmRun {
    record: RunRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RdsmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch { .. } => RdsmStatus::DimensionMismatch,
            Error::InvalidInput(_) => RdsmStatus::InvalidArgument,
            Error::Config(_) => RdsmStatus::Config,
            Error::Io { .. } => RdsmStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(RdsmStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(RdsmStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RdsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RdsmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            RdsmStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Boxes `value` into `*out`; nothing is allocated when `out` is null.
unsafe fn emit<T>(out: *mut *mut T, value: impl FnOnce() -> Result<T, Failure>) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(Box::into_raw(Box::new(value()?)));
    Ok(())
}

/// Splits a row-major vertex array into `n + 1` points.
unsafe fn simplex<'a>(vertices: *const f64, n: usize) -> Result<Vec<&'a [f64]>, Failure> {
    if n == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    let flat = slice(vertices, (n + 1) * n, "vertices")?;
    Ok(flat.chunks_exact(n).collect())
}

fn report(r: &geometry::DegeneracyReport) -> RdsmDegeneracyReport {
    RdsmDegeneracyReport {
        epsilon_e: r.epsilon_e,
        epsilon_v: r.epsilon_v,
        classification: match r.classification {
            Degeneracy::None => RdsmDegeneracy::None,
            Degeneracy::Edge => RdsmDegeneracy::Edge,
            Degeneracy::Volume => RdsmDegeneracy::Volume,
            Degeneracy::Both => RdsmDegeneracy::Both,
        },
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rdsm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rdsm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Built-in objective by name: `linear-gradient`, `linear-gradient-obstacle`
/// or `rosenbrock`. `dimension` 0 picks the objective's natural dimension.
#[no_mangle]
pub unsafe extern "C" fn rdsm_objective_builtin(
    name: *const c_char,
    dimension: usize,
    out: *mut *mut RdsmObjective,
) -> RdsmStatus {
    guard(|| {
        let name = string(name, "name")?;
        emit(out, || {
            let spec = ObjectiveSpec::builtin(name, (dimension > 0).then_some(dimension))?;
            Ok(RdsmObjective { spec })
        })
    })
}

struct Callback {
    f: unsafe extern "C" fn(*const f64, usize, *mut c_void) -> f64,
    user_data: *mut c_void,
}

// The caller guarantees the callback and its data may be used from the
// thread that runs the optimizer.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn call(&self, x: &[f64]) -> f64 {
        // SAFETY: forwarded to the caller's contract.
        unsafe { (self.f)(x.as_ptr(), x.len(), self.user_data) }
    }
}

/// Objective backed by a C callback. `user_data` is passed through
/// unchanged and must outlive the objective.
#[no_mangle]
pub unsafe extern "C" fn rdsm_objective_from_callback(
    dimension: usize,
    cost: RdsmCostFn,
    user_data: *mut c_void,
    out: *mut *mut RdsmObjective,
) -> RdsmStatus {
    guard(|| {
        let f = cost.ok_or_else(|| null("cost"))?;
        let cb = Callback { f, user_data };
        emit(out, || {
            let spec = ObjectiveSpec::new("callback", dimension, move |x: &[f64]| cb.call(x))?;
            Ok(RdsmObjective { spec })
        })
    })
}

/// Sets an inclusive box domain; points outside cost +inf.
#[no_mangle]
pub unsafe extern "C" fn rdsm_objective_set_bounds(
    objective: *mut RdsmObjective,
    lower: *const f64,
    upper: *const f64,
    n: usize,
) -> RdsmStatus {
    guard(|| {
        let obj = as_mut(objective, "objective")?;
        let bounds = Bounds::new(slice(lower, n, "lower")?.to_vec(), slice(upper, n, "upper")?.to_vec())?;
        obj.spec = obj.spec.clone().with_bounds(bounds)?;
        Ok(())
    })
}

/// `uniform:a,b` or `gaussian:variance`; null clears the noise.
#[no_mangle]
pub unsafe extern "C" fn rdsm_objective_set_noise(objective: *mut RdsmObjective, noise: *const c_char) -> RdsmStatus {
    guard(|| {
        let obj = as_mut(objective, "objective")?;
        let model = if noise.is_null() {
            None
        } else {
            Some(string(noise, "noise")?.parse::<NoiseModel>()?)
        };
        obj.spec = obj.spec.clone().with_noise(model)?;
        Ok(())
    })
}

/// Multiplier applied to the cost during optimization; reported costs are
/// unscaled.
#[no_mangle]
pub unsafe extern "C" fn rdsm_objective_set_scale(objective: *mut RdsmObjective, scale: f64) -> RdsmStatus {
    guard(|| {
        let obj = as_mut(objective, "objective")?;
        obj.spec = obj.spec.clone().with_scale(scale)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_objective_dimension(objective: *const RdsmObjective, out: *mut usize) -> RdsmStatus {
    guard(|| write_out(out, as_ref(objective, "objective")?.spec.dimension(), "out"))
}

/// Noise-free, unscaled cost at `x`.
#[no_mangle]
pub unsafe extern "C" fn rdsm_objective_value(
    objective: *const RdsmObjective,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> RdsmStatus {
    guard(|| {
        let obj = as_ref(objective, "objective")?;
        let v = obj.spec.true_value(slice(x, n, "x")?)?;
        write_out(out, v, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_objective_free(objective: *mut RdsmObjective) {
    if !objective.is_null() {
        drop(Box::from_raw(objective));
    }
}

/// Default settings for `algorithm`.
#[no_mangle]
pub unsafe extern "C" fn rdsm_config_new(algorithm: RdsmAlgorithm, out: *mut *mut RdsmConfig) -> RdsmStatus {
    guard(|| {
        let algorithm = match algorithm {
            RdsmAlgorithm::Dsm => Algorithm::Dsm,
            RdsmAlgorithm::Rdsm => Algorithm::Rdsm,
        };
        emit(out, || {
            Ok(RdsmConfig {
                config: OptimizerConfig {
                    algorithm,
                    ..Default::default()
                },
            })
        })
    })
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_config_get_coefficients(
    config: *const RdsmConfig,
    out: *mut RdsmCoefficients,
) -> RdsmStatus {
    guard(|| {
        let c = as_ref(config, "config")?.config.coefficients;
        let coeffs = RdsmCoefficients {
            alpha: c.alpha,
            gamma: c.gamma,
            rho: c.rho,
            sigma: c.sigma,
            edge_threshold: c.edge_threshold,
            volume_threshold: c.volume_threshold,
            initial_simplex_coeff: c.initial_simplex_coeff,
        };
        write_out(out, coeffs, "out")
    })
}

/// Replaces all coefficients; rejected values leave the config unchanged.
#[no_mangle]
pub unsafe extern "C" fn rdsm_config_set_coefficients(
    config: *mut RdsmConfig,
    coefficients: *const RdsmCoefficients,
) -> RdsmStatus {
    guard(|| {
        let cfg = as_mut(config, "config")?;
        let c = as_ref(coefficients, "coefficients")?;
        let mut next = cfg.config;
        next.coefficients = rdsm::CoefficientSet {
            alpha: c.alpha,
            gamma: c.gamma,
            rho: c.rho,
            sigma: c.sigma,
            edge_threshold: c.edge_threshold,
            volume_threshold: c.volume_threshold,
            initial_simplex_coeff: c.initial_simplex_coeff,
        };
        next.validate()?;
        cfg.config = next;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_config_set_budget(
    config: *mut RdsmConfig,
    max_iterations: usize,
    max_evaluations: usize,
) -> RdsmStatus {
    guard(|| {
        let cfg = as_mut(config, "config")?;
        cfg.config.stop.max_iterations = max_iterations;
        cfg.config.stop.max_evaluations = max_evaluations;
        Ok(())
    })
}

/// Reevaluation fires at counter `ceil(factor * n)`; pass infinity to
/// disable it.
#[no_mangle]
pub unsafe extern "C" fn rdsm_config_set_reevaluation_factor(config: *mut RdsmConfig, factor: f64) -> RdsmStatus {
    guard(|| {
        let cfg = as_mut(config, "config")?;
        let mut next = cfg.config;
        next.reevaluation_factor = factor;
        next.validate()?;
        cfg.config = next;
        Ok(())
    })
}

/// `auto`, `relative` or `domain`.
#[no_mangle]
pub unsafe extern "C" fn rdsm_config_set_initial_rule(config: *mut RdsmConfig, rule: *const c_char) -> RdsmStatus {
    guard(|| {
        let cfg = as_mut(config, "config")?;
        cfg.config.initial_rule = string(rule, "rule")?.parse()?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_config_free(config: *mut RdsmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Optimizes `objective` from `x0` (length `n`).
#[no_mangle]
pub unsafe extern "C" fn rdsm_run(
    config: *const RdsmConfig,
    objective: *const RdsmObjective,
    x0: *const f64,
    n: usize,
    seed: u64,
    out: *mut *mut RdsmRun,
) -> RdsmStatus {
    guard(|| {
        let cfg = as_ref(config, "config")?;
        let obj = as_ref(objective, "objective")?;
        let x0 = slice(x0, n, "x0")?;
        emit(out, || {
            Ok(RdsmRun {
                record: rdsm::run(&cfg.config, &obj.spec, x0, seed)?,
            })
        })
    })
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_run_dimension(run: *const RdsmRun, out: *mut usize) -> RdsmStatus {
    guard(|| write_out(out, as_ref(run, "run")?.record.dimension, "out"))
}

/// Copies the best vertex into `out`, which must hold `len >= dimension`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn rdsm_run_endpoint(run: *const RdsmRun, out: *mut f64, len: usize) -> RdsmStatus {
    guard(|| {
        let end = as_ref(run, "run")?.record.endpoint();
        if len < end.len() {
            return Err(Failure(
                RdsmStatus::BufferTooSmall,
                format!("endpoint needs {} doubles, buffer holds {len}", end.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, end.len()).copy_from_slice(end);
        Ok(())
    })
}

/// Stored cost of the best vertex, unscaled.
#[no_mangle]
pub unsafe extern "C" fn rdsm_run_best_cost(run: *const RdsmRun, out: *mut f64) -> RdsmStatus {
    guard(|| write_out(out, as_ref(run, "run")?.record.best_cost(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_run_iterations(run: *const RdsmRun, out: *mut usize) -> RdsmStatus {
    guard(|| write_out(out, as_ref(run, "run")?.record.iterations, "out"))
}

/// Raw objective calls, including corrections and reevaluations.
#[no_mangle]
pub unsafe extern "C" fn rdsm_run_evaluations(run: *const RdsmRun, out: *mut usize) -> RdsmStatus {
    guard(|| write_out(out, as_ref(run, "run")?.record.total_evaluations(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_run_degeneracy_events(run: *const RdsmRun, out: *mut usize) -> RdsmStatus {
    guard(|| write_out(out, as_ref(run, "run")?.record.degeneracy_events.len(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_run_reevaluations(run: *const RdsmRun, out: *mut usize) -> RdsmStatus {
    guard(|| write_out(out, as_ref(run, "run")?.record.reevaluations.len(), "out"))
}

/// Writes the text archives and learning curve into `directory`.
#[no_mangle]
pub unsafe extern "C" fn rdsm_run_write_outputs(
    run: *const RdsmRun,
    directory: *const c_char,
    trajectory: bool,
) -> RdsmStatus {
    guard(|| {
        let r = as_ref(run, "run")?;
        let dir = string(directory, "directory")?;
        write_outputs(&r.record, Path::new(dir), trajectory)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rdsm_run_free(run: *mut RdsmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Volume of the simplex with `n + 1` row-major vertices in dimension `n`.
#[no_mangle]
pub unsafe extern "C" fn rdsm_volume(vertices: *const f64, n: usize, out: *mut f64) -> RdsmStatus {
    guard(|| write_out(out, geometry::volume(&simplex(vertices, n)?)?, "out"))
}

/// Sum of all pairwise edge lengths.
#[no_mangle]
pub unsafe extern "C" fn rdsm_perimeter(vertices: *const f64, n: usize, out: *mut f64) -> RdsmStatus {
    guard(|| write_out(out, geometry::perimeter(&simplex(vertices, n)?)?, "out"))
}

/// Edge and volume ratios with the first vertex as anchor.
#[no_mangle]
pub unsafe extern "C" fn rdsm_detect_degeneracy(
    vertices: *const f64,
    n: usize,
    edge_threshold: f64,
    volume_threshold: f64,
    out: *mut RdsmDegeneracyReport,
) -> RdsmStatus {
    guard(|| {
        let r = geometry::detect_degeneracy(&simplex(vertices, n)?, edge_threshold, volume_threshold)?;
        write_out(out, report(&r), "out")
    })
}

/// Corrects a degenerate simplex in place, moving vertices worst cost first.
/// `costs` holds `n + 1` values; `moved` receives the number of relocated
/// vertices (0 when the simplex was not degenerate or no move helped).
#[no_mangle]
pub unsafe extern "C" fn rdsm_correct_degeneracy(
    vertices: *mut f64,
    costs: *const f64,
    n: usize,
    edge_threshold: f64,
    volume_threshold: f64,
    moved: *mut usize,
) -> RdsmStatus {
    guard(|| {
        let pts = simplex(vertices, n)?;
        let costs = slice(costs, n + 1, "costs")?;
        let c = geometry::correct_degeneracy(&pts, costs, edge_threshold, volume_threshold)?;
        let count = c.moved.len();
        let flat = std::slice::from_raw_parts_mut(vertices, (n + 1) * n);
        for (dst, src) in flat.chunks_exact_mut(n).zip(&c.vertices) {
            dst.copy_from_slice(src);
        }
        if !moved.is_null() {
            moved.write(count);
        }
        Ok(())
    })
}
