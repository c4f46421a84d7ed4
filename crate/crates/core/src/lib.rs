//! Downhill simplex optimization with simplex degeneracy correction and
//! noise-robust reevaluation.

// `!(x > 0.0)` style checks are intentional: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod objective;
pub mod optimizer;
pub mod reporting;
pub mod state;

pub use error::{Error, Result};
pub use geometry::{Degeneracy, DegeneracyReport};
pub use objective::{NoiseModel, ObjectiveSpec};
pub use optimizer::{run, run_dsm, run_rdsm, Optimizer};
pub use state::{
    Algorithm, CoefficientSet, InitialRule, Operation, OptimizerConfig, RunRecord, SimplexState, StopCriteria, Vertex,
};
