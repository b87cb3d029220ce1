//! Accelerated stochastic second-order and third-order optimization.
//!
//! The crate is organized bottom-up:
//!
//! - [`problems`]: objectives with exact derivatives up to order three.
//! - [`oracles`]: exact, minibatch and additive-noise derivative oracles.
//! - [`taylor_model`]: regularized Taylor models built from oracle output.
//! - [`subsolver`]: certified inexact minimizers of those models.
//! - [`estimating_sequence`]: the accumulated lower model and its closed-form minimizer.
//! - [`ascn`], [`tensor`], [`restarts`], [`baselines`]: the optimization drivers.
//! - [`harness`]: dataset ingestion, experiment configuration and CSV logging.

pub mod ascn;
pub mod baselines;
pub mod error;
pub mod estimating_sequence;
pub mod harness;
pub mod linalg;
pub mod oracles;
pub mod problems;
pub mod record;
pub mod restarts;
pub mod subsolver;
pub mod taylor_model;
pub mod tensor;

pub use ascn::{run_ascn, run_ascn_monitored, schedule_at, Schedule2, ScheduleValues, TauRule};
pub use baselines::{run_sgd, run_sgd_monitored, SgdConfig};
pub use error::{Error, Result};
pub use estimating_sequence::{Argmin, CoefficientForm, EstimatorState};
pub use linalg::{Matrix, Tensor3, Vector};
pub use oracles::{
    delta2_along, BatchSpec, ExactOracle, MinibatchOracle, Need, NoiseOracle, NoiseSpec, Oracle,
    OracleCost, OracleOutput,
};
pub use problems::{
    reference_solve, Evaluation, LogisticProblem, Objective, QuadraticProblem, SmoothnessConstants,
};
pub use record::{IterationRecord, Monitor, Observer, RunReport, StepView};
pub use restarts::{
    epoch_length, run_restarted, run_restarted_with, EpochRecord, InnerMethod, RestartOptions, RestartPlan,
    RestartReport,
};
pub use subsolver::{solve_cubic, solve_tensor, Backend, SolveMethod, SubsolveResult};
pub use taylor_model::{CubicModel, QuarticModel};
pub use tensor::{run_tensor, run_tensor_monitored, schedule_p_at, ScheduleP, SchedulePValues};
