//! Per-iteration logging shared by all drivers.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimating_sequence::EstimatorState;
use crate::linalg::Vector;
use crate::oracles::OracleCost;
use crate::problems::Objective;
use crate::subsolver::SubsolveResult;

/// One logged iterate. Losses are exact evaluations and are not charged to
/// the oracle budget.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Restart epoch, or −1 for unrestarted runs.
    pub epoch: i64,
    pub t: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub step_norm: f64,
    pub cert: f64,
    pub grad_samples_cum: u64,
    pub hess_samples_cum: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub x: Vector,
    pub records: Vec<IterationRecord>,
    pub cost: OracleCost,
}

impl RunReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.train_loss)
    }
}

/// State of an accelerated driver right after computing `x_{t+1}` and `y_{t+1}`.
pub struct StepView<'a> {
    /// The new iteration index `t + 1`.
    pub t: usize,
    pub alpha: f64,
    /// `A_t`, the normalizer of `ψ_{t+1}`.
    pub a: f64,
    pub x_prev: &'a Vector,
    pub y_prev: &'a Vector,
    pub v: &'a Vector,
    pub x: &'a Vector,
    pub y: &'a Vector,
    pub step: &'a SubsolveResult,
    pub delta_bar: f64,
    pub estimator: &'a EstimatorState,
}

pub type Observer<'a> = dyn FnMut(&StepView<'_>) + 'a;

/// Logging context for a driver run.
pub struct Monitor<'a> {
    /// Held-out objective evaluated every `test_every` iterations.
    pub test: Option<&'a dyn Objective>,
    pub test_every: usize,
    pub epoch: i64,
    /// Added to the driver's local iteration index.
    pub t_offset: usize,
    /// Oracle cost already spent before this run.
    pub cost_offset: OracleCost,
    /// Whether to log the starting point as `t = t_offset`.
    pub log_initial: bool,
    /// A logged training loss above this aborts the run.
    pub divergence_threshold: f64,
    pub observer: Option<&'a mut Observer<'a>>,
    start: Instant,
}

impl Default for Monitor<'_> {
    fn default() -> Self {
        Self {
            test: None,
            test_every: 1,
            epoch: -1,
            t_offset: 0,
            cost_offset: OracleCost::default(),
            log_initial: true,
            divergence_threshold: 1e12,
            observer: None,
            start: Instant::now(),
        }
    }
}

impl<'a> Monitor<'a> {
    pub fn with_test(test: &'a dyn Objective, every: usize) -> Self {
        Self {
            test: Some(test),
            test_every: every.max(1),
            ..Self::default()
        }
    }

    pub fn observed_by(mut self, observer: &'a mut Observer<'a>) -> Self {
        self.observer = Some(observer);
        self
    }

    /// Measures wall time from `start` instead of from construction.
    pub fn started_at(mut self, start: Instant) -> Self {
        self.start = start;
        self
    }

    pub(crate) fn observe(&mut self, view: &StepView<'_>) {
        if let Some(obs) = self.observer.as_mut() {
            obs(view);
        }
    }

    pub(crate) fn record(
        &self,
        problem: &dyn Objective,
        t: usize,
        x: &Vector,
        step_norm: f64,
        cert: f64,
        cost: OracleCost,
    ) -> Result<IterationRecord> {
        let global_t = self.t_offset + t;
        let train_loss = problem.value(x).map_err(|e| e.at_iteration(global_t))?;
        if !train_loss.is_finite() || train_loss > self.divergence_threshold {
            return Err(Error::Diverged {
                iteration: global_t,
                value: train_loss,
            });
        }
        let test_loss = match self.test {
            Some(p) if global_t % self.test_every == 0 => Some(p.value(x).map_err(|e| e.at_iteration(global_t))?),
            _ => None,
        };
        Ok(IterationRecord {
            epoch: self.epoch,
            t: global_t,
            train_loss,
            test_loss,
            step_norm,
            cert,
            grad_samples_cum: self.cost_offset.grad_samples + cost.grad_samples,
            hess_samples_cum: self.cost_offset.hess_samples + cost.hess_samples,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        })
    }
}
