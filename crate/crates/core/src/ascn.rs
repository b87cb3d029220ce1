//! Accelerated stochastic cubic Newton.
//!
//! Each iteration builds a cubic model at the momentum point
//! `v_t = (1 − α_t) x_t + α_t y_t`, takes a certified step to `x_{t+1}`, feeds
//! a fresh stochastic gradient at `x_{t+1}` into the estimating sequence and
//! moves `y_{t+1}` to its minimizer.

use crate::error::{check_dim, Error, Result};
use crate::estimating_sequence::{CoefficientForm, EstimatorState};
use crate::linalg::{all_finite, Vector};
use crate::oracles::{Need, Oracle, OracleCost};
use crate::problems::Objective;
use crate::record::{Monitor, RunReport, StepView};
use crate::subsolver::{solve_cubic_with, Backend};
use crate::taylor_model::CubicModel;

/// Subproblem accuracy rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    /// The same `τ` every iteration. `0` requests the floating-point floor.
    Constant(f64),
    /// `τ_t = c / max(t, 1)^{5/2}`.
    Dynamic(f64),
}

impl TauRule {
    pub fn at(self, t: usize) -> f64 {
        match self {
            TauRule::Constant(tau) => tau,
            TauRule::Dynamic(c) => c / (t.max(1) as f64).powf(2.5),
        }
    }

    pub(crate) fn validate(self) -> Result<()> {
        let v = match self {
            TauRule::Constant(v) | TauRule::Dynamic(v) => v,
        };
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("τ parameter {v}")))
        }
    }
}

/// Parameters of the second-order method.
///
/// `sigma1_over_r` is tuned as a single quantity since neither `σ₁` nor the
/// distance `R` to the solution is known in practice. `radius` is only used
/// to turn `τ_t` into `τ_t/R` inside `δ̄_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule2 {
    pub m: f64,
    pub sigma1_over_r: f64,
    pub sigma2: f64,
    pub tau: TauRule,
    pub radius: f64,
    pub iterations: usize,
    pub backend: Backend,
}

impl Schedule2 {
    /// Exact-oracle schedule: no noise terms and floor-accuracy subproblems.
    pub fn deterministic(m: f64, iterations: usize) -> Self {
        Self {
            m,
            sigma1_over_r: 0.0,
            sigma2: 0.0,
            tau: TauRule::Constant(0.0),
            radius: 1.0,
            iterations,
            backend: Backend::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidParameter(format!("M = {} must be positive", self.m)));
        }
        for (name, v) in [("sigma1_over_r", self.sigma1_over_r), ("sigma2", self.sigma2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius = {}", self.radius)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iteration budget must be at least 1".into()));
        }
        self.tau.validate()
    }
}

/// All schedule quantities at iteration `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValues {
    pub alpha: f64,
    /// `A_t = 6 / ((t+1)(t+2)(t+3))`.
    pub a: f64,
    pub lambda: f64,
    pub delta_bar: f64,
    pub tau: f64,
    /// `κ̄₂^{t+1} = 2 δ̄_t α_t² / A_t`.
    pub kappa2_next: f64,
    /// `κ̄₃^{t+1} = (8M/3) α_{t+1}³ / A_{t+1}`.
    pub kappa3_next: f64,
}

fn alpha2(t: usize) -> f64 {
    3.0 / (t as f64 + 3.0)
}

fn a2(t: usize) -> f64 {
    let t = t as f64;
    6.0 / ((t + 1.0) * (t + 2.0) * (t + 3.0))
}

/// `κ̄₃^t = (8M/3) α_t³ / A_t`, which at `t = 0` gives the initial `8M/3`.
fn kappa3(m: f64, t: usize) -> f64 {
    8.0 * m / 3.0 * alpha2(t).powi(3) / a2(t)
}

pub fn schedule_at(sched: &Schedule2, t: usize) -> ScheduleValues {
    let alpha = alpha2(t);
    let a = a2(t);
    let shift = t as f64 + 3.0;
    let tau = sched.tau.at(t);
    let lambda = sched.sigma1_over_r * shift.powf(2.5);
    let delta_bar = 2.0 * sched.sigma2 + (sched.sigma1_over_r + tau / sched.radius) * shift.powf(1.5);
    ScheduleValues {
        alpha,
        a,
        lambda,
        delta_bar,
        tau,
        kappa2_next: 2.0 * delta_bar * alpha * alpha / a,
        kappa3_next: kappa3(sched.m, t + 1),
    }
}

/// Runs the method for `sched.iterations` iterations from `x0`.
pub fn run_ascn(problem: &dyn Objective, oracle: &mut dyn Oracle, sched: &Schedule2, x0: &Vector) -> Result<RunReport> {
    run_ascn_monitored(problem, oracle, sched, x0, &mut Monitor::default())
}

pub fn run_ascn_monitored(
    problem: &dyn Objective,
    oracle: &mut dyn Oracle,
    sched: &Schedule2,
    x0: &Vector,
    monitor: &mut Monitor<'_>,
) -> Result<RunReport> {
    sched.validate()?;
    check_dim(problem.dim(), x0.len())?;
    check_dim(problem.dim(), oracle.dim())?;
    if !all_finite(x0) {
        return Err(Error::NonFinite("starting point"));
    }

    let first = schedule_at(sched, 0);
    let mut est = EstimatorState::new(
        x0.clone(),
        CoefficientForm::Plain,
        first.lambda,
        vec![0.0, kappa3(sched.m, 0)],
    )?;
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut cost = OracleCost::default();
    let mut records = Vec::with_capacity(sched.iterations + 1);
    if monitor.log_initial {
        records.push(monitor.record(problem, 0, &x, 0.0, 0.0, cost)?);
    }

    for t in 0..sched.iterations {
        let at = |e: Error| e.at_iteration(monitor.t_offset + t);
        let sv = schedule_at(sched, t);
        let v = &x * (1.0 - sv.alpha) + &y * sv.alpha;

        let out = oracle.query(&v, Need::GradHess).map_err(at)?;
        cost += out.cost;
        let h = out.h.expect("second-order query returns a Hessian");
        // The model value at the anchor does not affect the step.
        let model = CubicModel::new(v.clone(), 0.0, out.g, h, sv.delta_bar, sched.m).map_err(at)?;
        let step = solve_cubic_with(&model, sv.tau, sched.backend).map_err(at)?;
        let x_next = &v + &step.s;

        let lin = oracle.query(&x_next, Need::Grad).map_err(at)?;
        cost += lin.cost;
        let weight = sv.alpha / sv.a;
        let next = schedule_at(sched, t + 1);
        est.accumulate(weight, &lin.g, next.lambda, &[sv.kappa2_next, sv.kappa3_next])
            .map_err(at)?;
        let rec = monitor.record(problem, t + 1, &x_next, step.r, step.cert, cost)?;
        est.add_constant(weight * (rec.train_loss - lin.g.dot(&(&x_next - x0))));
        let y_next = est.argmin().map_err(at)?.y;

        monitor.observe(&StepView {
            t: t + 1,
            alpha: sv.alpha,
            a: sv.a,
            x_prev: &x,
            y_prev: &y,
            v: &v,
            x: &x_next,
            y: &y_next,
            step: &step,
            delta_bar: sv.delta_bar,
            estimator: &est,
        });
        records.push(rec);
        x = x_next;
        y = y_next;
    }
    Ok(RunReport { x, records, cost })
}
