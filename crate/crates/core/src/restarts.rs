//! Restarted accelerated methods for strongly convex objectives.
//!
//! Epoch `s` restarts the inner method at `z_{s−1}` with the radius guess
//! `r_{s−1} = R₀ / 2^{s−1}` and runs it for `t_s` iterations. Each epoch is
//! long enough to halve the distance to the solution, which gives
//! `‖z_s − x*‖² ≤ 4^{−s} R₀²` and `f(z_s) − f* ≤ 2^{−2s−1} μ R₀²`.

use std::time::Instant;

use log::info;

use crate::ascn::{run_ascn_monitored, Schedule2, TauRule};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::oracles::{Oracle, OracleCost};
use crate::problems::Objective;
use crate::record::{IterationRecord, Monitor};
use crate::tensor::{run_tensor_monitored, ScheduleP};

/// The accelerated method run inside each epoch. `sigma1_over_r`, `radius`
/// and `iterations` of the template are replaced per epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerMethod {
    Second(Schedule2),
    Third(ScheduleP),
}

impl InnerMethod {
    pub fn order(&self) -> u32 {
        match self {
            InnerMethod::Second(_) => 2,
            InnerMethod::Third(_) => 3,
        }
    }

    fn tau(&self) -> f64 {
        let rule = match self {
            InnerMethod::Second(s) => s.tau,
            InnerMethod::Third(s) => s.tau,
        };
        match rule {
            TauRule::Constant(v) | TauRule::Dynamic(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartPlan {
    /// Strong convexity modulus (a lower bound on the true one).
    pub mu: f64,
    /// Upper bound on `‖z₀ − x*‖`.
    pub r0: f64,
    pub inner: InnerMethod,
    /// The constant multiplying the epoch-length maximum.
    pub c_big: f64,
    pub max_epochs: usize,
    /// Stop once the guaranteed gap `2^{−2s−1} μ R₀²` is at most this.
    pub target: f64,
    /// Gradient noise level `σ₁`, rescaled by `r_{s−1}` for each epoch.
    pub sigma1: f64,
    /// Lipschitz constant `L_p` of the highest derivative used.
    pub smoothness: f64,
}

impl RestartPlan {
    /// `8(p+2)` times the largest constant of the inner convergence bound.
    pub fn default_c_big(order: u32) -> f64 {
        match order {
            2 => 8.0 * 4.0 * 72.0,
            _ => 8.0 * 5.0 * 65536.0 / 24.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("mu", self.mu), ("r0", self.r0)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.c_big >= 1.0 && self.c_big.is_finite()) {
            return Err(Error::InvalidParameter(format!("c_big = {} must be at least 1", self.c_big)));
        }
        for (name, v) in [("target", self.target), ("sigma1", self.sigma1), ("smoothness", self.smoothness)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidParameter("max_epochs must be at least 1".into()));
        }
        Ok(())
    }

    /// `r_{s−1} = R₀ / 2^{s−1}`.
    pub fn radius(&self, s: usize) -> f64 {
        self.r0 / 2f64.powi(s as i32 - 1)
    }
}

/// Iterations of epoch `s ≥ 1`:
/// `⌈C · max{1, (τ/(μr))², (σ₁/(μr))², (δ₂/μ)^{1/2}, (δ₃r/μ)^{1/3}, (L_p r^{p−1}/μ)^{1/(p+1)}}⌉`
/// with `r = r_{s−1}`. The `δ₃` term only appears for the third-order method.
pub fn epoch_length(plan: &RestartPlan, s: usize) -> usize {
    assert!(s >= 1, "epochs are numbered from 1");
    let r = plan.radius(s);
    let mu = plan.mu;
    let p = plan.inner.order() as i32;
    let mut terms = vec![
        1.0,
        (plan.inner.tau() / (mu * r)).powi(2),
        (plan.sigma1 / (mu * r)).powi(2),
        (plan.smoothness * r.powi(p - 1) / mu).powf(1.0 / (p + 1) as f64),
    ];
    match &plan.inner {
        InnerMethod::Second(sched) => terms.push((sched.sigma2 / mu).sqrt()),
        InnerMethod::Third(sched) => {
            terms.push((sched.sigma2 / mu).sqrt());
            terms.push((sched.sigma3 * r / mu).cbrt());
        }
    }
    let worst = terms.into_iter().fold(0.0, f64::max);
    (plan.c_big * worst).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub s: usize,
    pub iterations: usize,
    /// `r_{s−1}`.
    pub radius: f64,
    pub loss: f64,
    /// `‖z_s − x*‖` when the solution is known.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RestartReport {
    pub z: Vector,
    pub epochs: Vec<EpochRecord>,
    pub records: Vec<IterationRecord>,
    pub cost: OracleCost,
}

/// Optional diagnostics for [`run_restarted_with`].
#[derive(Default)]
pub struct RestartOptions<'a> {
    pub x_star: Option<&'a Vector>,
    pub test: Option<&'a dyn Objective>,
    pub test_every: usize,
}

pub fn run_restarted(
    problem: &dyn Objective,
    oracle: &mut dyn Oracle,
    plan: &RestartPlan,
    z0: &Vector,
) -> Result<RestartReport> {
    run_restarted_with(problem, oracle, plan, z0, &RestartOptions::default())
}

pub fn run_restarted_with(
    problem: &dyn Objective,
    oracle: &mut dyn Oracle,
    plan: &RestartPlan,
    z0: &Vector,
    opts: &RestartOptions<'_>,
) -> Result<RestartReport> {
    plan.validate()?;
    check_dim(problem.dim(), z0.len())?;
    if let Some(xs) = opts.x_star {
        check_dim(problem.dim(), xs.len())?;
    }
    let mut z = z0.clone();
    let mut cost = OracleCost::default();
    let mut records = Vec::new();
    let mut epochs = Vec::new();
    let mut t_total = 0;
    let start = Instant::now();

    for s in 1..=plan.max_epochs {
        let r = plan.radius(s);
        let ts = epoch_length(plan, s);
        let mut monitor = Monitor::default().started_at(start);
        monitor.test = opts.test;
        monitor.test_every = opts.test_every.max(1);
        monitor.epoch = s as i64;
        monitor.t_offset = t_total;
        monitor.cost_offset = cost;
        monitor.log_initial = s == 1;
        let report = match &plan.inner {
            InnerMethod::Second(template) => {
                let sched = Schedule2 {
                    sigma1_over_r: plan.sigma1 / r,
                    radius: r,
                    iterations: ts,
                    ..template.clone()
                };
                run_ascn_monitored(problem, oracle, &sched, &z, &mut monitor)?
            }
            InnerMethod::Third(template) => {
                let sched = ScheduleP {
                    sigma1_over_r: plan.sigma1 / r,
                    radius: r,
                    iterations: ts,
                    ..template.clone()
                };
                run_tensor_monitored(problem, oracle, &sched, &z, &mut monitor)?
            }
        };
        z = report.x;
        cost += report.cost;
        t_total += ts;
        let loss = report
            .records
            .last()
            .map(|rec| rec.train_loss)
            .expect("every epoch logs at least one iterate");
        records.extend(report.records);
        let distance = opts.x_star.map(|xs| (&z - xs).norm());
        info!("epoch {s}: {ts} iterations, radius {r:.3e}, loss {loss:.6e}");
        epochs.push(EpochRecord {
            s,
            iterations: ts,
            radius: r,
            loss,
            distance,
        });
        let guaranteed = 2f64.powi(-2 * s as i32 - 1) * plan.mu * plan.r0 * plan.r0;
        if guaranteed <= plan.target {
            break;
        }
    }
    Ok(RestartReport {
        z,
        epochs,
        records,
        cost,
    })
}
