//! Accelerated stochastic tensor method of order three.
//!
//! Same loop as [`crate::ascn`] with a third-order model, quartic
//! regularization and a factorial-form estimating sequence that carries a
//! fourth-power term.

use crate::ascn::TauRule;
use crate::error::{check_dim, Error, Result};
use crate::estimating_sequence::{CoefficientForm, EstimatorState};
use crate::linalg::{all_finite, Vector, MAX_TENSOR_DIM};
use crate::oracles::{Need, Oracle, OracleCost};
use crate::problems::Objective;
use crate::record::{Monitor, RunReport, StepView};
use crate::subsolver::{solve_tensor, TENSOR_MAX_ITERS};
use crate::taylor_model::QuarticModel;

const P: f64 = 3.0;

/// Parameters of the third-order method.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleP {
    pub m: f64,
    /// Multiplier of the third-derivative error in the cubic regularizer; at least 4.
    pub eta3: f64,
    pub sigma1_over_r: f64,
    pub sigma2: f64,
    /// Third-derivative error level, 0 for exact oracles.
    pub sigma3: f64,
    pub tau: TauRule,
    pub radius: f64,
    pub iterations: usize,
    pub max_inner: usize,
}

impl ScheduleP {
    pub fn deterministic(m: f64, iterations: usize) -> Self {
        Self {
            m,
            eta3: 4.0,
            sigma1_over_r: 0.0,
            sigma2: 0.0,
            sigma3: 0.0,
            tau: TauRule::Constant(0.0),
            radius: 1.0,
            iterations,
            max_inner: TENSOR_MAX_ITERS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidParameter(format!("M = {} must be positive", self.m)));
        }
        if !(self.eta3 >= 4.0 && self.eta3.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta3 = {} must be at least 4", self.eta3)));
        }
        for (name, v) in [
            ("sigma1_over_r", self.sigma1_over_r),
            ("sigma2", self.sigma2),
            ("sigma3", self.sigma3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius = {}", self.radius)));
        }
        if self.iterations == 0 || self.max_inner == 0 {
            return Err(Error::InvalidParameter("iteration budgets must be at least 1".into()));
        }
        self.tau.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePValues {
    pub alpha: f64,
    /// `A_t = 24 / ((t+1)(t+2)(t+3)(t+4))`.
    pub a: f64,
    pub lambda: f64,
    pub delta_bar: f64,
    pub tau: f64,
    /// `κ̄₂^{t+1} = 2p δ̄_t α_t² / A_t`.
    pub kappa2_next: f64,
    /// `κ̄₃^{t+1} = (p²/2) η₃ σ₃ α_{t+1}³ / A_{t+1}`.
    pub kappa3_next: f64,
    /// `κ̄₄^{t+1} = ((p+1)^{p+1}/2) M α_{t+1}⁴ / A_{t+1}`.
    pub kappa4_next: f64,
}

fn alpha3(t: usize) -> f64 {
    4.0 / (t as f64 + 4.0)
}

fn a3(t: usize) -> f64 {
    let t = t as f64;
    24.0 / ((t + 1.0) * (t + 2.0) * (t + 3.0) * (t + 4.0))
}

fn kappa3(sched: &ScheduleP, t: usize) -> f64 {
    P * P / 2.0 * sched.eta3 * sched.sigma3 * alpha3(t).powi(3) / a3(t)
}

fn kappa4(sched: &ScheduleP, t: usize) -> f64 {
    (P + 1.0).powf(P + 1.0) / 2.0 * sched.m * alpha3(t).powi(4) / a3(t)
}

pub fn schedule_p_at(sched: &ScheduleP, t: usize) -> SchedulePValues {
    let alpha = alpha3(t);
    let a = a3(t);
    let shift = t as f64 + 4.0;
    let tau = sched.tau.at(t);
    let delta_bar = 2.0 * sched.sigma2 + (sched.sigma1_over_r + tau / sched.radius) * shift.powf(1.5);
    SchedulePValues {
        alpha,
        a,
        lambda: sched.sigma1_over_r * shift.powf(3.5),
        delta_bar,
        tau,
        kappa2_next: 2.0 * P * delta_bar * alpha * alpha / a,
        kappa3_next: kappa3(sched, t + 1),
        kappa4_next: kappa4(sched, t + 1),
    }
}

pub fn run_tensor(problem: &dyn Objective, oracle: &mut dyn Oracle, sched: &ScheduleP, x0: &Vector) -> Result<RunReport> {
    run_tensor_monitored(problem, oracle, sched, x0, &mut Monitor::default())
}

pub fn run_tensor_monitored(
    problem: &dyn Objective,
    oracle: &mut dyn Oracle,
    sched: &ScheduleP,
    x0: &Vector,
    monitor: &mut Monitor<'_>,
) -> Result<RunReport> {
    sched.validate()?;
    let d = problem.dim();
    if d > MAX_TENSOR_DIM {
        return Err(Error::UnsupportedOrder { order: 3, dim: d });
    }
    check_dim(d, x0.len())?;
    check_dim(d, oracle.dim())?;
    if !all_finite(x0) {
        return Err(Error::NonFinite("starting point"));
    }

    let first = schedule_p_at(sched, 0);
    let mut est = EstimatorState::new(
        x0.clone(),
        CoefficientForm::Factorial,
        first.lambda,
        vec![0.0, kappa3(sched, 0), kappa4(sched, 0)],
    )?;
    let eta3_delta3 = sched.eta3 * sched.sigma3;
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut cost = OracleCost::default();
    let mut records = Vec::with_capacity(sched.iterations + 1);
    if monitor.log_initial {
        records.push(monitor.record(problem, 0, &x, 0.0, 0.0, cost)?);
    }

    for t in 0..sched.iterations {
        let at = |e: Error| e.at_iteration(monitor.t_offset + t);
        let sv = schedule_p_at(sched, t);
        let v = &x * (1.0 - sv.alpha) + &y * sv.alpha;

        let out = oracle.query(&v, Need::GradHessThird).map_err(at)?;
        cost += out.cost;
        let model = QuarticModel::new(
            v.clone(),
            0.0,
            out.g,
            out.h.expect("third-order query returns a Hessian"),
            out.t3.expect("third-order query returns a tensor"),
            sv.delta_bar,
            eta3_delta3,
            sched.m,
        )
        .map_err(at)?;
        let step = solve_tensor(&model, sv.tau, sched.max_inner).map_err(at)?;
        let x_next = &v + &step.s;

        let lin = oracle.query(&x_next, Need::Grad).map_err(at)?;
        cost += lin.cost;
        let weight = sv.alpha / sv.a;
        let next = schedule_p_at(sched, t + 1);
        est.accumulate(
            weight,
            &lin.g,
            next.lambda,
            &[sv.kappa2_next, sv.kappa3_next, sv.kappa4_next],
        )
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ascn::{run_ascn, Schedule2};
    use crate::oracles::{ExactOracle, OracleOutput};
    use crate::problems::{reference_solve, LogisticProblem, QuadraticProblem};

    #[test]
    fn first_schedule_values() {
        let s = ScheduleP::deterministic(1.0, 5);
        let v = schedule_p_at(&s, 0);
        assert_eq!(v.alpha, 1.0);
        assert_eq!(v.a, 1.0);
        assert_eq!(kappa4(&s, 0), 128.0);
    }

    #[test]
    fn noiseless_schedule_keeps_only_quartic_term() {
        let s = ScheduleP::deterministic(2.0, 5);
        for t in 0..20 {
            let v = schedule_p_at(&s, t);
            assert_eq!((v.lambda, v.delta_bar, v.kappa2_next, v.kappa3_next), (0.0, 0.0, 0.0, 0.0));
            assert!(v.kappa4_next > 0.0);
        }
    }

    #[test]
    fn normalizer_bracket_and_product_form() {
        let mut prod = 1.0;
        for t in 0..=100 {
            if t > 0 {
                prod *= 1.0 - alpha3(t);
            }
            let a = a3(t);
            assert!((a - prod).abs() <= 1e-12 * prod);
            let shift = t as f64;
            assert!(1.0 / (shift + 4.0).powi(4) <= a);
            assert!(a <= 24.0 / (shift + 1.0).powi(4));
        }
    }

    #[test]
    fn eta3_below_four_rejected() {
        let mut s = ScheduleP::deterministic(1.0, 3);
        s.eta3 = 3.9;
        assert!(s.validate().is_err());
    }

    #[test]
    fn large_dimension_rejected() {
        let p = LogisticProblem::synthetic(4, 65, 0.0, 0.0, 1).unwrap();
        let mut o = ExactOracle::new(&p);
        let r = run_tensor(&p, &mut o, &ScheduleP::deterministic(1.0, 2), &Vector::zeros(65));
        assert!(matches!(r, Err(Error::UnsupportedOrder { .. })));
    }

    #[test]
    fn minimizer_is_a_fixpoint() {
        let x_star = Vector::from_vec(vec![0.5, -1.0, 2.0]);
        let q = QuadraticProblem::random_with_spectrum(&[1.0, 2.0, 3.0], x_star.clone(), 5).unwrap();
        let mut o = ExactOracle::new(&q);
        let rep = run_tensor(&q, &mut o, &ScheduleP::deterministic(1.0, 10), &x_star).unwrap();
        assert!((rep.x - x_star).norm() < 1e-10);
    }

    /// Drops the third derivative from an exact oracle.
    struct NoThird<'a>(ExactOracle<'a>);

    impl Oracle for NoThird<'_> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn query(&mut self, x: &Vector, need: Need) -> Result<OracleOutput> {
            let mut out = self.0.query(x, need)?;
            if let Some(t) = out.t3.as_mut() {
                t.scale_mut(0.0);
            }
            Ok(out)
        }
        fn queries(&self) -> u64 {
            self.0.queries()
        }
    }

    #[test]
    fn zero_tensor_run_agrees_with_second_order_driver() {
        let p = LogisticProblem::synthetic(100, 4, 0.1, 0.01, 8).unwrap();
        let x0 = Vector::from_element(4, 1.0);
        let f_star = p.value(&reference_solve(&p, &x0, 1e-12).unwrap()).unwrap();
        let m = 10.0 * p.constants().l3.max(p.constants().l2);
        let a = run_tensor(&p, &mut NoThird(ExactOracle::new(&p)), &ScheduleP::deterministic(m, 200), &x0).unwrap();
        let b = run_ascn(&p, &mut ExactOracle::new(&p), &Schedule2::deterministic(m, 200), &x0).unwrap();
        assert!(a.final_loss().unwrap() - f_star < 1e-6);
        assert!(b.final_loss().unwrap() - f_star < 1e-6);
    }
}
