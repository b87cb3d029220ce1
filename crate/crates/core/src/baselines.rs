//! Constant-step stochastic gradient descent.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, Vector};
use crate::oracles::{Need, Oracle, OracleCost};
use crate::problems::Objective;
use crate::record::{Monitor, RunReport};

/// The minibatch size lives in the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub iterations: usize,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is allowed as a degenerate no-op run.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("lr = {} must be nonnegative", self.lr)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn run_sgd(problem: &dyn Objective, oracle: &mut dyn Oracle, cfg: &SgdConfig, x0: &Vector) -> Result<RunReport> {
    run_sgd_monitored(problem, oracle, cfg, x0, &mut Monitor::default())
}

pub fn run_sgd_monitored(
    problem: &dyn Objective,
    oracle: &mut dyn Oracle,
    cfg: &SgdConfig,
    x0: &Vector,
    monitor: &mut Monitor<'_>,
) -> Result<RunReport> {
    cfg.validate()?;
    check_dim(problem.dim(), x0.len())?;
    check_dim(problem.dim(), oracle.dim())?;
    if !all_finite(x0) {
        return Err(Error::NonFinite("starting point"));
    }
    let mut x = x0.clone();
    let mut cost = OracleCost::default();
    let mut records = Vec::with_capacity(cfg.iterations + 1);
    if monitor.log_initial {
        records.push(monitor.record(problem, 0, &x, 0.0, 0.0, cost)?);
    }
    for t in 0..cfg.iterations {
        let out = oracle
            .query(&x, Need::Grad)
            .map_err(|e| e.at_iteration(monitor.t_offset + t))?;
        cost += out.cost;
        let step = out.g * (-cfg.lr);
        x += &step;
        records.push(monitor.record(problem, t + 1, &x, step.norm(), 0.0, cost)?);
    }
    Ok(RunReport { x, records, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::oracles::{BatchSpec, ExactOracle, MinibatchOracle};
    use crate::problems::{LogisticProblem, QuadraticProblem};

    #[test]
    fn unit_quadratic_solves_in_one_step() {
        let q = QuadraticProblem::new(Matrix::identity(3, 3), Vector::zeros(3)).unwrap();
        let x0 = Vector::from_vec(vec![1.0, -2.0, 5.0]);
        let cfg = SgdConfig { lr: 1.0, iterations: 1 };
        let rep = run_sgd(&q, &mut ExactOracle::new(&q), &cfg, &x0).unwrap();
        assert_eq!(rep.x, Vector::zeros(3));
    }

    #[test]
    fn zero_step_stays_put() {
        let q = QuadraticProblem::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let x0 = Vector::from_vec(vec![0.3, 0.7]);
        let cfg = SgdConfig { lr: 0.0, iterations: 5 };
        let rep = run_sgd(&q, &mut ExactOracle::new(&q), &cfg, &x0).unwrap();
        assert_eq!(rep.x, x0);
        assert!(rep.records.windows(2).all(|w| w[0].train_loss == w[1].train_loss));
    }

    #[test]
    fn gap_contracts_geometrically() {
        let x_star = Vector::from_vec(vec![1.0, 2.0, -1.0, 0.0]);
        let (mu, l1) = (0.5, 4.0);
        let q = QuadraticProblem::random_with_spectrum(&[mu, 1.0, 2.0, l1], x_star.clone(), 3).unwrap();
        let f_star = q.value(&x_star).unwrap();
        let cfg = SgdConfig {
            lr: 1.0 / l1,
            iterations: 60,
        };
        let rep = run_sgd(&q, &mut ExactOracle::new(&q), &cfg, &Vector::from_element(4, 3.0)).unwrap();
        let factor = (1.0 - mu / l1).powi(2);
        for w in rep.records.windows(2) {
            let (g0, g1) = (w[0].train_loss - f_star, w[1].train_loss - f_star);
            assert!(g1 <= factor * g0 + 1e-14, "{g1} > {factor}·{g0}");
        }
    }

    #[test]
    fn no_hessian_samples_and_reproducible() {
        let p = LogisticProblem::synthetic(200, 5, 0.1, 0.0, 2).unwrap();
        let spec = BatchSpec {
            grad_batch: 20,
            hess_batch: 10,
            seed: 9,
            with_replacement: false,
        };
        let cfg = SgdConfig { lr: 0.5, iterations: 30 };
        let x0 = Vector::from_element(5, 3.0);
        let a = run_sgd(&p, &mut MinibatchOracle::new(&p, spec).unwrap(), &cfg, &x0).unwrap();
        let b = run_sgd(&p, &mut MinibatchOracle::new(&p, spec).unwrap(), &cfg, &x0).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.cost.hess_samples, 0);
        assert_eq!(a.cost.grad_samples, 600);
        assert!(a.records.iter().all(|r| r.hess_samples_cum == 0));
    }

    #[test]
    fn divergence_is_reported() {
        let q = QuadraticProblem::new(Matrix::identity(2, 2) * 10.0, Vector::zeros(2)).unwrap();
        let cfg = SgdConfig { lr: 1.0, iterations: 100 };
        let r = run_sgd(&q, &mut ExactOracle::new(&q), &cfg, &Vector::from_element(2, 1.0));
        assert!(matches!(r, Err(Error::Diverged { .. })));
    }

    #[test]
    fn negative_step_rejected() {
        assert!(SgdConfig { lr: -1.0, iterations: 1 }.validate().is_err());
        assert!(SgdConfig { lr: 1.0, iterations: 0 }.validate().is_err());
    }
}
