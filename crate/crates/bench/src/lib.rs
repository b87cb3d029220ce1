//! Fixtures shared by the criterion benchmarks.

use ascn_core::{CoefficientForm, CubicModel, EstimatorState, LogisticProblem, Matrix, Objective, QuarticModel, Vector};

fn logistic(d: usize) -> LogisticProblem {
    LogisticProblem::synthetic(400, d, 0.1, 1e-3, 17).expect("valid synthetic problem")
}

/// Cubic model of a logistic loss at `3e`. With `indefinite` the Hessian is
/// shifted down so that the subproblem has a negative-curvature direction.
pub fn cubic_fixture(d: usize, indefinite: bool) -> CubicModel {
    let p = logistic(d);
    let x = Vector::from_element(d, 3.0);
    let e = p.eval(&x, 2, None).expect("in-range request");
    let mut h = e.hessian.expect("order 2 has a Hessian");
    if indefinite {
        h -= Matrix::identity(d, d) * (2.0 * h.norm());
    }
    CubicModel::new(x, 0.0, e.gradient.expect("order 2 has a gradient"), h, 0.05, 4.0 * p.constants().l2).expect("consistent model")
}

/// Third-order model of a logistic loss at `3e`.
pub fn quartic_fixture(d: usize) -> QuarticModel {
    let p = logistic(d);
    let x = Vector::from_element(d, 3.0);
    let e = p.eval(&x, 3, None).expect("in-range request");
    QuarticModel::new(
        x,
        0.0,
        e.gradient.expect("order 3 has a gradient"),
        e.hessian.expect("order 3 has a Hessian"),
        e.third.expect("order 3 has a tensor"),
        0.05,
        0.0,
        4.0 / 3.0 * p.constants().l3,
    )
    .expect("consistent model")
}

/// Estimating sequence with every coefficient active after a few updates.
pub fn estimator_fixture(d: usize, form: CoefficientForm) -> EstimatorState {
    let mut est = EstimatorState::new(Vector::zeros(d), form, 0.5, vec![0.0, 2.0, 3.0]).expect("valid coefficients");
    for k in 1..=5 {
        let g = Vector::from_fn(d, |i, _| ((i * 7 + k * 3) % 11) as f64 - 5.0);
        est.accumulate(k as f64, &g, 0.5 + k as f64, &[k as f64, 2.0 + k as f64, 3.0 + k as f64])
            .expect("nondecreasing coefficients");
    }
    est
}
