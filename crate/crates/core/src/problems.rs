//! Test objectives with exact derivatives up to order three.

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, asymmetry, sym_eigen_range, Matrix, Tensor3, Vector, MAX_TENSOR_DIM};

/// `max_z |d³/dz³ log(1 + e^{-z})| = max_z |σ(z)(1-σ(z))(1-2σ(z))|`.
pub const LOGISTIC_THIRD_DERIVATIVE_BOUND: f64 = 0.096_225_044_864_937_63; // 1/(6√3)

/// `max_z |d⁴/dz⁴ log(1 + e^{-z})|`, attained at `z = 0`.
pub const LOGISTIC_FOURTH_DERIVATIVE_BOUND: f64 = 0.125;

/// Lipschitz and curvature constants of an objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessConstants {
    /// Gradient Lipschitz constant.
    pub l1: f64,
    /// Hessian Lipschitz constant.
    pub l2: f64,
    /// Third-derivative Lipschitz constant.
    pub l3: f64,
    /// Strong convexity modulus (0 when merely convex).
    pub mu: f64,
}

/// Value and derivatives of an objective at a point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Option<Vector>,
    pub hessian: Option<Matrix>,
    pub third: Option<Tensor3>,
}

/// A sample-average objective `f(x) = (1/n) Σ f_i(x)` with exact derivatives.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of component functions available for minibatching.
    fn num_samples(&self) -> usize;

    /// Derivatives of order `0..=order` of the average over `subset`
    /// (all samples when `None`).
    fn eval(&self, x: &Vector, order: usize, subset: Option<&[usize]>) -> Result<Evaluation>;

    fn constants(&self) -> SmoothnessConstants;

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.eval(x, 0, None)?.value)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.eval(x, 1, None)?.gradient.expect("order 1 evaluation"))
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        Ok(self.eval(x, 2, None)?.hessian.expect("order 2 evaluation"))
    }
}

fn check_request(dim: usize, n: usize, x: &Vector, order: usize, subset: Option<&[usize]>) -> Result<()> {
    check_dim(dim, x.len())?;
    if !all_finite(x) {
        return Err(Error::NonFinite("evaluation point"));
    }
    if order > 3 || (order == 3 && dim > MAX_TENSOR_DIM) {
        return Err(Error::UnsupportedOrder { order, dim });
    }
    if let Some(idx) = subset {
        if idx.is_empty() {
            return Err(Error::InvalidParameter("empty sample subset".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, n });
        }
    }
    Ok(())
}

/// `f(x) = ½ xᵀAx − bᵀx` with `A` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    a: Matrix,
    b: Vector,
    minimizer: Option<Vector>,
}

impl QuadraticProblem {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: a.ncols(),
            });
        }
        check_dim(d, b.len())?;
        if d == 0 {
            return Err(Error::InvalidProblem("zero dimension".into()));
        }
        if asymmetry(&a) > 1e-12 {
            return Err(Error::InvalidProblem("matrix is not symmetric".into()));
        }
        let (lo, hi) = sym_eigen_range(&a);
        if lo < -1e-12 * (1.0 + hi.abs()) {
            return Err(Error::InvalidProblem(format!(
                "matrix is not positive semidefinite (λ_min = {lo:e})"
            )));
        }
        Ok(Self { a, b, minimizer: None })
    }

    /// Attaches a known minimizer, checking `‖A x* − b‖ ≤ 1e-8 (1 + ‖b‖)`.
    pub fn with_minimizer(mut self, x_star: Vector) -> Result<Self> {
        check_dim(self.b.len(), x_star.len())?;
        let resid = (&self.a * &x_star - &self.b).norm();
        if resid > 1e-8 * (1.0 + self.b.norm()) {
            return Err(Error::InvalidProblem(format!(
                "supplied minimizer has residual {resid:e}"
            )));
        }
        self.minimizer = Some(x_star);
        Ok(self)
    }

    /// Quadratic with the given eigenvalues in a random orthonormal basis and
    /// minimizer `x_star`.
    pub fn random_with_spectrum(eigenvalues: &[f64], x_star: Vector, seed: u64) -> Result<Self> {
        let d = eigenvalues.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let a = &q * Matrix::from_diagonal(&Vector::from_column_slice(eigenvalues)) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let b = &a * &x_star;
        Self::new(a, b)?.with_minimizer(x_star)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &Vector {
        &self.b
    }

    pub fn minimizer(&self) -> Option<&Vector> {
        self.minimizer.as_ref()
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn num_samples(&self) -> usize {
        1
    }

    fn eval(&self, x: &Vector, order: usize, subset: Option<&[usize]>) -> Result<Evaluation> {
        let d = self.dim();
        check_request(d, 1, x, order, subset)?;
        let ax = &self.a * x;
        let value = 0.5 * x.dot(&ax) - self.b.dot(x);
        Ok(Evaluation {
            value,
            gradient: (order >= 1).then(|| ax - &self.b),
            hessian: (order >= 2).then(|| self.a.clone()),
            third: (order >= 3).then(|| Tensor3::zeros(d)),
        })
    }

    fn constants(&self) -> SmoothnessConstants {
        let (lo, hi) = sym_eigen_range(&self.a);
        SmoothnessConstants {
            l1: hi.max(0.0),
            l2: 0.0,
            l3: 0.0,
            mu: lo.max(0.0),
        }
    }
}

/// `log(1 + e^{-z})` without overflow.
#[inline]
pub fn logistic_loss(z: f64) -> f64 {
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Derivatives of `z ↦ log(1 + e^{-z})` of orders 1 through 4.
#[inline]
fn logistic_derivatives(z: f64) -> [f64; 4] {
    let s = sigmoid(z);
    let sm = sigmoid(-z);
    let u = s * sm;
    [-sm, u, u * (sm - s), u * (1.0 - 6.0 * u)]
}

/// Regularized logistic regression
/// `f(x) = (1/n) Σ log(1 + exp(−b_i a_iᵀx)) + (μ/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    /// Feature vectors stored as columns (`d × n`).
    samples: Matrix,
    labels: Vec<f64>,
    l2_reg: f64,
}

impl LogisticProblem {
    /// `features` is `n × d` with one sample per row.
    pub fn new(features: Matrix, labels: Vec<f64>, l2_reg: f64) -> Result<Self> {
        Self::from_columns(features.transpose(), labels, l2_reg)
    }

    /// `samples` is `d × n` with one sample per column.
    pub fn from_columns(samples: Matrix, labels: Vec<f64>, l2_reg: f64) -> Result<Self> {
        let (d, n) = samples.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidProblem("need n ≥ 1 and d ≥ 1".into()));
        }
        check_dim(n, labels.len())?;
        if let Some(b) = labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(Error::InvalidProblem(format!("label {b} not in {{-1, +1}}")));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite feature".into()));
        }
        if !(l2_reg >= 0.0 && l2_reg.is_finite()) {
            return Err(Error::InvalidProblem(format!("l2 regularization {l2_reg}")));
        }
        Ok(Self {
            samples,
            labels,
            l2_reg,
        })
    }

    /// Gaussian features scaled to unit expected norm, labels from a planted
    /// linear classifier with a fraction `flip` of labels flipped.
    pub fn synthetic(n: usize, d: usize, flip: f64, l2_reg: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (d as f64).sqrt();
        let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
        let mut samples = Matrix::zeros(d, n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let mut dot = 0.0;
            for j in 0..d {
                let v = rng.sample::<f64, _>(StandardNormal) * scale;
                samples[(j, i)] = v;
                dot += v * w[j];
            }
            let mut b = if dot >= 0.0 { 1.0 } else { -1.0 };
            if rng.random::<f64>() < flip {
                b = -b;
            }
            labels.push(b);
        }
        Self::from_columns(samples, labels, l2_reg)
    }

    pub fn num_features(&self) -> usize {
        self.samples.nrows()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn l2_reg(&self) -> f64 {
        self.l2_reg
    }

    /// Feature matrix with one sample per row.
    pub fn features(&self) -> Matrix {
        self.samples.transpose()
    }

    pub fn sample(&self, i: usize) -> Vector {
        self.samples.column(i).into_owned()
    }

    /// The problem restricted to the given sample indices.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let n = self.labels.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, n });
        }
        let samples = self.samples.select_columns(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::from_columns(samples, labels, self.l2_reg)
    }

    fn max_sample_norm(&self) -> f64 {
        self.samples
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

impl Objective for LogisticProblem {
    fn dim(&self) -> usize {
        self.samples.nrows()
    }

    fn num_samples(&self) -> usize {
        self.labels.len()
    }

    fn eval(&self, x: &Vector, order: usize, subset: Option<&[usize]>) -> Result<Evaluation> {
        let d = self.dim();
        let n = self.num_samples();
        check_request(d, n, x, order, subset)?;

        let all: Vec<usize>;
        let idx = match subset {
            Some(s) => s,
            None => {
                all = (0..n).collect();
                &all
            }
        };
        let inv_k = 1.0 / idx.len() as f64;

        let mut value = 0.0;
        let mut grad = (order >= 1).then(|| Vector::zeros(d));
        let mut weighted = (order >= 2).then(|| Matrix::zeros(d, idx.len()));
        let mut third = (order >= 3).then(|| Tensor3::zeros(d));

        for (col, &i) in idx.iter().enumerate() {
            let a = self.samples.column(i);
            let b = self.labels[i];
            let z = b * a.dot(x);
            value += logistic_loss(z);
            if order == 0 {
                continue;
            }
            let dz = logistic_derivatives(z);
            if let Some(g) = grad.as_mut() {
                g.axpy(dz[0] * b * inv_k, &a, 1.0);
            }
            if let Some(w) = weighted.as_mut() {
                w.column_mut(col).copy_from(&(a * dz[1].sqrt()));
            }
            if let Some(t) = third.as_mut() {
                t.add_rank_one(dz[2] * b * inv_k, a.as_slice());
            }
        }
        value = value * inv_k + 0.5 * self.l2_reg * x.norm_squared();
        if !value.is_finite() {
            return Err(Error::NonFinite("logistic objective"));
        }
        if let Some(g) = grad.as_mut() {
            g.axpy(self.l2_reg, x, 1.0);
        }
        let hessian = weighted.map(|w| {
            let mut h = (&w * w.transpose()) * inv_k;
            for j in 0..d {
                h[(j, j)] += self.l2_reg;
            }
            h
        });
        Ok(Evaluation {
            value,
            gradient: grad,
            hessian,
            third,
        })
    }

    fn constants(&self) -> SmoothnessConstants {
        let a = self.max_sample_norm();
        SmoothnessConstants {
            l1: 0.25 * a * a + self.l2_reg,
            l2: LOGISTIC_THIRD_DERIVATIVE_BOUND * a.powi(3),
            l3: LOGISTIC_FOURTH_DERIVATIVE_BOUND * a.powi(4),
            mu: self.l2_reg,
        }
    }
}

/// High-accuracy minimizer by damped Newton iterations with backtracking.
///
/// Used to obtain reference optimal values for convergence checks. Stops when
/// `‖∇f(x)‖ ≤ tol` or when no further decrease is possible in floating point.
pub fn reference_solve(problem: &dyn Objective, x0: &Vector, tol: f64) -> Result<Vector> {
    let mut x = x0.clone();
    for _ in 0..500 {
        let ev = problem.eval(&x, 2, None)?;
        let g = ev.gradient.expect("gradient");
        if g.norm() <= tol {
            return Ok(x);
        }
        let mut h = ev.hessian.expect("hessian");
        let shift = 1e-14 * (1.0 + h.amax());
        for i in 0..h.nrows() {
            h[(i, i)] += shift;
        }
        let dir = match Cholesky::new(h) {
            Some(c) => -c.solve(&g),
            None => -g.clone(),
        };
        let slope = g.dot(&dir);
        let mut step = 1.0;
        let f0 = ev.value;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let ft = problem.value(&trial)?;
            if ft <= f0 + 1e-4 * step * slope {
                x = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Full-precision stationarity reached: the objective can no longer
            // decrease measurably along the Newton direction.
            let gn = g.norm();
            if gn <= tol.max(1e-9) {
                return Ok(x);
            }
            return Err(Error::NoConvergence {
                context: "reference solve".into(),
                iterations: 0,
                residual: gn,
            });
        }
    }
    let gn = problem.gradient(&x)?.norm();
    if gn <= tol.max(1e-9) {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            context: "reference solve".into(),
            iterations: 500,
            residual: gn,
        })
    }
}
