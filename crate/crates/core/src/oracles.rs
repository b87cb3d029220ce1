//! Inexact derivative oracles: exact, minibatch and additive Gaussian noise.
//!
//! Every stochastic oracle draws the randomness of its `k`-th query from an
//! independent ChaCha stream `(seed, k)`, so a run is reproducible from the
//! seed alone regardless of how much randomness earlier queries consumed.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{sym_spectral_norm, Matrix, Tensor3, Vector};
use crate::problems::Objective;

/// Which derivatives a query must return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    Grad,
    GradHess,
    GradHessThird,
}

impl Need {
    pub fn order(self) -> usize {
        match self {
            Need::Grad => 1,
            Need::GradHess => 2,
            Need::GradHessThird => 3,
        }
    }
}

/// Number of component-function derivatives consumed by a query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleCost {
    pub grad_samples: u64,
    pub hess_samples: u64,
}

impl std::ops::AddAssign for OracleCost {
    fn add_assign(&mut self, rhs: Self) {
        self.grad_samples += rhs.grad_samples;
        self.hess_samples += rhs.hess_samples;
    }
}

#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub g: Vector,
    pub h: Option<Matrix>,
    pub t3: Option<Tensor3>,
    pub cost: OracleCost,
}

pub trait Oracle: Send {
    fn dim(&self) -> usize;

    fn query(&mut self, x: &Vector, need: Need) -> Result<OracleOutput>;

    /// Number of queries answered so far.
    fn queries(&self) -> u64;
}

fn exact_output(problem: &dyn Objective, x: &Vector, need: Need, subset: Option<&[usize]>) -> Result<OracleOutput> {
    let ev = problem.eval(x, need.order(), subset)?;
    Ok(OracleOutput {
        g: ev.gradient.expect("gradient requested"),
        h: ev.hessian,
        t3: ev.third,
        cost: OracleCost::default(),
    })
}

fn query_rng(seed: u64, query: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(query);
    rng
}

/// True derivatives of the full objective.
pub struct ExactOracle<'a> {
    problem: &'a dyn Objective,
    queries: u64,
}

impl<'a> ExactOracle<'a> {
    pub fn new(problem: &'a dyn Objective) -> Self {
        Self { problem, queries: 0 }
    }
}

impl Oracle for ExactOracle<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn query(&mut self, x: &Vector, need: Need) -> Result<OracleOutput> {
        let mut out = exact_output(self.problem, x, need, None)?;
        out.cost = OracleCost {
            grad_samples: 1,
            hess_samples: u64::from(need != Need::Grad),
        };
        self.queries += 1;
        Ok(out)
    }

    fn queries(&self) -> u64 {
        self.queries
    }
}

/// Minibatch sizes and sampling mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub grad_batch: usize,
    pub hess_batch: usize,
    pub seed: u64,
    pub with_replacement: bool,
}

/// Subset averages over independently drawn gradient and Hessian index sets.
pub struct MinibatchOracle<'a> {
    problem: &'a dyn Objective,
    spec: BatchSpec,
    queries: u64,
}

impl<'a> MinibatchOracle<'a> {
    pub fn new(problem: &'a dyn Objective, spec: BatchSpec) -> Result<Self> {
        let n = problem.num_samples();
        for (name, r) in [("gradient", spec.grad_batch), ("Hessian", spec.hess_batch)] {
            if r == 0 || r > n {
                return Err(Error::InvalidParameter(format!(
                    "{name} batch size {r} must lie in [1, {n}]"
                )));
            }
        }
        Ok(Self {
            problem,
            spec,
            queries: 0,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, r: usize) -> Vec<usize> {
        let n = self.problem.num_samples();
        if self.spec.with_replacement {
            (0..r).map(|_| rng.random_range(0..n)).collect()
        } else {
            index::sample(rng, n, r).into_vec()
        }
    }
}

impl Oracle for MinibatchOracle<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn query(&mut self, x: &Vector, need: Need) -> Result<OracleOutput> {
        let mut rng = query_rng(self.spec.seed, self.queries);
        let grad_idx = self.draw(&mut rng, self.spec.grad_batch);
        let g = exact_output(self.problem, x, Need::Grad, Some(&grad_idx))?.g;
        let mut out = OracleOutput {
            g,
            h: None,
            t3: None,
            cost: OracleCost {
                grad_samples: self.spec.grad_batch as u64,
                hess_samples: 0,
            },
        };
        if need != Need::Grad {
            let hess_idx = self.draw(&mut rng, self.spec.hess_batch);
            let higher = exact_output(self.problem, x, need, Some(&hess_idx))?;
            out.h = higher.h;
            out.t3 = higher.t3;
            out.cost.hess_samples = self.spec.hess_batch as u64;
        }
        self.queries += 1;
        Ok(out)
    }

    fn queries(&self) -> u64 {
        self.queries
    }
}

/// Additive Gaussian noise scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub seed: u64,
}

/// Monte-Carlo estimate of `E‖(G+Gᵀ)/2‖₂` for a `d × d` standard Gaussian `G`.
fn symmetric_gaussian_norm_mean(d: usize) -> f64 {
    const SAMPLES: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9_7f4a_7c15 ^ d as u64);
    let total: f64 = (0..SAMPLES)
        .map(|_| sym_spectral_norm(&symmetric_gaussian(&mut rng, d)))
        .sum();
    total / SAMPLES as f64
}

fn symmetric_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) * 0.5
}

/// Exact derivatives plus `σ₁ z/√d` on the gradient, `σ₂ W` on the Hessian
/// and a scaled symmetric Gaussian tensor on the third derivative.
///
/// `W = (G+Gᵀ)/(2 c_d)` where `c_d` estimates `E‖(G+Gᵀ)/2‖₂`, so the spectral
/// size of the Hessian error is close to `σ₂`.
pub struct NoiseOracle<'a> {
    problem: &'a dyn Objective,
    spec: NoiseSpec,
    hess_norm: f64,
    queries: u64,
}

impl<'a> NoiseOracle<'a> {
    pub fn new(problem: &'a dyn Objective, spec: NoiseSpec) -> Result<Self> {
        for (name, v) in [("sigma1", spec.sigma1), ("sigma2", spec.sigma2), ("sigma3", spec.sigma3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        let hess_norm = if spec.sigma2 > 0.0 {
            symmetric_gaussian_norm_mean(problem.dim())
        } else {
            1.0
        };
        Ok(Self {
            problem,
            spec,
            hess_norm,
            queries: 0,
        })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }
}

impl Oracle for NoiseOracle<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn query(&mut self, x: &Vector, need: Need) -> Result<OracleOutput> {
        let d = self.problem.dim();
        let mut out = exact_output(self.problem, x, need, None)?;
        let mut rng = query_rng(self.spec.seed, self.queries);
        if self.spec.sigma1 > 0.0 {
            let scale = self.spec.sigma1 / (d as f64).sqrt();
            for gi in out.g.iter_mut() {
                *gi += scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        if let Some(h) = out.h.as_mut() {
            if self.spec.sigma2 > 0.0 {
                let w = symmetric_gaussian(&mut rng, d);
                *h += w * (self.spec.sigma2 / self.hess_norm);
            }
        }
        if let Some(t) = out.t3.as_mut() {
            if self.spec.sigma3 > 0.0 {
                let scale = self.spec.sigma3 / (d as f64).powf(1.5);
                for i in 0..d {
                    for j in i..d {
                        for k in j..d {
                            let z = scale * rng.sample::<f64, _>(StandardNormal);
                            let perms = [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)];
                            // Repeated indices make some permutations coincide;
                            // each distinct entry gets `z` exactly once.
                            for (slot, p) in perms.iter().enumerate() {
                                if perms[..slot].contains(p) {
                                    continue;
                                }
                                t.set(p.0, p.1, p.2, t.get(p.0, p.1, p.2) + z);
                            }
                        }
                    }
                }
            }
        }
        out.cost = OracleCost {
            grad_samples: 1,
            hess_samples: u64::from(need != Need::Grad),
        };
        self.queries += 1;
        Ok(out)
    }

    fn queries(&self) -> u64 {
        self.queries
    }
}

/// Realized directional Hessian error `‖(H − ∇²f(x))(y − x)‖ / ‖y − x‖`.
///
/// Diagnostic only; requires the exact Hessian from `problem`.
pub fn delta2_along(output: &OracleOutput, problem: &dyn Objective, x: &Vector, y: &Vector) -> Result<f64> {
    check_dim(problem.dim(), y.len())?;
    let h = output
        .h
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("oracle output carries no Hessian".into()))?;
    let dir = y - x;
    let len = dir.norm();
    if len == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let exact = problem.hessian(x)?;
    Ok(((h - exact) * dir).norm() / len)
}
