//! Certified inexact minimizers of the regularized models.
//!
//! A result is only returned when the model gradient at the step satisfies
//! `‖∇ω(s)‖ ≤ max(τ, floor)`, where the floor `64·ε·scale` accounts for
//! rounding in the gradient evaluation itself.

use log::{debug, warn};
use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{sorted_eigen, Matrix, Vector};
use crate::taylor_model::{CubicModel, QuarticModel};

/// Scalar iteration cap for the secular and Cholesky root finders.
const MAX_SCALAR_STEPS: usize = 200;

/// Relative threshold below which a gradient component in the bottom
/// eigenspace is treated as zero when testing for the hard case.
const HARD_CASE_TOL: f64 = 1e-12;

/// Dimension above which [`Backend::Auto`] avoids the eigendecomposition.
pub const SECULAR_MAX_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Secular,
    Iterative,
}

impl SolveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMethod::Secular => "secular",
            SolveMethod::Iterative => "iterative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Secular for `d ≤ 512`, iterative otherwise.
    #[default]
    Auto,
    Secular,
    Iterative,
}

#[derive(Debug, Clone)]
pub struct SubsolveResult {
    /// The step `y − x`.
    pub s: Vector,
    /// `‖∇ω(x + s)‖`.
    pub cert: f64,
    /// `‖s‖`.
    pub r: f64,
    pub inner_iters: usize,
    pub method_used: SolveMethod,
}

/// Floating-point floor on the certificate for a step of length `r`.
pub fn certificate_floor(g_norm: f64, h_norm: f64, delta_bar: f64, m: f64, r: f64) -> f64 {
    64.0 * f64::EPSILON * (g_norm + (h_norm + delta_bar) * r + 0.5 * m * r * r)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tolerance τ = {tau}")))
    }
}

/// τ-inexact minimizer of a cubic model with the default backend.
pub fn solve_cubic(model: &CubicModel, tau: f64) -> Result<SubsolveResult> {
    solve_cubic_with(model, tau, Backend::Auto)
}

pub fn solve_cubic_with(model: &CubicModel, tau: f64, backend: Backend) -> Result<SubsolveResult> {
    check_tau(tau)?;
    let method = match backend {
        Backend::Auto if model.dim() <= SECULAR_MAX_DIM => SolveMethod::Secular,
        Backend::Auto => SolveMethod::Iterative,
        Backend::Secular => SolveMethod::Secular,
        Backend::Iterative => SolveMethod::Iterative,
    };
    if model.m == 0.0 {
        return solve_regularized_newton(model, tau, method);
    }
    let (s, iters, h_norm) = match method {
        SolveMethod::Secular => secular_step(model)?,
        SolveMethod::Iterative => match cholesky_step(model)? {
            Some(found) => found,
            None => {
                debug!("iterative cubic solve hit the hard case; using the eigendecomposition");
                secular_step(model)?
            }
        },
    };
    finish_cubic(model, tau, s, iters, h_norm, method)
}

/// Checks the certificate, polishing with Newton steps when rounding left it
/// above the target.
fn finish_cubic(
    model: &CubicModel,
    tau: f64,
    mut s: Vector,
    mut iters: usize,
    h_norm: f64,
    method: SolveMethod,
) -> Result<SubsolveResult> {
    let g_norm = model.g.norm();
    let mut grad = model.grad(&s);
    let mut cert = grad.norm();
    let target = |r: f64| tau.max(certificate_floor(g_norm, h_norm, model.delta_bar, model.m, r));
    let mut polish = 0;
    while cert > target(s.norm()) && polish < 8 {
        polish += 1;
        let r = s.norm();
        let mut jac = &model.h + Matrix::identity(model.dim(), model.dim()) * (model.delta_bar + 0.5 * model.m * r);
        if r > 0.0 {
            jac.ger(0.5 * model.m / r, &s, &s, 1.0);
        }
        let Some(step) = jac.lu().solve(&grad) else { break };
        let trial = &s - step;
        let trial_grad = model.grad(&trial);
        let trial_cert = trial_grad.norm();
        if !(trial_cert < cert) {
            break;
        }
        s = trial;
        grad = trial_grad;
        cert = trial_cert;
    }
    iters += polish;
    let r = s.norm();
    if !cert.is_finite() {
        return Err(Error::NonFinite("cubic subproblem step"));
    }
    if cert > target(r) {
        return Err(Error::NoConvergence {
            context: format!("cubic subproblem ({})", method.as_str()),
            iterations: iters,
            residual: cert,
        });
    }
    Ok(SubsolveResult {
        s,
        cert,
        r,
        inner_iters: iters,
        method_used: method,
    })
}

fn solve_regularized_newton(model: &CubicModel, tau: f64, method: SolveMethod) -> Result<SubsolveResult> {
    let d = model.dim();
    let shifted = &model.h + Matrix::identity(d, d) * model.delta_bar;
    let chol = Cholesky::new(shifted).ok_or_else(|| {
        Error::InvalidParameter("M = 0 requires H + δ̄I to be positive definite".into())
    })?;
    let s = -chol.solve(&model.g);
    finish_cubic(model, tau, s, 1, model.h.norm(), method)
}

/// Eigendecomposition plus a scalar root find for the step length.
///
/// Returns the step, the number of scalar iterations and `‖H‖₂`.
fn secular_step(model: &CubicModel) -> Result<(Vector, usize, f64)> {
    let d = model.dim();
    let (lambda, q) = sorted_eigen(&model.h);
    let g_hat = q.tr_mul(&model.g);
    let h_norm = lambda[0].abs().max(lambda[d - 1].abs());
    let mu: Vec<f64> = lambda.iter().map(|l| l + model.delta_bar).collect();
    let half_m = 0.5 * model.m;
    let r_low = (-mu[0] / half_m).max(0.0);
    let g_norm = model.g.norm();

    let bottom_tol = 1e-12 * (1.0 + h_norm);
    let bottom: Vec<usize> = (0..d).filter(|&i| lambda[i] - lambda[0] <= bottom_tol).collect();
    let orthogonal = bottom
        .iter()
        .all(|&i| g_hat[i].abs() <= HARD_CASE_TOL * g_norm);

    let step_norm_sq = |r: f64, skip_bottom: bool| -> f64 {
        (0..d)
            .filter(|i| !(skip_bottom && bottom.contains(i)))
            .map(|i| {
                let si = g_hat[i] / (mu[i] + half_m * r);
                si * si
            })
            .sum()
    };
    let to_original = |r: f64, skip_bottom: bool| -> Vector {
        let coords = Vector::from_fn(d, |i, _| {
            if skip_bottom && bottom.contains(&i) {
                0.0
            } else {
                -g_hat[i] / (mu[i] + half_m * r)
            }
        });
        &q * coords
    };

    if orthogonal && r_low > 0.0 {
        let nb = step_norm_sq(r_low, true);
        if nb <= r_low * r_low {
            // Hard case: the stationary radius sits on the boundary of the
            // admissible region; fill the rest with a bottom eigenvector.
            let theta = (r_low * r_low - nb).sqrt();
            let s = to_original(r_low, true) + q.column(bottom[0]) * theta;
            return Ok((s, 0, h_norm));
        }
    }
    if g_norm == 0.0 {
        return Ok((Vector::zeros(d), 0, h_norm));
    }

    let psi = |r: f64| step_norm_sq(r, false).sqrt() - r;
    let mut lo = r_low;
    let mut hi = r_low + (g_norm / half_m).sqrt() * std::f64::consts::SQRT_2;
    if mu[0] > 0.0 {
        hi = hi.min(g_norm / mu[0]);
    }
    let mut r = hi;
    let mut iters = 0;
    loop {
        if iters >= MAX_SCALAR_STEPS {
            return Err(Error::NoConvergence {
                context: "secular equation".into(),
                iterations: iters,
                residual: psi(r).abs(),
            });
        }
        iters += 1;
        let norm_sq = step_norm_sq(r, false);
        let norm = norm_sq.sqrt();
        let value = norm - r;
        if value == 0.0 || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
        if value > 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        // Newton on φ(r) = 1/‖s(r)‖ − 1/r, which is close to linear in r.
        let dnorm = -half_m
            * (0..d)
                .map(|i| {
                    let den = mu[i] + half_m * r;
                    g_hat[i] * g_hat[i] / (den * den * den)
                })
                .sum::<f64>()
            / norm;
        let phi = 1.0 / norm - 1.0 / r;
        let dphi = -dnorm / norm_sq + 1.0 / (r * r);
        let newton = r - phi / dphi;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - r).abs() <= 4.0 * f64::EPSILON * r {
            r = next;
            break;
        }
        r = next;
    }
    Ok((to_original(r, false), iters, h_norm))
}

/// Root find for the step length using Cholesky factorizations of
/// `H + (δ̄ + M r/2) I` in place of an eigendecomposition.
///
/// Returns `None` in the hard case, where no factorizable radius satisfies
/// the secular equation.
fn cholesky_step(model: &CubicModel) -> Result<Option<(Vector, usize, f64)>> {
    let d = model.dim();
    let half_m = 0.5 * model.m;
    let g_norm = model.g.norm();
    let h_norm = model.h.norm();
    let factor = |r: f64| {
        let shifted = &model.h + Matrix::identity(d, d) * (model.delta_bar + half_m * r);
        Cholesky::new(shifted)
    };
    if g_norm == 0.0 {
        return Ok(factor(0.0).map(|_| (Vector::zeros(d), 0, h_norm)));
    }
    // Gershgorin lower bound on λ_min gives a bracket without eigenvalues.
    let gershgorin = (0..d)
        .map(|i| {
            let off: f64 = (0..d).filter(|&j| j != i).map(|j| model.h[(i, j)].abs()).sum();
            model.h[(i, i)] - off
        })
        .fold(f64::INFINITY, f64::min);
    let r_low_bound = ((-gershgorin - model.delta_bar) / half_m).max(0.0);
    let mut lo = 0.0;
    let mut hi = r_low_bound + (g_norm / half_m).sqrt() * std::f64::consts::SQRT_2;
    let mut r = hi;
    let mut best: Option<Vector> = None;
    for iters in 1..=MAX_SCALAR_STEPS {
        let Some(chol) = factor(r) else {
            lo = r;
            r = 0.5 * (lo + hi);
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(None);
            }
            continue;
        };
        let s = -chol.solve(&model.g);
        let norm = s.norm();
        let value = norm - r;
        if value > 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        best = Some(s.clone());
        if value.abs() <= 4.0 * f64::EPSILON * r.max(norm) {
            return Ok(Some((s, iters, h_norm)));
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            // A collapsed bracket with ‖s‖ short of r means the root sits at
            // the singular shift.
            return Ok((value.abs() <= 1e-8 * r).then_some((s, iters, h_norm)));
        }
        // d‖s‖/dr = −(M/2) sᵀ(H + μI)⁻¹s / ‖s‖ = −(M/2)‖L⁻¹s‖² / ‖s‖.
        let w = chol
            .l()
            .solve_lower_triangular(&s)
            .unwrap_or_else(|| Vector::zeros(d));
        let dnorm = -half_m * w.norm_squared() / norm;
        let phi = 1.0 / norm - 1.0 / r;
        let dphi = -dnorm / (norm * norm) + 1.0 / (r * r);
        let newton = r - phi / dphi;
        r = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    match best {
        Some(s) if (s.norm() - hi).abs() <= 1e-10 * hi => Ok(Some((s, MAX_SCALAR_STEPS, h_norm))),
        _ => Err(Error::NoConvergence {
            context: "cubic subproblem (iterative)".into(),
            iterations: MAX_SCALAR_STEPS,
            residual: hi - lo,
        }),
    }
}

/// Default iteration cap for [`solve_tensor`].
pub const TENSOR_MAX_ITERS: usize = 5000;

/// τ-inexact minimizer of a quartic-regularized third-order model.
///
/// Starts from the cubic step of the model's second-order part (or the anchor
/// if that is worse) and descends along damped Newton directions of the model,
/// falling back to the negative gradient where the model Hessian is not
/// positive definite. Backtracking uses factor 0.5 and sufficient decrease 1e-4.
pub fn solve_tensor(model: &QuarticModel, tau: f64, max_iters: usize) -> Result<SubsolveResult> {
    check_tau(tau)?;
    let d = model.dim();
    let g_norm = model.g1.norm();
    let g2_norm = model.g2.norm();
    let g3_norm = model.g3.frobenius_norm();
    let target = |r: f64| {
        let scale = g_norm
            + (g2_norm + model.delta_bar) * r
            + (0.5 * g3_norm + 0.5 * model.eta3_delta3) * r * r
            + 0.5 * model.m * r * r * r;
        tau.max(64.0 * f64::EPSILON * scale)
    };

    let mut s = Vector::zeros(d);
    let mut value = model.value(&s);
    if model.m > 0.0 {
        if let Ok(start) = model.quadratic_part(model.m).and_then(|c| solve_cubic(&c, 0.0)) {
            let v = model.value(&start.s);
            if v <= value {
                s = start.s;
                value = v;
            }
        }
    }

    for iter in 0..=max_iters {
        let (grad, hess) = model.grad_hessian(&s);
        let cert = grad.norm();
        if !cert.is_finite() || !value.is_finite() {
            return Err(Error::NonFinite("tensor subproblem step"));
        }
        if cert <= target(s.norm()) {
            return Ok(SubsolveResult {
                r: s.norm(),
                s,
                cert,
                inner_iters: iter,
                method_used: SolveMethod::Iterative,
            });
        }
        if iter == max_iters {
            return Err(Error::NoConvergence {
                context: "tensor subproblem".into(),
                iterations: max_iters,
                residual: cert,
            });
        }
        let newton = Cholesky::new(hess.clone()).map(|c| -c.solve(&grad));
        let dir = match newton {
            Some(dir) if grad.dot(&dir) < 0.0 => dir,
            _ => {
                // Scale the gradient step by the curvature bound so the first
                // trial is not wildly too long.
                let curv = hess.norm().max(f64::MIN_POSITIVE);
                -&grad / curv
            }
        };
        let slope = grad.dot(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &s + &dir * t;
            let tv = model.value(&trial);
            if tv <= value + 1e-4 * t * slope {
                s = trial;
                value = tv;
                accepted = true;
                break;
            }
            // Near the minimizer the value change drowns in rounding; accept a
            // full step that still reduces the gradient norm.
            if t == 1.0
                && tv <= value + 8.0 * f64::EPSILON * (1.0 + value.abs())
                && model.grad(&trial).norm() < cert
            {
                s = trial;
                value = tv;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            warn!("tensor subproblem line search stalled at certificate {cert:e}");
            return Err(Error::NoConvergence {
                context: "tensor subproblem line search".into(),
                iterations: iter,
                residual: cert,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}
