//! Regularized Taylor models.
//!
//! Both models are evaluated in terms of the step `s = y − x` from the anchor;
//! the `*_at` helpers take the absolute point `y` instead.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, asymmetry, Matrix, Tensor3, Vector};

/// `ω(y) = f_x + ⟨g, s⟩ + ½⟨s, Hs⟩ + (δ̄/2)‖s‖² + (M/6)‖s‖³` with `s = y − x`.
#[derive(Debug, Clone)]
pub struct CubicModel {
    pub anchor: Vector,
    pub f_x: f64,
    pub g: Vector,
    pub h: Matrix,
    pub delta_bar: f64,
    pub m: f64,
}

impl CubicModel {
    pub fn new(anchor: Vector, f_x: f64, g: Vector, h: Matrix, delta_bar: f64, m: f64) -> Result<Self> {
        let d = anchor.len();
        check_dim(d, g.len())?;
        check_dim(d, h.nrows())?;
        check_dim(d, h.ncols())?;
        if !all_finite(&g) || !h.iter().all(|v| v.is_finite()) || !f_x.is_finite() {
            return Err(Error::NonFinite("cubic model"));
        }
        if asymmetry(&h) > 1e-12 {
            return Err(Error::InvalidParameter("model Hessian is not symmetric".into()));
        }
        if !(delta_bar >= 0.0 && delta_bar.is_finite()) || !(m >= 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularizers must be finite and nonnegative (δ̄ = {delta_bar}, M = {m})"
            )));
        }
        Ok(Self {
            anchor,
            f_x,
            g,
            h,
            delta_bar,
            m,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn value(&self, s: &Vector) -> f64 {
        let r = s.norm();
        self.f_x + self.g.dot(s) + 0.5 * s.dot(&(&self.h * s)) + 0.5 * self.delta_bar * r * r + self.m / 6.0 * r * r * r
    }

    pub fn grad(&self, s: &Vector) -> Vector {
        let r = s.norm();
        &self.g + &self.h * s + s * (self.delta_bar + 0.5 * self.m * r)
    }

    pub fn value_at(&self, y: &Vector) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        Ok(self.value(&(y - &self.anchor)))
    }

    pub fn grad_at(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.dim(), y.len())?;
        Ok(self.grad(&(y - &self.anchor)))
    }
}

/// Third-order model with quartic regularization:
/// `ω(y) = f_x + ⟨G₁, s⟩ + ½⟨s, G₂s⟩ + (1/6)G₃[s]³ + (δ̄/2)‖s‖² + (η₃δ₃/6)‖s‖³ + (M/8)‖s‖⁴`.
///
/// Only the product `η₃δ₃` enters the model, so it is stored as one coefficient.
#[derive(Debug, Clone)]
pub struct QuarticModel {
    pub anchor: Vector,
    pub f_x: f64,
    pub g1: Vector,
    pub g2: Matrix,
    pub g3: Tensor3,
    pub delta_bar: f64,
    pub eta3_delta3: f64,
    pub m: f64,
}

impl QuarticModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        anchor: Vector,
        f_x: f64,
        g1: Vector,
        g2: Matrix,
        g3: Tensor3,
        delta_bar: f64,
        eta3_delta3: f64,
        m: f64,
    ) -> Result<Self> {
        let d = anchor.len();
        check_dim(d, g1.len())?;
        check_dim(d, g2.nrows())?;
        check_dim(d, g2.ncols())?;
        check_dim(d, g3.dim())?;
        if !all_finite(&g1) || !g2.iter().all(|v| v.is_finite()) || !g3.is_finite() || !f_x.is_finite() {
            return Err(Error::NonFinite("quartic model"));
        }
        if asymmetry(&g2) > 1e-12 {
            return Err(Error::InvalidParameter("model Hessian is not symmetric".into()));
        }
        if g3.symmetry_defect() > 1e-12 * (1.0 + g3.frobenius_norm()) {
            return Err(Error::InvalidParameter("third-derivative tensor is not symmetric".into()));
        }
        for (name, v) in [("δ̄", delta_bar), ("η₃δ₃", eta3_delta3), ("M", m)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        Ok(Self {
            anchor,
            f_x,
            g1,
            g2,
            g3,
            delta_bar,
            eta3_delta3,
            m,
        })
    }

    pub fn dim(&self) -> usize {
        self.g1.len()
    }

    pub fn value(&self, s: &Vector) -> f64 {
        let r = s.norm();
        let r2 = r * r;
        self.f_x
            + self.g1.dot(s)
            + 0.5 * s.dot(&(&self.g2 * s))
            + self.g3.contract3(s) / 6.0
            + 0.5 * self.delta_bar * r2
            + self.eta3_delta3 / 6.0 * r2 * r
            + self.m / 8.0 * r2 * r2
    }

    pub fn grad(&self, s: &Vector) -> Vector {
        let t = self.g3.contract1(s);
        self.grad_with(s, &t)
    }

    fn grad_with(&self, s: &Vector, t_s: &Matrix) -> Vector {
        let r = s.norm();
        &self.g1 + &self.g2 * s + t_s * s * 0.5 + s * (self.delta_bar + 0.5 * self.eta3_delta3 * r + 0.5 * self.m * r * r)
    }

    /// Gradient and Hessian together, sharing the tensor contraction.
    pub fn grad_hessian(&self, s: &Vector) -> (Vector, Matrix) {
        let d = self.dim();
        let t = self.g3.contract1(s);
        let grad = self.grad_with(s, &t);
        let r = s.norm();
        let mut hess = &self.g2 + t;
        let radial = self.delta_bar + 0.5 * self.eta3_delta3 * r + 0.5 * self.m * r * r;
        for i in 0..d {
            hess[(i, i)] += radial;
        }
        // Rank-one parts of the Hessians of ‖s‖³ and ‖s‖⁴.
        let outer_coef = if r > 0.0 { 0.5 * self.eta3_delta3 / r } else { 0.0 } + self.m;
        hess.ger(outer_coef, s, s, 1.0);
        (grad, hess)
    }

    /// The second-order part with the same `δ̄` as a cubic model.
    pub fn quadratic_part(&self, m: f64) -> Result<CubicModel> {
        CubicModel::new(self.anchor.clone(), self.f_x, self.g1.clone(), self.g2.clone(), self.delta_bar, m)
    }

    pub fn value_at(&self, y: &Vector) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        Ok(self.value(&(y - &self.anchor)))
    }

    pub fn grad_at(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.dim(), y.len())?;
        Ok(self.grad(&(y - &self.anchor)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{LogisticProblem, Objective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal(r: &mut ChaCha8Rng) -> f64 {
        r.sample(StandardNormal)
    }

    fn random_cubic(r: &mut ChaCha8Rng, d: usize) -> CubicModel {
        let b = Matrix::from_fn(d, d, |_, _| normal(r));
        CubicModel::new(
            Vector::from_fn(d, |_, _| normal(r)),
            normal(r),
            Vector::from_fn(d, |_, _| normal(r)),
            (&b + b.transpose()) * 0.5,
            r.random::<f64>(),
            0.1 + r.random::<f64>() * 3.0,
        )
        .unwrap()
    }

    fn random_quartic(r: &mut ChaCha8Rng, d: usize) -> QuarticModel {
        let b = Matrix::from_fn(d, d, |_, _| normal(r));
        let mut t = Tensor3::zeros(d);
        for _ in 0..3 {
            let a: Vec<f64> = (0..d).map(|_| normal(r)).collect();
            t.add_rank_one(normal(r), &a);
        }
        QuarticModel::new(
            Vector::from_fn(d, |_, _| normal(r)),
            normal(r),
            Vector::from_fn(d, |_, _| normal(r)),
            (&b + b.transpose()) * 0.5,
            t,
            r.random::<f64>(),
            r.random::<f64>(),
            0.5 + r.random::<f64>() * 3.0,
        )
        .unwrap()
    }

    fn scalar_cubic(g: f64, h: f64, delta_bar: f64, m: f64) -> CubicModel {
        CubicModel::new(
            Vector::zeros(1),
            0.0,
            Vector::from_element(1, g),
            Matrix::from_element(1, 1, h),
            delta_bar,
            m,
        )
        .unwrap()
    }

    #[test]
    fn value_at_anchor_is_f_x() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let m = random_cubic(&mut r, 4);
        assert_eq!(m.value_at(&m.anchor).unwrap(), m.f_x);
        assert_eq!(m.grad(&Vector::zeros(4)), m.g);
        let q = random_quartic(&mut r, 3);
        assert_eq!(q.value_at(&q.anchor).unwrap(), q.f_x);
        assert_eq!(q.grad(&Vector::zeros(3)), q.g1);
    }

    #[test]
    fn scalar_hand_expansion() {
        let m = scalar_cubic(1.0, 0.0, 0.0, 6.0);
        assert_eq!(m.value(&Vector::from_element(1, 1.0)), 2.0);
        for s in [-1.5, -0.3, 0.0, 0.7, 2.0] {
            let g = m.grad(&Vector::from_element(1, s))[0];
            assert!((g - (1.0 + 3.0 * s * s.abs())).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_checks() {
        let m = scalar_cubic(1.0, 0.0, 0.0, 1.0);
        assert!(matches!(m.value_at(&Vector::zeros(2)), Err(Error::DimensionMismatch { .. })));
        assert!(CubicModel::new(Vector::zeros(2), 0.0, Vector::zeros(3), Matrix::zeros(2, 2), 0.0, 1.0).is_err());
        assert!(CubicModel::new(Vector::zeros(1), 0.0, Vector::zeros(1), Matrix::zeros(1, 1), -1.0, 1.0).is_err());
    }

    // Double-double arithmetic for an independent high-precision re-summation.
    #[derive(Clone, Copy)]
    struct Dd(f64, f64);

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }

    fn dd_add(x: Dd, y: Dd) -> Dd {
        let s = two_sum(x.0, y.0);
        let e = s.1 + x.1 + y.1;
        two_sum(s.0, e)
    }

    fn dd_mul(x: Dd, y: Dd) -> Dd {
        let p = x.0 * y.0;
        let e = x.0.mul_add(y.0, -p) + x.0 * y.1 + x.1 * y.0;
        two_sum(p, e)
    }

    fn dd(v: f64) -> Dd {
        Dd(v, 0.0)
    }

    fn dd_sqrt(x: Dd) -> Dd {
        let a = x.0.sqrt();
        // One Newton correction: a + (x − a²)/(2a).
        let sq = dd_mul(dd(a), dd(a));
        let resid = dd_add(x, Dd(-sq.0, -sq.1));
        dd_add(dd(a), dd(resid.0 / (2.0 * a)))
    }

    fn dd_cubic_value(m: &CubicModel, s: &Vector) -> f64 {
        let d = s.len();
        let mut lin = dd(0.0);
        let mut quad = dd(0.0);
        let mut norm2 = dd(0.0);
        for i in 0..d {
            lin = dd_add(lin, dd_mul(dd(m.g[i]), dd(s[i])));
            norm2 = dd_add(norm2, dd_mul(dd(s[i]), dd(s[i])));
            for j in 0..d {
                quad = dd_add(quad, dd_mul(dd_mul(dd(s[i]), dd(m.h[(i, j)])), dd(s[j])));
            }
        }
        let r = dd_sqrt(norm2);
        let r3 = dd_mul(norm2, r);
        let mut total = dd(m.f_x);
        total = dd_add(total, lin);
        total = dd_add(total, dd_mul(dd(0.5), quad));
        total = dd_add(total, dd_mul(dd(0.5 * m.delta_bar), norm2));
        total = dd_add(total, dd_mul(dd(m.m / 6.0), r3));
        total.0 + total.1
    }

    #[test]
    fn value_matches_extended_precision_resummation() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let d = 1 + r.random_range(0..6);
            let m = random_cubic(&mut r, d);
            let s = Vector::from_fn(d, |_, _| normal(&mut r));
            let reference = dd_cubic_value(&m, &s);
            // Scale by the largest term so cancellation does not dominate.
            let rn = s.norm();
            let scale = m.f_x.abs() + m.g.norm() * rn + m.h.norm() * rn * rn + m.delta_bar * rn * rn + m.m * rn.powi(3);
            assert!((m.value(&s) - reference).abs() <= 1e-13 * scale);
        }
    }

    fn fd_check(value: impl Fn(&Vector) -> f64, grad: &Vector, s: &Vector) {
        let h = 1e-6 * (1.0 + s.norm());
        for i in 0..s.len() {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[i] += h;
            sm[i] -= h;
            let fd = (value(&sp) - value(&sm)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + grad.norm()), "{fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let d = 1 + r.random_range(0..5);
            let m = random_cubic(&mut r, d);
            let s = Vector::from_fn(d, |_, _| normal(&mut r));
            fd_check(|v| m.value(v), &m.grad(&s), &s);
            let q = random_quartic(&mut r, d);
            fd_check(|v| q.value(v), &q.grad(&s), &s);
        }
    }

    #[test]
    fn quartic_hessian_matches_gradient_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let q = random_quartic(&mut r, 4);
            let s = Vector::from_fn(4, |_, _| normal(&mut r));
            let (g, hess) = q.grad_hessian(&s);
            assert!((&g - q.grad(&s)).norm() < 1e-12 * (1.0 + g.norm()));
            let h = 1e-6;
            for i in 0..4 {
                let mut e = Vector::zeros(4);
                e[i] = h;
                let col = (q.grad(&(&s + &e)) - q.grad(&(&s - &e))) / (2.0 * h);
                assert!((col - hess.column(i)).norm() <= 1e-6 * (1.0 + hess.norm()));
            }
        }
    }

    #[test]
    fn convex_when_shifted_hessian_is_psd() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let d = 3;
            let mut m = random_cubic(&mut r, d);
            let (lo, _) = crate::linalg::sym_eigen_range(&m.h);
            m.delta_bar = (-lo).max(0.0) + r.random::<f64>() * 0.1;
            let a = Vector::from_fn(d, |_, _| normal(&mut r));
            let b = Vector::from_fn(d, |_, _| normal(&mut r));
            let mid = (&a + &b) * 0.5;
            let scale = 1.0 + m.value(&a).abs() + m.value(&b).abs();
            assert!(m.value(&mid) <= 0.5 * (m.value(&a) + m.value(&b)) + 1e-12 * scale);
        }
    }

    #[test]
    fn exact_model_majorizes_objective() {
        let p = LogisticProblem::synthetic(50, 5, 0.1, 0.0, 2).unwrap();
        let l2 = p.constants().l2;
        let mut r = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = Vector::from_fn(5, |_, _| normal(&mut r));
            let ev = p.eval(&x, 2, None).unwrap();
            let m = CubicModel::new(x.clone(), ev.value, ev.gradient.unwrap(), ev.hessian.unwrap(), 0.0, 2.0 * l2)
                .unwrap();
            let y = &x + Vector::from_fn(5, |_, _| normal(&mut r) * 2.0);
            assert!(m.value_at(&y).unwrap() >= p.value(&y).unwrap() - 1e-10);
        }
    }
}
