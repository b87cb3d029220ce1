//! The estimating sequence
//! `ψ(x) = (λ/2)‖x−x₀‖² + Σᵢ (κᵢ/wᵢ)‖x−x₀‖ⁱ + ⟨S, x−x₀⟩ + C`
//! and its closed-form minimizer.
//!
//! The weights are `wᵢ = i` in the plain form and `wᵢ = i!` in the factorial
//! form. Either way `∇ψ(x) = c(r)(x − x₀) + S` with `r = ‖x − x₀‖` and a radial
//! coefficient `c(r)` increasing in `r`, so the minimizer is
//! `y = x₀ − S/c(r*)` where `c(r*) r* = ‖S‖`.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientForm {
    /// `κᵢ/i`, used by the second-order method.
    Plain,
    /// `κᵢ/i!`, used by the third-order method.
    Factorial,
}

impl CoefficientForm {
    fn weight(self, i: usize) -> f64 {
        match self {
            CoefficientForm::Plain => i as f64,
            CoefficientForm::Factorial => (1..=i).product::<usize>() as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Argmin {
    pub y: Vector,
    pub r: f64,
    /// `‖∇ψ(y)‖`, recomputed from `y` as a self-check.
    pub grad_norm_check: f64,
}

#[derive(Debug, Clone)]
pub struct EstimatorState {
    x0: Vector,
    s: Vector,
    lambda: f64,
    /// `κ₂, κ₃, …, κ_{p+1}`.
    kappa: Vec<f64>,
    form: CoefficientForm,
    constant: f64,
}

impl EstimatorState {
    /// Initial state with the given coefficients and no linear part.
    pub fn new(x0: Vector, form: CoefficientForm, lambda: f64, kappa: Vec<f64>) -> Result<Self> {
        if kappa.is_empty() {
            return Err(Error::InvalidParameter("need at least κ₂".into()));
        }
        for (i, &k) in std::iter::once(&lambda).chain(&kappa).enumerate() {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!("{} = {k}", coefficient_name(i))));
            }
        }
        if !all_finite(&x0) {
            return Err(Error::NonFinite("estimating sequence anchor"));
        }
        let d = x0.len();
        Ok(Self {
            x0,
            s: Vector::zeros(d),
            lambda,
            kappa,
            form,
            constant: 0.0,
        })
    }

    pub fn anchor(&self) -> &Vector {
        &self.x0
    }

    pub fn linear(&self) -> &Vector {
        &self.s
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn form(&self) -> CoefficientForm {
        self.form
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `S ← S + weight·g` and replaces the coefficients by larger ones.
    pub fn accumulate(&mut self, weight: f64, g: &Vector, new_lambda: f64, new_kappa: &[f64]) -> Result<()> {
        check_dim(self.x0.len(), g.len())?;
        check_dim(self.kappa.len(), new_kappa.len())?;
        if !all_finite(g) || !weight.is_finite() {
            return Err(Error::NonFinite("estimating sequence update"));
        }
        let olds = std::iter::once(self.lambda).chain(self.kappa.iter().copied());
        let news = std::iter::once(new_lambda).chain(new_kappa.iter().copied());
        for (i, (old, new)) in olds.zip(news).enumerate() {
            if !(new >= old) || !new.is_finite() {
                return Err(Error::MonotonicityViolation {
                    name: coefficient_name(i),
                    old,
                    new,
                });
            }
        }
        self.s.axpy(weight, g, 1.0);
        self.lambda = new_lambda;
        self.kappa.copy_from_slice(new_kappa);
        Ok(())
    }

    /// Adds to the constant term. Only affects [`value`](Self::value).
    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    /// `c(r) = λ + Σᵢ κᵢ (i/wᵢ) r^{i−2}`.
    pub fn radial_coefficient(&self, r: f64) -> f64 {
        let mut c = self.lambda;
        let mut power = 1.0;
        for (k, &kappa) in self.kappa.iter().enumerate() {
            let i = k + 2;
            c += kappa * (i as f64 / self.form.weight(i)) * power;
            power *= r;
        }
        c
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.x0.len(), x.len())?;
        let diff = x - &self.x0;
        let r = diff.norm();
        let mut v = 0.5 * self.lambda * r * r + self.s.dot(&diff) + self.constant;
        for (k, &kappa) in self.kappa.iter().enumerate() {
            let i = k + 2;
            v += kappa / self.form.weight(i) * r.powi(i as i32);
        }
        Ok(v)
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.x0.len(), x.len())?;
        let diff = x - &self.x0;
        let c = self.radial_coefficient(diff.norm());
        Ok(diff * c + &self.s)
    }

    pub fn argmin(&self) -> Result<Argmin> {
        let s_norm = self.s.norm();
        if s_norm == 0.0 {
            return Ok(Argmin {
                y: self.x0.clone(),
                r: 0.0,
                grad_norm_check: 0.0,
            });
        }
        if self.lambda == 0.0 && self.kappa.iter().all(|&k| k == 0.0) {
            return Err(Error::Degenerate);
        }
        let r = self.solve_radius(s_norm)?;
        let y = &self.x0 - &self.s / self.radial_coefficient(r);
        let grad_norm_check = self.gradient(&y)?.norm();
        Ok(Argmin { y, r, grad_norm_check })
    }

    /// Root of `c(r) r = ‖S‖`.
    fn solve_radius(&self, s_norm: f64) -> Result<f64> {
        let a = self.radial_coefficient(0.0);
        let higher = &self.kappa[2.min(self.kappa.len())..];
        if higher.iter().all(|&k| k == 0.0) {
            // c(r) = a + b r: the positive root of b r² + a r − ‖S‖, in the
            // cancellation-free form.
            let b = if self.kappa.len() > 1 {
                self.kappa[1] * (3.0 / self.form.weight(3))
            } else {
                0.0
            };
            return Ok(2.0 * s_norm / (a + (a * a + 4.0 * b * s_norm).sqrt()));
        }
        let f = |r: f64| self.radial_coefficient(r) * r - s_norm;
        let mut hi = if a > 0.0 { s_norm / a } else { 1.0 };
        hi = hi.min(1.0).max(f64::MIN_POSITIVE);
        while f(hi) < 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::NonFinite("estimating sequence radius"));
            }
        }
        let mut lo = 0.0;
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn coefficient_name(i: usize) -> String {
    if i == 0 {
        "lambda".into()
    } else {
        format!("kappa{}", i + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_state(r: &mut ChaCha8Rng, d: usize, form: CoefficientForm, p: usize) -> EstimatorState {
        let x0 = Vector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal));
        let kappa: Vec<f64> = (0..p).map(|_| r.random::<f64>() * 3.0).collect();
        let mut st = EstimatorState::new(x0, form, r.random::<f64>(), vec![0.0; p]).unwrap();
        let g = Vector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal) * 5.0);
        let lambda = st.lambda();
        st.accumulate(1.0, &g, lambda, &kappa).unwrap();
        st
    }

    #[test]
    fn first_accumulation_sets_linear_term() {
        let mut st = EstimatorState::new(Vector::zeros(2), CoefficientForm::Plain, 0.0, vec![0.0, 1.0]).unwrap();
        let g = Vector::from_vec(vec![1.0, -2.0]);
        // α₀ = 3/3 and A₀ = 1.
        st.accumulate(1.0, &g, 0.0, &[0.0, 1.0]).unwrap();
        assert_eq!(st.linear(), &g);
        st.accumulate(0.5, &Vector::zeros(2), 0.0, &[0.0, 1.0]).unwrap();
        assert_eq!(st.linear(), &g);
    }

    #[test]
    fn accumulation_order_does_not_matter() {
        let a = Vector::from_vec(vec![0.1, 0.7, -3.0]);
        let b = Vector::from_vec(vec![2.0, -0.3, 1e-3]);
        let mut s1 = EstimatorState::new(Vector::zeros(3), CoefficientForm::Plain, 0.0, vec![0.0, 1.0]).unwrap();
        let mut s2 = s1.clone();
        s1.accumulate(0.3, &a, 0.0, &[0.0, 1.0]).unwrap();
        s1.accumulate(0.7, &b, 0.0, &[0.0, 1.0]).unwrap();
        s2.accumulate(0.7, &b, 0.0, &[0.0, 1.0]).unwrap();
        s2.accumulate(0.3, &a, 0.0, &[0.0, 1.0]).unwrap();
        assert!((s1.linear() - s2.linear()).amax() <= 1e-15);
    }

    #[test]
    fn decreasing_coefficient_rejected() {
        let mut st = EstimatorState::new(Vector::zeros(1), CoefficientForm::Plain, 1.0, vec![0.0, 1.0]).unwrap();
        let g = Vector::zeros(1);
        assert!(matches!(
            st.accumulate(1.0, &g, 0.5, &[0.0, 1.0]),
            Err(Error::MonotonicityViolation { .. })
        ));
        assert!(matches!(
            st.accumulate(1.0, &g, 1.0, &[0.0, 0.9]),
            Err(Error::MonotonicityViolation { .. })
        ));
        assert!(st.accumulate(1.0, &g, 1.0, &[0.1, 1.0]).is_ok());
    }

    #[test]
    fn zero_linear_part_returns_anchor() {
        let x0 = Vector::from_vec(vec![1.0, 2.0]);
        let st = EstimatorState::new(x0.clone(), CoefficientForm::Plain, 0.0, vec![0.0, 0.0]).unwrap();
        let am = st.argmin().unwrap();
        assert_eq!(am.y, x0);
        assert_eq!(am.r, 0.0);
    }

    #[test]
    fn degenerate_state_reported() {
        let mut st = EstimatorState::new(Vector::zeros(1), CoefficientForm::Plain, 0.0, vec![0.0, 0.0]).unwrap();
        st.accumulate(1.0, &Vector::from_element(1, 1.0), 0.0, &[0.0, 0.0]).unwrap();
        assert!(matches!(st.argmin(), Err(Error::Degenerate)));
    }

    #[test]
    fn quadratic_formula_example() {
        let x0 = Vector::from_vec(vec![1.0, -1.0]);
        let mut st = EstimatorState::new(x0.clone(), CoefficientForm::Plain, 0.0, vec![0.0, 1.0]).unwrap();
        let s = Vector::from_vec(vec![0.0, 4.0]);
        st.accumulate(1.0, &s, 0.0, &[0.0, 1.0]).unwrap();
        let am = st.argmin().unwrap();
        assert!((am.r - 2.0).abs() < 1e-15);
        assert!((&am.y - (&x0 - &s / 2.0)).norm() < 1e-15);
        assert!(st.gradient(&am.y).unwrap().norm() < 1e-14);
    }

    #[test]
    fn argmin_is_stationary() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        for k in 0..1000 {
            let form = if k % 2 == 0 { CoefficientForm::Plain } else { CoefficientForm::Factorial };
            let p = if k % 3 == 0 { 3 } else { 2 };
            let st = random_state(&mut r, 1 + k % 7, form, p);
            let am = st.argmin().unwrap();
            let scale = st.radial_coefficient(am.r) * (1.0 + st.linear().norm());
            assert!(am.grad_norm_check <= 1e-10 * scale, "{} vs {scale}", am.grad_norm_check);
            assert!((am.r - (&am.y - st.anchor()).norm()).abs() <= 1e-12 * (1.0 + am.r));
        }
    }

    #[test]
    fn argmin_is_global_in_small_dimension() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        for k in 0..10 {
            let form = if k % 2 == 0 { CoefficientForm::Plain } else { CoefficientForm::Factorial };
            let st = random_state(&mut r, 1 + k % 3, form, 2 + k % 2);
            let am = st.argmin().unwrap();
            let best = st.value(&am.y).unwrap();
            for _ in 0..10_000 {
                let z = st.anchor() + Vector::from_fn(st.anchor().len(), |_, _| r.sample::<f64, _>(StandardNormal) * 3.0);
                assert!(best <= st.value(&z).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn factorial_radial_coefficient() {
        let st = EstimatorState::new(Vector::zeros(1), CoefficientForm::Factorial, 1.0, vec![2.0, 6.0, 12.0]).unwrap();
        // λ + κ₂ + κ₃ r/2 + κ₄ r²/6 at r = 1.
        assert!((st.radial_coefficient(1.0) - (1.0 + 2.0 + 3.0 + 2.0)).abs() < 1e-15);
        let plain = EstimatorState::new(Vector::zeros(1), CoefficientForm::Plain, 1.0, vec![2.0, 6.0]).unwrap();
        assert!((plain.radial_coefficient(2.0) - (3.0 + 12.0)).abs() < 1e-15);
    }

    #[test]
    fn value_includes_constant() {
        let mut st = EstimatorState::new(Vector::zeros(2), CoefficientForm::Plain, 2.0, vec![0.0, 3.0]).unwrap();
        st.add_constant(1.5);
        let x = Vector::from_vec(vec![3.0, 4.0]);
        // λ/2·25 + κ₃/3·125 + C.
        assert!((st.value(&x).unwrap() - (25.0 + 125.0 + 1.5)).abs() < 1e-12);
    }
}
