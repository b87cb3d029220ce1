//! Dense vectors, symmetric matrices and symmetric order-3 tensors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Largest dimension for which dense third derivatives are materialized.
pub const MAX_TENSOR_DIM: usize = 64;

/// Dense order-3 tensor over `R^d`, stored row-major as `d*d*d` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    t.data[(i * dim + j) * dim + k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self += scale * a⊗a⊗a`.
    pub fn add_rank_one(&mut self, scale: f64, a: &[f64]) {
        let d = self.dim;
        debug_assert_eq!(a.len(), d);
        for i in 0..d {
            let si = scale * a[i];
            if si == 0.0 {
                continue;
            }
            for j in 0..d {
                let sij = si * a[j];
                let row = &mut self.data[(i * d + j) * d..(i * d + j + 1) * d];
                for (out, ak) in row.iter_mut().zip(a) {
                    *out += sij * ak;
                }
            }
        }
    }

    pub fn scale_mut(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_scaled(&mut self, factor: f64, other: &Tensor3) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    /// The matrix `T[s]` with entries `sum_i T_ijk s_i`.
    pub fn contract1(&self, s: &Vector) -> Matrix {
        let d = self.dim;
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            let si = s[i];
            if si == 0.0 {
                continue;
            }
            for j in 0..d {
                for k in 0..d {
                    out[(j, k)] += si * self.data[(i * d + j) * d + k];
                }
            }
        }
        out
    }

    /// The vector `T[s]^2 = T[s] s`.
    pub fn contract2(&self, s: &Vector) -> Vector {
        self.contract1(s) * s
    }

    /// The scalar `T[s]^3`.
    pub fn contract3(&self, s: &Vector) -> f64 {
        self.contract2(s).dot(s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest deviation between entries related by an index permutation.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let vals = [
                        self.get(i, j, k),
                        self.get(i, k, j),
                        self.get(j, i, k),
                        self.get(j, k, i),
                        self.get(k, i, j),
                        self.get(k, j, i),
                    ];
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    worst = worst.max(hi - lo);
                }
            }
        }
        worst
    }
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_spectral_norm(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eigen_range(m: &Matrix) -> (f64, f64) {
    let ev = m.clone().symmetric_eigenvalues();
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Eigendecomposition with eigenvalues sorted ascending.
pub fn sorted_eigen(m: &Matrix) -> (Vector, Matrix) {
    let eig = SymmetricEigen::new(m.clone());
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Maximum absolute asymmetry `|m_ij - m_ji|` relative to `1 + max|m_ij|`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let scale = 1.0 + m.amax();
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}
