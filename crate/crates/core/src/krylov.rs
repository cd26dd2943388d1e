//! Hermitian Lanczos recursion with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::operators::HermitianOperator;
use crate::state::{dot, norm, scale, sub_scaled};

pub(crate) struct Krylov {
    /// orthonormal Lanczos vectors
    pub vectors: Vec<Vec<Complex64>>,
    pub alpha: Vec<f64>,
    /// `beta[k]` couples vectors `k` and `k + 1`; the last entry is the
    /// norm of the unused residual.
    pub beta: Vec<f64>,
    /// The subspace is invariant under the operator.
    pub exhausted: bool,
}

impl Krylov {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn residual_norm(&self) -> f64 {
        if self.exhausted {
            0.0
        } else {
            *self.beta.last().unwrap_or(&0.0)
        }
    }

    pub fn tridiagonal_eigen(&self) -> TridiagEigen {
        tridiagonal_eigen(&self.alpha, &self.beta[..self.len() - 1])
    }

    /// `sum_k coeffs[k] * vectors[k]`
    pub fn combine(&self, coeffs: impl Iterator<Item = Complex64>) -> Vec<Complex64> {
        let dim = self.vectors[0].len();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (v, c) in self.vectors.iter().zip(coeffs) {
            out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
        }
        out
    }
}

pub(crate) struct TridiagEigen {
    /// ascending
    pub values: Vec<f64>,
    /// column `i` belongs to `values[i]`
    pub vectors: DMatrix<f64>,
}

pub(crate) fn tridiagonal_eigen(alpha: &[f64], offdiag: &[f64]) -> TridiagEigen {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = offdiag[i];
            t[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    TridiagEigen { values, vectors }
}

/// Runs up to `max_dim` Lanczos steps from the normalized `start`, keeping
/// every vector orthogonal to `locked` as well. `stop` is polled after each
/// step and may end the recursion early.
pub(crate) fn lanczos(
    h: &HermitianOperator,
    start: &[Complex64],
    max_dim: usize,
    locked: &[Vec<Complex64>],
    breakdown_tol: f64,
    mut stop: impl FnMut(&Krylov) -> bool,
) -> Krylov {
    let dim = h.dim();
    let mut kr = Krylov { vectors: vec![start.to_vec()], alpha: Vec::new(), beta: Vec::new(), exhausted: false };
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    loop {
        let k = kr.alpha.len();
        h.matvec(&kr.vectors[k], &mut w);
        let a = dot(&kr.vectors[k], &w).re;
        kr.alpha.push(a);
        // two classical Gram-Schmidt passes
        for _ in 0..2 {
            for q in locked.iter().chain(kr.vectors.iter()) {
                let c = dot(q, &w);
                sub_scaled(&mut w, c, q);
            }
        }
        let b = norm(&w);
        kr.beta.push(b);
        if b <= breakdown_tol || kr.vectors.len() + locked.len() >= dim {
            kr.exhausted = true;
            break;
        }
        if kr.alpha.len() >= max_dim || stop(&kr) {
            break;
        }
        let mut next = w.clone();
        scale(&mut next, 1.0 / b);
        kr.vectors.push(next);
    }
    kr
}
