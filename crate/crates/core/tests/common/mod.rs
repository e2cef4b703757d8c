//! Independent reference computations for the integration tests. These
//! deliberately avoid the incremental code paths they are used to check:
//! QR is by Householder reflectors (not Givens), eigenvalues come from a
//! two-sided Jacobi iteration (not the one-sided SVD), and least squares
//! goes through the full QR.

#![allow(dead_code)]

use krylov_stab_core::dense::{jacobi_svd, DenseMatrix};
use krylov_stab_core::problems::rng::{standard_normal, uniform_open01, ChaCha12Rng};
use krylov_stab_core::sparse::SparseMatrix;
use krylov_stab_core::vecops;

/// Full Householder QR: returns (Q, R) with Q m x m orthogonal and R m x n
/// upper trapezoidal.
pub fn householder_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut r = a.clone();
    let mut q = DenseMatrix::identity(m);
    for k in 0..n.min(m.saturating_sub(1)) {
        let mut v: Vec<f64> = (k..m).map(|i| r.get(i, k)).collect();
        let norm = vecops::norm2(&v);
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = vecops::norm2(&v);
        if vnorm == 0.0 {
            continue;
        }
        vecops::scale(1.0 / vnorm, &mut v);
        // R[k.., k..] -= 2 v (vᵀ R)
        for j in k..n {
            let mut dot = 0.0;
            for (offset, vi) in v.iter().enumerate() {
                dot += vi * r.get(k + offset, j);
            }
            for (offset, vi) in v.iter().enumerate() {
                let cur = r.get(k + offset, j);
                r.set(k + offset, j, cur - 2.0 * vi * dot);
            }
        }
        // Q[.., k..] -= 2 (Q v) vᵀ
        for i in 0..m {
            let mut dot = 0.0;
            for (offset, vi) in v.iter().enumerate() {
                dot += vi * q.get(i, k + offset);
            }
            for (offset, vi) in v.iter().enumerate() {
                let cur = q.get(i, k + offset);
                q.set(i, k + offset, cur - 2.0 * vi * dot);
            }
        }
    }
    (q, r)
}

/// Least squares `min ‖b − A y‖` by Householder QR; returns the minimizer
/// and the residual norm.
pub fn lstsq(a: &DenseMatrix, b: &[f64]) -> (Vec<f64>, f64) {
    let (m, n) = (a.nrows(), a.ncols());
    assert!(m >= n, "lstsq oracle expects a tall matrix");
    let (q, r) = householder_qr(a);
    let qtb = q.matvec_t(b);
    let mut y = vec![0.0; n];
    for j in (0..n).rev() {
        let mut acc = qtb[j];
        for k in (j + 1)..n {
            acc -= r.get(j, k) * y[k];
        }
        y[j] = acc / r.get(j, j);
    }
    let resid = vecops::norm2(&qtb[n..]);
    (y, resid)
}

/// Symmetric eigendecomposition by two-sided cyclic Jacobi. Returns
/// eigenvalues in descending order and the matching eigenvectors as columns.
pub fn sym_eigen(s: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = s.nrows();
    assert_eq!(n, s.ncols());
    let mut a = s.clone();
    let mut v = DenseMatrix::identity(n);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q) * a.get(p, q);
            }
        }
        if off.sqrt() <= 1e-15 * s.frobenius_norm().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for i in 0..n {
                    let (aip, aiq) = (a.get(i, p), a.get(i, q));
                    a.set(i, p, c * aip - sn * aiq);
                    a.set(i, q, sn * aip + c * aiq);
                }
                for j in 0..n {
                    let (apj, aqj) = (a.get(p, j), a.get(q, j));
                    a.set(p, j, c * apj - sn * aqj);
                    a.set(q, j, sn * apj + c * aqj);
                }
                for i in 0..n {
                    let (vip, viq) = (v.get(i, p), v.get(i, q));
                    v.set(i, p, c * vip - sn * viq);
                    v.set(i, q, sn * vip + c * viq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).unwrap());
    let eigvals: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(v.col(src));
    }
    (eigvals, vectors)
}

/// `A⁺ b` through the SVD, truncating singular values below `1e-12 σ₁`.
pub fn pinv_apply(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    assert_eq!(b.len(), a.nrows());
    if a.nrows() >= a.ncols() {
        let svd = jacobi_svd(a).expect("oracle SVD converges");
        let tol = 1e-12 * svd.singular_values.first().copied().unwrap_or(0.0);
        let mut x = vec![0.0; a.ncols()];
        for (j, &sigma) in svd.singular_values.iter().enumerate() {
            if sigma <= tol {
                break;
            }
            let coeff = vecops::dot(svd.u.col(j), b) / sigma;
            vecops::axpy(coeff, svd.v.col(j), &mut x);
        }
        x
    } else {
        // A = (Aᵀ)ᵀ = (U' Σ V'ᵀ)ᵀ, so A⁺ b = U' Σ⁺ V'ᵀ b.
        let svd = jacobi_svd(&a.transpose()).expect("oracle SVD converges");
        let tol = 1e-12 * svd.singular_values.first().copied().unwrap_or(0.0);
        let mut x = vec![0.0; a.ncols()];
        for (j, &sigma) in svd.singular_values.iter().enumerate() {
            if sigma <= tol {
                break;
            }
            let coeff = vecops::dot(svd.v.col(j), b) / sigma;
            vecops::axpy(coeff, svd.u.col(j), &mut x);
        }
        x
    }
}

pub fn gaussian_matrix(m: usize, n: usize, rng: &mut ChaCha12Rng) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            a.set(i, j, standard_normal(rng));
        }
    }
    a
}

pub fn uniform_vector(len: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    (0..len).map(|_| uniform_open01(rng)).collect()
}

/// Random sparse matrix with entries in (-1, 1); deterministic in `rng`.
pub fn random_sparse(m: usize, n: usize, density: f64, rng: &mut ChaCha12Rng) -> SparseMatrix {
    let mut triplets = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if uniform_open01(rng) < density {
                triplets.push((i, j, 2.0 * uniform_open01(rng) - 1.0));
            }
        }
    }
    SparseMatrix::from_triplets(m, n, &triplets).unwrap()
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a.get(i, j) - b.get(i, j)).abs());
        }
    }
    worst
}
