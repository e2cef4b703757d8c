//! Executable embodiments of the theory behind the stabilized solver: the
//! numerical-nonsingularity predicate for the growing triangular factor,
//! the spectral identity for the Tikhonov-augmented matrix, the effective
//! condition-number lower bound for singular operators, and brute-force
//! Krylov dimension bookkeeping for small dense operators.

use thiserror::Error;

use crate::dense::{jacobi_svd, DenseError, DenseMatrix};
use crate::krylov::GmresWorkspace;
use crate::vecops;

/// Rank decisions in the dense oracles use this relative tolerance; the
/// underlying statements are exact-arithmetic, so a numerical cutoff is
/// unavoidable.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Largest operator order accepted by the brute-force Krylov oracle; the
/// cost grows as O(order³ · grade).
pub const DIM_ORACLE_MAX_ORDER: usize = 50;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("operator must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("null spaces of the operator and its transpose differ (residual {residual:.3e})")]
    NotNullSymmetric { residual: f64 },
    #[error("bound undefined at the least-squares residual")]
    BoundUndefined,
    #[error("iteration {i} exceeds the Krylov grade {grade}")]
    BeyondGrade { i: usize, grade: usize },
    #[error("operator order {0} exceeds the oracle limit {DIM_ORACLE_MAX_ORDER}")]
    TooLarge(usize),
    #[error(transparent)]
    Dense(#[from] DenseError),
}

/// Outcome of the numerical-nonsingularity test on the newest column of the
/// triangular factor: with the column split into `d` (above the diagonal)
/// and `r` (the diagonal), `fl(RᵀR)` stays numerically nonsingular exactly
/// when `fl(r²) > fl(dᵀd) · c · ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem4Report {
    pub r_diag_sq: f64,
    pub d_norm_sq: f64,
    pub threshold: f64,
    pub predicate: bool,
}

/// [`theorem4_check_with_constant`] with the default constant `c = 1`.
pub fn theorem4_check(ws: &GmresWorkspace) -> Theorem4Report {
    theorem4_check_with_constant(ws, 1.0)
}

/// Evaluates the nonsingularity predicate on the most recently appended
/// column of the workspace's triangular factor. Panics if no column has
/// been appended yet.
pub fn theorem4_check_with_constant(ws: &GmresWorkspace, c: f64) -> Theorem4Report {
    let r = ws.triangular();
    assert!(r.order() >= 1, "workspace has no completed column");
    let col = r.col(r.order() - 1);
    let (d, diag) = col.split_at(col.len() - 1);
    let r_diag_sq = diag[0] * diag[0];
    let d_norm_sq = vecops::dot(d, d);
    let threshold = d_norm_sq * c * f64::EPSILON;
    Theorem4Report {
        r_diag_sq,
        d_norm_sq,
        threshold,
        predicate: r_diag_sq > threshold,
    }
}

/// Singular values of the stacked matrix `(R; √λ I)` given those of `R`:
/// elementwise `√(σᵢ² + λ)`.
pub fn augmented_singular_values(sigma: &[f64], lambda: f64) -> Vec<f64> {
    assert!(lambda >= 0.0, "lambda must be nonnegative");
    assert!(
        sigma.windows(2).all(|w| w[0] >= w[1]) && sigma.iter().all(|&s| s >= 0.0),
        "singular values must be nonincreasing and nonnegative"
    );
    sigma.iter().map(|&s| (s * s + lambda).sqrt()).collect()
}

/// Brute-force report on the Krylov spaces of a small dense operator.
#[derive(Debug, Clone)]
pub struct KrylovDimReport {
    /// Smallest k with K_{k+1}(Ã, b|_R) = K_k(Ã, b|_R).
    pub grade: usize,
    /// dim K_k(Ã, b|_R) for k = 1..=grade+1; strictly increasing, then flat.
    pub dims: Vec<usize>,
    /// Whether b lies in the range of the operator (at the rank tolerance).
    pub consistent: bool,
    /// Whether K_{grade+1}(Ã, b|_R) equals Ã·K_grade(Ã, b|_R).
    pub lemma1_ok: bool,
    /// For inconsistent b: whether dim K_{grade+1}(Ã, b) = grade + 1.
    pub lemma2_ok: Option<bool>,
}

/// Left singular vectors spanning the range (σ > tol·σ₁) and, second, the
/// right and left null-space bases.
struct SpectralSplit {
    range_left: Vec<Vec<f64>>,
    null_right: Vec<Vec<f64>>,
    null_left: Vec<Vec<f64>>,
}

fn spectral_split(a: &DenseMatrix) -> Result<SpectralSplit, DiagnosticsError> {
    let svd = jacobi_svd(a)?;
    let sigma1 = svd.singular_values.first().copied().unwrap_or(0.0);
    let tol = RANK_TOLERANCE * sigma1;
    let mut range_left = Vec::new();
    let mut null_right = Vec::new();
    let mut null_left = Vec::new();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            range_left.push(svd.u.col(j).to_vec());
        } else {
            null_right.push(svd.v.col(j).to_vec());
            null_left.push(svd.u.col(j).to_vec());
        }
    }
    Ok(SpectralSplit {
        range_left,
        null_right,
        null_left,
    })
}

/// Residual of projecting `x` out of the span of an orthonormal basis.
fn orth_residual_norm(basis: &[Vec<f64>], x: &[f64]) -> f64 {
    let mut w = x.to_vec();
    for _ in 0..2 {
        for q in basis {
            let proj = vecops::dot(q, &w);
            vecops::axpy(-proj, q, &mut w);
        }
    }
    vecops::norm2(&w)
}

fn project_onto(basis: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; x.len()];
    for q in basis {
        vecops::axpy(vecops::dot(q, x), q, &mut p);
    }
    p
}

fn check_null_symmetry(split: &SpectralSplit) -> Result<(), DiagnosticsError> {
    let mut worst = 0.0f64;
    for v in &split.null_right {
        worst = worst.max(orth_residual_norm(&split.null_left, v));
    }
    for u in &split.null_left {
        worst = worst.max(orth_residual_norm(&split.null_right, u));
    }
    if worst > RANK_TOLERANCE {
        Err(DiagnosticsError::NotNullSymmetric { residual: worst })
    } else {
        Ok(())
    }
}

/// Normalized Krylov sequence `b, Ãb, Ã²b, ...` (each vector scaled to unit
/// length before the next application; spans are unaffected).
fn krylov_sequence(a: &DenseMatrix, b: &[f64], count: usize) -> Vec<Vec<f64>> {
    let mut seq: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut current = b.to_vec();
    for _ in 0..count {
        let norm = vecops::norm2(&current);
        if norm == 0.0 {
            break;
        }
        let mut unit = current.clone();
        vecops::scale(1.0 / norm, &mut unit);
        seq.push(unit.clone());
        current = a.matvec(&unit);
    }
    seq
}

fn rank_of_vectors(vectors: &[Vec<f64>]) -> usize {
    basis_of_span(vectors).len()
}

/// Orthonormal basis of the span of `vectors`, taken from the left singular
/// vectors with σ above the rank tolerance. SVD keeps the basis stable even
/// when the input vectors are nearly dependent, which Krylov sequences
/// always become near the grade.
fn basis_of_span(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let m = DenseMatrix::from_columns(vectors);
    let tall = m.nrows() >= m.ncols();
    let svd = if tall {
        jacobi_svd(&m)
    } else {
        jacobi_svd(&m.transpose())
    };
    let svd = match svd {
        Ok(svd) => svd,
        Err(DenseError::SvdNoConvergence { best, .. }) => *best,
        Err(_) => return Vec::new(),
    };
    let sigma1 = svd.singular_values.first().copied().unwrap_or(0.0);
    let tol = RANK_TOLERANCE * sigma1;
    let mut basis = Vec::new();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            // Left singular vectors of M are the right ones of Mᵀ.
            let col = if tall { svd.u.col(j) } else { svd.v.col(j) };
            basis.push(col.to_vec());
        }
    }
    basis
}

/// Residual cutoff for mutual-containment checks between two orthonormal
/// bases; a couple of orders looser than the rank tolerance to absorb the
/// rounding of the basis construction itself.
const CONTAINMENT_TOLERANCE: f64 = 1e-8;

fn spans_equal(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    a.iter().all(|q| orth_residual_norm(b, q) <= CONTAINMENT_TOLERANCE)
        && b.iter().all(|q| orth_residual_norm(a, q) <= CONTAINMENT_TOLERANCE)
}

/// Computes both sides of the effective-condition-number inequality for a
/// null-space-symmetric operator at iteration `i`: the condition number of
/// the restriction of `Ã` to `K_i(Ã, b)`, and the lower bound
/// `(‖A_i‖/‖Ā_i‖) · ‖r_{i-1}‖ / √(‖r_{i-1}‖² − ‖r*‖²)`.
pub fn theorem2_bound(
    a_tilde: &DenseMatrix,
    b: &[f64],
    i: usize,
) -> Result<(f64, f64), DiagnosticsError> {
    if a_tilde.nrows() != a_tilde.ncols() {
        return Err(DiagnosticsError::NotSquare(a_tilde.nrows(), a_tilde.ncols()));
    }
    assert_eq!(b.len(), a_tilde.nrows());
    assert!(i >= 1, "iterations are 1-based");

    let split = spectral_split(a_tilde)?;
    check_null_symmetry(&split)?;

    // Least squares residual r* = b - (projection of b onto the range).
    let r_star = vecops::sub(b, &project_onto(&split.range_left, b));
    let r_star_norm = vecops::norm2(&r_star);

    let seq = krylov_sequence(a_tilde, b, i);
    if seq.len() < i {
        return Err(DiagnosticsError::BeyondGrade { i, grade: seq.len() });
    }
    let q_i = basis_of_span(&seq);
    if q_i.len() < i {
        return Err(DiagnosticsError::BeyondGrade { i, grade: q_i.len() });
    }

    // GMRES residual after i-1 steps: b minus its projection onto Ã·K_{i-1}.
    let r_prev = if i == 1 {
        b.to_vec()
    } else {
        let image: Vec<Vec<f64>> = seq[..i - 1].iter().map(|v| a_tilde.matvec(v)).collect();
        let q_image = basis_of_span(&image);
        vecops::sub(b, &project_onto(&q_image, b))
    };
    let r_prev_norm = vecops::norm2(&r_prev);

    let gap_sq = r_prev_norm * r_prev_norm - r_star_norm * r_star_norm;
    let near_residual = vecops::norm2(&vecops::sub(&r_prev, &r_star))
        <= RANK_TOLERANCE * r_star_norm.max(1.0);
    if near_residual || gap_sq <= 0.0 {
        return Err(DiagnosticsError::BoundUndefined);
    }

    let restricted = DenseMatrix::from_columns(
        &q_i.iter().map(|q| a_tilde.matvec(q)).collect::<Vec<_>>(),
    );
    let svd_i = jacobi_svd(&restricted)?;
    let norm_i = svd_i.singular_values[0];
    let min_i = *svd_i.singular_values.last().unwrap();
    let kappa = if min_i > 0.0 {
        norm_i / min_i
    } else {
        f64::INFINITY
    };

    let mut extended = q_i.clone();
    let mut r_star_unit = r_star.clone();
    vecops::scale(1.0 / r_star_norm.max(f64::MIN_POSITIVE), &mut r_star_unit);
    extended.push(r_star_unit);
    let q_bar = basis_of_span(&extended);
    let restricted_bar = DenseMatrix::from_columns(
        &q_bar.iter().map(|q| a_tilde.matvec(q)).collect::<Vec<_>>(),
    );
    let norm_bar = jacobi_svd(&restricted_bar)?.singular_values[0];

    let lower = (norm_i / norm_bar) * (r_prev_norm / gap_sq.sqrt());
    Ok((kappa, lower))
}

/// Brute-force Krylov dimension report for a small dense operator with
/// `N(Ã) = N(Ãᵀ)`. Ranks are decided by SVD at [`RANK_TOLERANCE`].
pub fn krylov_dim_oracle(
    a_tilde: &DenseMatrix,
    b: &[f64],
) -> Result<KrylovDimReport, DiagnosticsError> {
    let n = a_tilde.nrows();
    if a_tilde.nrows() != a_tilde.ncols() {
        return Err(DiagnosticsError::NotSquare(a_tilde.nrows(), a_tilde.ncols()));
    }
    if n > DIM_ORACLE_MAX_ORDER {
        return Err(DiagnosticsError::TooLarge(n));
    }
    assert_eq!(b.len(), n);

    let split = spectral_split(a_tilde)?;
    check_null_symmetry(&split)?;

    let b_range = project_onto(&split.range_left, b);
    let b_norm = vecops::norm2(b);
    let consistent =
        vecops::norm2(&vecops::sub(b, &b_range)) <= RANK_TOLERANCE * b_norm.max(1.0);

    if vecops::norm2(&b_range) == 0.0 {
        return Ok(KrylovDimReport {
            grade: 0,
            dims: vec![0],
            consistent,
            lemma1_ok: true,
            lemma2_ok: None,
        });
    }

    // Grow K_k(Ã, b|_R) until the dimension stops increasing.
    let seq = krylov_sequence(a_tilde, &b_range, n + 1);
    let mut dims = Vec::new();
    let mut grade = seq.len();
    for k in 1..=seq.len() {
        let d = rank_of_vectors(&seq[..k]);
        dims.push(d);
        if d < k {
            grade = k - 1;
            break;
        }
    }
    // If the sequence ran out before a repeat (an exactly invariant span),
    // the grade is the full length and one more dim entry shows the plateau.
    if dims.len() == grade {
        dims.push(rank_of_vectors(&seq[..grade]));
    }
    dims.truncate(grade + 1);

    // Subspace equality of K_{grade+1}(Ã, w) and Ã·K_grade(Ã, w) via mutual
    // containment of orthonormal bases.
    let q_full = basis_of_span(&seq[..(grade + 1).min(seq.len())]);
    let image: Vec<Vec<f64>> = seq[..grade.min(seq.len())]
        .iter()
        .map(|v| a_tilde.matvec(v))
        .collect();
    let q_image = basis_of_span(&image);
    let lemma1_ok = spans_equal(&q_full, &q_image);

    let lemma2_ok = if consistent {
        None
    } else {
        let raw_seq = krylov_sequence(a_tilde, b, grade + 1);
        Some(rank_of_vectors(&raw_seq) == grade + 1)
    };

    Ok(KrylovDimReport {
        grade,
        dims,
        consistent,
        lemma1_ok,
        lemma2_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{OperatorMode, SolverOptions};
    use crate::sparse::SparseMatrix;

    #[test]
    fn augmented_identity_at_lambda_zero() {
        let sigma = vec![3.0, 1.5, 0.1];
        assert_eq!(augmented_singular_values(&sigma, 0.0), sigma);
    }

    #[test]
    fn augmented_closed_form() {
        let out = augmented_singular_values(&[2.0, 1.0], 3.0);
        assert_eq!(out, vec![7.0f64.sqrt(), 2.0]);
    }

    #[test]
    fn augmented_monotone_and_dominating() {
        let sigma = vec![1.0, 0.5, 1e-8, 0.0];
        let small = augmented_singular_values(&sigma, 1e-10);
        let large = augmented_singular_values(&sigma, 1e-2);
        for ((s, lo), hi) in sigma.iter().zip(&small).zip(&large) {
            assert!(lo >= s && hi >= lo);
            assert!(*hi >= 1e-1 * 0.999);
        }
    }

    #[test]
    fn theorem4_dominant_diagonal_is_nonsingular() {
        // Drive a tiny AB-GMRES far enough to have a 2-column factor with
        // an O(1) diagonal; the predicate must hold.
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0), (2, 2, 1.0), (2, 0, 0.5)],
        )
        .unwrap();
        let b = vec![1.0, 1.0, 1.0];
        let opts = SolverOptions::default();
        let mut ws = GmresWorkspace::new(&a, &b, OperatorMode::Ab, opts.reorthogonalize).unwrap();
        for _ in 0..2 {
            let step = ws.arnoldi_step(&a).unwrap();
            let breakdown = step.is_breakdown();
            ws.append_reduced_column(&step.h_col, 0.0);
            if breakdown {
                break;
            }
            ws.push_basis(step.v_next.unwrap());
        }
        let report = theorem4_check(&ws);
        assert!(report.predicate);
        assert_eq!(report.threshold, report.d_norm_sq * f64::EPSILON);
    }

    #[test]
    fn theorem4_scale_invariance() {
        // Both sides scale by the same square, so the predicate cannot
        // change under positive scaling of the whole column.
        let r_diag: f64 = 1e-7;
        let d = [0.3, -0.4];
        for scale in [1.0, 2.0, 1024.0, 3.5e-3] {
            let r_sq = (scale * r_diag) * (scale * r_diag);
            let d_sq: f64 = d.iter().map(|x| (scale * x) * (scale * x)).sum();
            let pred = r_sq > d_sq * f64::EPSILON;
            let base_pred = r_diag * r_diag > d.iter().map(|x| x * x).sum::<f64>() * f64::EPSILON;
            assert_eq!(pred, base_pred, "scale {scale}");
        }
    }

    #[test]
    fn dim_oracle_nonsingular_generic() {
        let a = DenseMatrix::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![0.5, 3.0, -1.0],
            vec![0.0, 1.0, 1.5],
        ]);
        let b = vec![1.0, -0.5, 2.0];
        let rep = krylov_dim_oracle(&a, &b).unwrap();
        assert_eq!(rep.grade, 3);
        assert_eq!(rep.dims, vec![1, 2, 3, 3]);
        assert!(rep.consistent);
        assert!(rep.lemma1_ok);
        assert!(rep.lemma2_ok.is_none());
    }

    #[test]
    fn dim_oracle_hand_checkable_singular_case() {
        // Ã = diag(1, 0) is null-space symmetric; b = (1, 1) is outside the
        // range, its projection has grade 1, and K₂(Ã, b) is 2-dimensional.
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let b = vec![1.0, 1.0];
        let rep = krylov_dim_oracle(&a, &b).unwrap();
        assert_eq!(rep.grade, 1);
        assert_eq!(rep.dims, vec![1, 1]);
        assert!(!rep.consistent);
        assert!(rep.lemma1_ok);
        assert_eq!(rep.lemma2_ok, Some(true));
    }

    #[test]
    fn dim_oracle_rejects_oversized_input() {
        let n = DIM_ORACLE_MAX_ORDER + 1;
        let a = DenseMatrix::identity(n);
        let b = vec![1.0; n];
        assert!(matches!(
            krylov_dim_oracle(&a, &b),
            Err(DiagnosticsError::TooLarge(_))
        ));
    }

    #[test]
    fn theorem2_rejects_asymmetric_null_space() {
        // Nilpotent Jordan block: N(Ã) = span{e₁} but N(Ãᵀ) = span{e₂}.
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let b = vec![1.0, 0.5];
        assert!(matches!(
            theorem2_bound(&a, &b, 1),
            Err(DiagnosticsError::NotNullSymmetric { .. })
        ));
    }

    #[test]
    fn theorem2_identity_scaling_check() {
        // Consistent operator: r* = 0, so the bound degenerates to
        // ‖A_i‖/‖Ā_i‖ ≥ ... with denominator ‖r₀‖; both restrictions agree
        // and the bound is 1 while κ(A₁) = 1.
        let a = DenseMatrix::identity(4);
        let b = vec![1.0, 2.0, -1.0, 0.5];
        let (kappa, lower) = theorem2_bound(&a, &b, 1).unwrap();
        assert!((kappa - 1.0).abs() <= 1e-12);
        assert!(lower <= 1.0 + 1e-12);
        assert!(kappa >= lower * (1.0 - 1e-12));
    }
}
