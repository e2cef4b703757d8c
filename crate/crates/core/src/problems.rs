//! Built-in test problems: the 3x3 equal-projection pathology, seeded
//! random rectangular systems (optionally rank-deficient, consistent or
//! not), and null-space-symmetric square operators for the diagnostics
//! sweeps.
//!
//! Generators are pure functions of their spec: the same seed produces the
//! same bytes on every run.

use thiserror::Error;

use crate::dense::{orthonormalize_mgs2, DenseMatrix};
use crate::sparse::SparseMatrix;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("infeasible problem spec: {0}")]
    InfeasibleSpec(String),
}

/// Deterministic random streams used across the crate.
pub mod rng {
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    pub use rand_chacha::ChaCha12Rng;

    /// ChaCha12 stream `stream` of the given seed. Distinct streams of one
    /// seed are independent, which keeps matrix entries, right-hand sides,
    /// and repeat runs decoupled.
    pub fn rng_for(seed: u64, stream: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }

    /// Uniform draw from the open interval (0, 1), 53 usable bits.
    pub fn uniform_open01(rng: &mut ChaCha12Rng) -> f64 {
        ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Vector of uniform (0, 1) draws.
    pub fn uniform_vec(rng: &mut ChaCha12Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| uniform_open01(rng)).collect()
    }

    /// Standard normal via Box–Muller (two uniforms per draw).
    pub fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
        let u1 = uniform_open01(rng);
        let u2 = uniform_open01(rng);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

use rng::{rng_for, standard_normal, uniform_open01, uniform_vec, ChaCha12Rng};

/// Kind of built-in problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Ep3,
    RandomRect,
    NullsymSquare,
}

/// Specification of a generated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub nrows: usize,
    pub ncols: usize,
    /// Target fill fraction for the sparse path, in (0, 1].
    pub density: f64,
    /// Number of singular values forced to zero.
    pub rank_deficiency: usize,
    pub rng_seed: u64,
    /// Build `b = A x_true` (consistent) instead of a random `b`.
    pub consistent: bool,
}

impl ProblemSpec {
    pub fn random_rect(nrows: usize, ncols: usize) -> Self {
        Self {
            kind: ProblemKind::RandomRect,
            nrows,
            ncols,
            density: 0.1,
            rank_deficiency: 0,
            rng_seed: 0,
            consistent: false,
        }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.nrows == 0 || self.ncols == 0 {
            return Err(ProblemError::InfeasibleSpec("dimensions must be positive".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(ProblemError::InfeasibleSpec(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        if self.rank_deficiency >= self.nrows.min(self.ncols) {
            return Err(ProblemError::InfeasibleSpec(format!(
                "rank deficiency {} must stay below min(m, n) = {}",
                self.rank_deficiency,
                self.nrows.min(self.ncols)
            )));
        }
        Ok(())
    }
}

/// The 3x3 equal-projection problem built from `√2/2` and `√(6ε)/6`, with
/// right-hand side `(1, 0, 0)ᵀ` and null space spanned by `(1, -1, 1)ᵀ`
/// shared with the transpose. The second Arnoldi step of plain GMRES on it
/// produces the triangular factor `[[1, 1], [0, √ε]]` whose normal matrix is
/// numerically singular.
pub fn make_ep3() -> (SparseMatrix, Vec<f64>) {
    let half_sqrt2 = 2.0f64.sqrt() / 2.0;
    let sqrt_6eps = (6.0 * f64::EPSILON).sqrt();
    let small = sqrt_6eps / 6.0;
    let large = sqrt_6eps / 3.0;
    let a = SparseMatrix::from_triplets(
        3,
        3,
        &[
            (0, 0, half_sqrt2),
            (0, 1, half_sqrt2 - small),
            (0, 2, -small),
            (1, 0, half_sqrt2),
            (1, 1, half_sqrt2 + small),
            (1, 2, small),
            (2, 1, large),
            (2, 2, large),
        ],
    )
    .expect("static triplets are in bounds");
    (a, vec![1.0, 0.0, 0.0])
}

/// Dense-path threshold: specs up to this many entries build the matrix
/// through an explicit SVD-shaped product; larger ones use the sparse path
/// with duplicated rows for rank deficiency.
const DENSE_PATH_MAX_ENTRIES: usize = 4096;

/// Seeded random rectangular least squares problem. Returns the matrix, the
/// right-hand side, and `x_true` when the spec asks for a consistent system.
pub fn make_random_rect(
    spec: &ProblemSpec,
) -> Result<(SparseMatrix, Vec<f64>, Option<Vec<f64>>), ProblemError> {
    spec.validate()?;
    let (m, n) = (spec.nrows, spec.ncols);
    let mut mat_rng = rng_for(spec.rng_seed, 0);

    let a = if spec.rank_deficiency > 0 && m * n <= DENSE_PATH_MAX_ENTRIES {
        let rank = m.min(n) - spec.rank_deficiency;
        let u = random_orthogonal(m, &mut mat_rng);
        let v = random_orthogonal(n, &mut mat_rng);
        // Singular values log-spaced over three decades, then zeros.
        let mut dense = DenseMatrix::zeros(m, n);
        for k in 0..rank {
            let exponent = if rank == 1 { 0.0 } else { -3.0 * k as f64 / (rank - 1) as f64 };
            let sigma = 10.0f64.powf(exponent);
            for i in 0..m {
                for j in 0..n {
                    dense.set(i, j, dense.get(i, j) + u.get(i, k) * sigma * v.get(j, k));
                }
            }
        }
        SparseMatrix::from_dense(&dense)
    } else {
        let independent = m - spec.rank_deficiency;
        let mut triplets = Vec::new();
        for i in 0..independent {
            for j in 0..n {
                if uniform_open01(&mut mat_rng) < spec.density {
                    triplets.push((i, j, 2.0 * uniform_open01(&mut mat_rng) - 1.0));
                }
            }
            // Guarantee no structurally empty row on the independent block.
            if triplets.last().map_or(true, |&(r, _, _)| r != i) {
                let j = (mat_rng.next_u64() as usize) % n;
                triplets.push((i, j, 2.0 * uniform_open01(&mut mat_rng) - 1.0));
            }
        }
        // Rank deficiency by scaled copies of earlier rows.
        let row_of: Vec<Vec<(usize, f64)>> = {
            let mut rows = vec![Vec::new(); independent];
            for &(i, j, v) in &triplets {
                rows[i].push((j, v));
            }
            rows
        };
        for dup in 0..spec.rank_deficiency {
            let src = (mat_rng.next_u64() as usize) % independent;
            let scale = 0.5 + uniform_open01(&mut mat_rng);
            for &(j, v) in &row_of[src] {
                triplets.push((independent + dup, j, scale * v));
            }
        }
        SparseMatrix::from_triplets(m, n, &triplets).expect("generated indices are in bounds")
    };

    if spec.consistent {
        let mut x_rng = rng_for(spec.rng_seed, 2);
        let x_true = uniform_vec(&mut x_rng, n);
        let b = a.spmv(&x_true).expect("dimensions agree by construction");
        Ok((a, b, Some(x_true)))
    } else {
        let mut b_rng = rng_for(spec.rng_seed, 1);
        let b = uniform_vec(&mut b_rng, m);
        Ok((a, b, None))
    }
}

use rand_chacha::rand_core::RngCore;

/// Random orthogonal matrix: Gram-Schmidt over a Gaussian square matrix,
/// retried with fresh draws in the (measure-zero) dependent case.
fn random_orthogonal(order: usize, rng: &mut ChaCha12Rng) -> DenseMatrix {
    loop {
        let cols: Vec<Vec<f64>> = (0..order)
            .map(|_| (0..order).map(|_| standard_normal(rng)).collect())
            .collect();
        let basis = orthonormalize_mgs2(&cols, 1e-12);
        if basis.len() == order {
            return DenseMatrix::from_columns(&basis);
        }
    }
}

/// Square operator `Q · blockdiag(M, 0) · Qᵀ` with random orthogonal `Q` and
/// a well-conditioned nonsingular `M`, so the null spaces of the operator
/// and its transpose coincide by construction.
pub fn make_nullsym_square(
    order: usize,
    nullity: usize,
    seed: u64,
) -> Result<DenseMatrix, ProblemError> {
    if order == 0 {
        return Err(ProblemError::InfeasibleSpec("order must be positive".into()));
    }
    if nullity >= order {
        return Err(ProblemError::InfeasibleSpec(format!(
            "nullity {nullity} of order {order} leaves a zero operator"
        )));
    }
    let mut rng = rng_for(seed, 3);
    let q = random_orthogonal(order, &mut rng);
    let rank = order - nullity;
    // M = U diag(σ) Vᵀ with σ log-spaced over one decade: nonsingular and
    // comfortably separated from the zero block.
    let u = random_orthogonal(rank, &mut rng);
    let v = random_orthogonal(rank, &mut rng);
    let mut core = DenseMatrix::zeros(order, order);
    for k in 0..rank {
        let exponent = if rank == 1 { 0.0 } else { -(k as f64) / (rank - 1) as f64 };
        let sigma = 10.0f64.powf(exponent);
        for i in 0..rank {
            for j in 0..rank {
                core.set(i, j, core.get(i, j) + u.get(i, k) * sigma * v.get(j, k));
            }
        }
    }
    let qc = q.matmul(&core);
    Ok(qc.matmul(&q.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::jacobi_svd;
    use crate::vecops;

    #[test]
    fn ep3_null_vector() {
        let (a, _) = make_ep3();
        let null = [1.0, -1.0, 1.0];
        let forward = a.spmv(&null).unwrap();
        assert!(vecops::norm2(&forward) <= 10.0 * f64::EPSILON);
    }

    #[test]
    fn ep3_is_null_space_symmetric() {
        let (a, _) = make_ep3();
        let null = [1.0, -1.0, 1.0];
        let adjoint = a.spmv_t(&null).unwrap();
        assert!(vecops::norm2(&adjoint) <= 10.0 * f64::EPSILON);
    }

    #[test]
    fn ep3_first_column() {
        let (a, b) = make_ep3();
        let half_sqrt2 = 2.0f64.sqrt() / 2.0;
        let dense = a.to_dense();
        assert_eq!(dense.get(0, 0), half_sqrt2);
        assert_eq!(dense.get(1, 0), half_sqrt2);
        assert_eq!(dense.get(2, 0), 0.0);
        assert_eq!(b, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn random_rect_is_deterministic() {
        let spec = ProblemSpec {
            rng_seed: 42,
            ..ProblemSpec::random_rect(20, 35)
        };
        let (a1, b1, _) = make_random_rect(&spec).unwrap();
        let (a2, b2, _) = make_random_rect(&spec).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
    }

    #[test]
    fn random_rect_consistent_has_matching_rhs() {
        let spec = ProblemSpec {
            consistent: true,
            rng_seed: 7,
            ..ProblemSpec::random_rect(15, 25)
        };
        let (a, b, x_true) = make_random_rect(&spec).unwrap();
        let x = x_true.unwrap();
        let ax = a.spmv(&x).unwrap();
        for (axi, bi) in ax.iter().zip(&b) {
            assert_eq!(axi, bi);
        }
    }

    #[test]
    fn random_rect_dense_path_rank() {
        let spec = ProblemSpec {
            kind: ProblemKind::RandomRect,
            nrows: 10,
            ncols: 8,
            density: 1.0,
            rank_deficiency: 2,
            rng_seed: 3,
            consistent: false,
        };
        let (a, _, _) = make_random_rect(&spec).unwrap();
        let svd = jacobi_svd(&a.to_dense()).unwrap();
        let tiny = svd
            .singular_values
            .iter()
            .filter(|&&s| s <= 1e-12 * svd.singular_values[0])
            .count();
        assert_eq!(tiny, 2);
    }

    #[test]
    fn random_rect_infeasible_rank() {
        let spec = ProblemSpec {
            rank_deficiency: 20,
            ..ProblemSpec::random_rect(20, 30)
        };
        assert!(make_random_rect(&spec).is_err());
    }

    #[test]
    fn nullsym_square_nullity_verified_by_svd() {
        for (order, nullity, seed) in [(6, 0, 1u64), (8, 3, 2), (12, 5, 3)] {
            let a = make_nullsym_square(order, nullity, seed).unwrap();
            let svd = jacobi_svd(&a).unwrap();
            let observed = order - svd.rank(1e-10);
            assert_eq!(observed, nullity, "order {order} nullity {nullity}");
        }
    }

    #[test]
    fn nullsym_square_rejects_zero_operator() {
        assert!(make_nullsym_square(5, 5, 0).is_err());
    }

    #[test]
    fn nullsym_square_null_spaces_match() {
        let a = make_nullsym_square(9, 4, 11).unwrap();
        let svd = jacobi_svd(&a).unwrap();
        let tol = 1e-10 * svd.singular_values[0];
        // For every right null vector v, Ãᵀ v must also vanish.
        for (j, &s) in svd.singular_values.iter().enumerate() {
            if s <= tol {
                let v = svd.v.col(j);
                let atv = a.matvec_t(v);
                assert!(vecops::norm2(&atv) <= 1e-10);
            }
        }
    }
}
