//! Iterative solvers for sparse, possibly rank-deficient least squares
//! problems `min ||b - A x||`, built around the GMRES family applied to the
//! normal-equations operators `A Aᵀ` (AB-GMRES) and `Aᵀ A` (BA-GMRES).
//!
//! The crate provides:
//!
//! * [`sparse`] — CSR storage, Matrix Market I/O, transpose-free products;
//! * [`dense`] — the small dense kernels driving the iteration: incremental
//!   Givens QR of the Hessenberg matrix, triangular solves, Cholesky with an
//!   LDLᵀ fallback, and a one-sided Jacobi SVD;
//! * [`krylov`] — AB-GMRES, BA-GMRES, range-restricted AB-GMRES and direct
//!   GMRES, each combinable with plain, normal-equations-stabilized, TSVD or
//!   Tikhonov triangular subsolves, plus the residual-jump switching
//!   controller;
//! * [`baselines`] — LSQR and LSMR via Golub–Kahan bidiagonalization;
//! * [`diagnostics`] — executable checks of the numerical-nonsingularity
//!   predicate, the augmented-matrix spectral identity, the effective
//!   condition-number lower bound, and Krylov dimension bookkeeping;
//! * [`problems`] — seeded test-problem generators.
//!
//! Determinism is a design goal throughout: fixed accumulation orders in all
//! kernels and a named PRNG (ChaCha12) for every random quantity, so that a
//! given seed reproduces a run bit for bit.

pub mod baselines;
pub mod dense;
pub mod diagnostics;
pub mod krylov;
pub mod problems;
pub mod sparse;
pub mod vecops;

pub use dense::{
    back_substitute, cholesky, forward_substitute, givens_append_column, jacobi_svd,
    CholeskyFactor, DenseError, DenseMatrix, GivensRotation, LowerTriangular, SvdResult,
    UpperTriangular,
};
pub use krylov::{
    run_gmres, run_stabilized_switching, solve, solve_with_observer, ConvergenceTrace,
    GmresWorkspace, OperatorMode, SolverError, SolverMethod, SolverOptions, SolverResult,
    SolverStatus, SubsolveKind, TraceRecord,
};
pub use sparse::{mm_read, mm_write, SparseError, SparseMatrix, PruneReport};
