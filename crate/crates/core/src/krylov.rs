//! The GMRES family for least squares: AB-GMRES (operator `A Aᵀ` on the
//! m-dimensional side), BA-GMRES (operator `Aᵀ A` on the n-dimensional
//! side), the range-restricted AB variant, and direct GMRES for square
//! operators. Each method can extract the projected solution through one of
//! several triangular subsolves:
//!
//! * `plain` — backward substitution on `R y = t`;
//! * `stabilized` — Cholesky on the explicitly formed normal equations
//!   `fl(RᵀR) y = fl(Rᵀt)`. Forming the product in working precision shifts
//!   the tiny singular values of `R` upward, which is precisely what keeps
//!   the solve stable on ill-conditioned projected problems, so this product
//!   must never be computed in extended precision;
//! * `tsvd` — truncated SVD solve discarding singular values below `μ σ₁`;
//! * `tikhonov_normal` / `tikhonov_augmented` — the two algebraically
//!   equivalent Tikhonov forms.
//!
//! A solve always starts from `x₀ = 0`, evaluates the explicit residual on a
//! configurable cadence, and returns the iterate with the smallest relative
//! residual `‖Aᵀrᵢ‖/‖Aᵀr₀‖` seen, not the last one.

use thiserror::Error;

use crate::dense::{
    back_substitute, cholesky, givens_append_column_with_rhs, jacobi_svd, DenseError,
    DenseMatrix, GivensRotation, UpperTriangular,
};
use crate::diagnostics;
use crate::sparse::{SparseError, SparseMatrix};
use crate::vecops;

/// Errors from solver entry points.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Dense(#[from] DenseError),
}

/// Solver selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// GMRES on `min ‖b - A Aᵀ u‖` with `x = Aᵀ u`.
    AbGmres,
    /// GMRES on `Aᵀ A x = Aᵀ b`.
    BaGmres,
    /// AB-GMRES with the Krylov space started from `A Aᵀ r₀`.
    RrAbGmres,
    /// GMRES applied directly to a square operator.
    Gmres,
    Lsqr,
    Lsmr,
}

impl SolverMethod {
    pub fn is_gmres_family(self) -> bool {
        !matches!(self, SolverMethod::Lsqr | SolverMethod::Lsmr)
    }
}

/// Strategy for the projected triangular problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsolveKind {
    Plain,
    Stabilized,
    Tsvd,
    TikhonovNormal,
    TikhonovAugmented,
}

/// Options shared by every solver in the crate.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub method: SolverMethod,
    pub subsolve: SubsolveKind,
    /// TSVD truncation threshold relative to σ₁.
    pub mu: f64,
    /// Tikhonov regularization parameter.
    pub lambda: f64,
    /// Relative-residual jump factor that triggers the stabilized switch.
    pub switch_factor: f64,
    /// Iteration budget; `None` picks the method default (`m` for the GMRES
    /// family, `20 n` for LSQR/LSMR).
    pub max_iter: Option<usize>,
    /// Stop once `‖Aᵀrᵢ‖ < target_relres · ‖Aᵀr₀‖`.
    pub target_relres: f64,
    /// Evaluate the explicit residual every this many iterations.
    pub eval_cadence: usize,
    /// Seed used to generate the right-hand side; echoed into the result so
    /// a run can be reproduced.
    pub rng_seed: u64,
    /// Extra Gram-Schmidt pass per Arnoldi step (off by default; the
    /// standard algorithm uses plain MGS).
    pub reorthogonalize: bool,
    /// Record κ₂(Rᵢ) every this many iterations (0 = never); each checkpoint
    /// costs one dense SVD of the current triangular factor.
    pub cond_every: usize,
    /// Constant in the numerical-nonsingularity threshold `c · ε · dᵀd`.
    pub theorem4_c: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::AbGmres,
            subsolve: SubsolveKind::Plain,
            mu: 1e-8,
            lambda: 1e-16,
            switch_factor: 10.0,
            max_iter: None,
            target_relres: 1e-8,
            eval_cadence: 1,
            rng_seed: 0,
            reorthogonalize: false,
            cond_every: 0,
            theorem4_c: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(SolverError::InvalidOptions(format!(
                "mu must lie in (0, 1), got {}",
                self.mu
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(SolverError::InvalidOptions(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.switch_factor > 1.0) {
            return Err(SolverError::InvalidOptions(format!(
                "switch_factor must exceed 1, got {}",
                self.switch_factor
            )));
        }
        if self.eval_cadence == 0 {
            return Err(SolverError::InvalidOptions(
                "eval_cadence must be at least 1".into(),
            ));
        }
        if self.max_iter == Some(0) {
            return Err(SolverError::InvalidOptions(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(self.target_relres >= 0.0) {
            return Err(SolverError::InvalidOptions(format!(
                "target_relres must be nonnegative, got {}",
                self.target_relres
            )));
        }
        if !(self.theorem4_c > 0.0) {
            return Err(SolverError::InvalidOptions(format!(
                "theorem4_c must be positive, got {}",
                self.theorem4_c
            )));
        }
        Ok(())
    }
}

/// Which operator the Arnoldi process applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorMode {
    /// `w = A Aᵀ v` (m-dimensional Krylov space).
    Ab,
    /// `w = Aᵀ A v` (n-dimensional Krylov space).
    Ba,
    /// Same operator as [`OperatorMode::Ab`], but the space starts from
    /// `A Aᵀ r₀` and the projected right-hand side is `Vᵀ r₀`.
    Rr,
    /// `w = A v` for square `A`.
    Direct,
}

/// One evaluated iteration of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Arnoldi (or bidiagonalization) step index, 1-based.
    pub iter: usize,
    /// `‖Aᵀrᵢ‖₂ / ‖Aᵀr₀‖₂` from the explicitly recomputed residual.
    pub atr: f64,
    /// `‖rᵢ‖₂` from the explicitly recomputed residual.
    pub rnorm: f64,
    /// The projected-problem residual estimate (`|ρᵢ₊₁|` for GMRES).
    pub rho: f64,
    /// κ₂(Rᵢ) when a condition checkpoint fell on this iteration.
    pub cond_r: Option<f64>,
    /// True once the run has switched to the stabilized subsolve.
    pub switched: bool,
    /// Numerical-nonsingularity predicate of the newest column, when logged.
    pub theorem4_ok: Option<bool>,
}

/// Per-iteration convergence history.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, rec: TraceRecord) {
        debug_assert!(self
            .records
            .last()
            .map_or(true, |last| rec.iter > last.iter));
        self.records.push(rec);
    }

    /// Index and value of the smallest recorded `atr` (first minimum wins).
    pub fn min_atr(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for rec in &self.records {
            if best.map_or(true, |(_, a)| rec.atr < a) {
                best = Some((rec.iter, rec.atr));
            }
        }
        best
    }
}

/// Termination classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// Hit the `target_relres` stopping rule.
    Converged,
    /// Exhausted the iteration budget; best iterate returned.
    MaxIter,
    /// Arnoldi breakdown with the residual target already met.
    BreakdownHappy,
    /// Arnoldi breakdown (or an exactly singular projected problem) with the
    /// target unmet.
    BreakdownHard,
    /// No improvement over a long stretch of evaluations (baselines only).
    Stagnated,
}

/// Outcome of a solve: the best iterate under the minimum-relative-residual
/// protocol, plus the full trace.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x_best: Vec<f64>,
    pub iter_best: usize,
    pub atr_best: f64,
    pub status: SolverStatus,
    pub trace: ConvergenceTrace,
    /// Iteration at which the plain→stabilized switch fired, if it did.
    pub switched_at: Option<usize>,
    /// Seed echoed from the options, recording the right-hand side stream.
    pub seed: u64,
}

/// Arnoldi state shared by the GMRES variants: the orthonormal basis, the
/// Givens-reduced triangular factor of the Hessenberg matrix, and the
/// transformed right-hand side `(t, ρ)`.
#[derive(Debug, Clone)]
pub struct GmresWorkspace {
    mode: OperatorMode,
    basis: Vec<Vec<f64>>,
    r: UpperTriangular,
    rotations: Vec<GivensRotation>,
    t: Vec<f64>,
    rho: f64,
    beta: f64,
    r0: Vec<f64>,
    /// Running `Σ (vⱼᵀ r₀)²` for the range-restricted residual estimate.
    sum_g_sq: f64,
    reorthogonalize: bool,
}

/// Output of one Arnoldi step: the new Hessenberg column (coefficients plus
/// the subdiagonal norm) and the next basis vector, if one exists.
#[derive(Debug, Clone)]
pub struct ArnoldiStep {
    pub h_col: Vec<f64>,
    pub v_next: Option<Vec<f64>>,
    /// `‖w‖₂` before orthogonalization, the scale for the breakdown test.
    pub w_norm_before: f64,
}

impl ArnoldiStep {
    /// Breakdown: the orthogonalized remainder is zero relative to the
    /// operator output (`h_{i+1,i} <= ε ‖w‖`). Exact zero never fires in
    /// floating point on real problems, so the test is relative.
    pub fn is_breakdown(&self) -> bool {
        let h_last = *self.h_col.last().expect("column never empty");
        h_last <= f64::EPSILON * self.w_norm_before
    }
}

impl GmresWorkspace {
    /// Sets up the first basis vector for the chosen operator mode.
    pub fn new(
        a: &SparseMatrix,
        b: &[f64],
        mode: OperatorMode,
        reorthogonalize: bool,
    ) -> Result<Self, SolverError> {
        if b.len() != a.nrows() {
            return Err(SolverError::InvalidInput(format!(
                "rhs length {} does not match {} rows",
                b.len(),
                a.nrows()
            )));
        }
        if mode == OperatorMode::Direct && a.nrows() != a.ncols() {
            return Err(SolverError::InvalidInput(format!(
                "direct GMRES needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let r0 = b.to_vec();
        let (v1, beta, rho, sum_g_sq) = match mode {
            OperatorMode::Ab | OperatorMode::Direct => {
                let beta = vecops::norm2(&r0);
                if beta == 0.0 {
                    return Err(SolverError::InvalidInput("right-hand side is zero".into()));
                }
                let mut v = r0.clone();
                vecops::scale(1.0 / beta, &mut v);
                (v, beta, beta, 0.0)
            }
            OperatorMode::Ba => {
                let w = a.spmv_t(&r0)?;
                let beta = vecops::norm2(&w);
                if beta == 0.0 {
                    return Err(SolverError::InvalidInput(
                        "Aᵀb is zero; x = 0 already solves the problem".into(),
                    ));
                }
                let mut v = w;
                vecops::scale(1.0 / beta, &mut v);
                (v, beta, beta, 0.0)
            }
            OperatorMode::Rr => {
                let z = a.spmv(&a.spmv_t(&r0)?)?;
                let znorm = vecops::norm2(&z);
                if znorm == 0.0 {
                    return Err(SolverError::InvalidInput(
                        "A Aᵀ b is zero; x = 0 already solves the problem".into(),
                    ));
                }
                let mut v = z;
                vecops::scale(1.0 / znorm, &mut v);
                let g1 = vecops::dot(&v, &r0);
                (v, vecops::norm2(&r0), g1, g1 * g1)
            }
        };
        Ok(Self {
            mode,
            basis: vec![v1],
            r: UpperTriangular::new(),
            rotations: Vec::new(),
            t: Vec::new(),
            rho,
            beta,
            r0,
            sum_g_sq,
            reorthogonalize,
        })
    }

    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    pub fn basis_len(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_vector(&self, j: usize) -> &[f64] {
        &self.basis[j]
    }

    pub fn triangular(&self) -> &UpperTriangular {
        &self.r
    }

    pub fn rotations(&self) -> &[GivensRotation] {
        &self.rotations
    }

    pub fn transformed_rhs(&self) -> &[f64] {
        &self.t
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn apply_operator(&self, a: &SparseMatrix, v: &[f64]) -> Result<Vec<f64>, SparseError> {
        match self.mode {
            OperatorMode::Ab | OperatorMode::Rr => a.spmv(&a.spmv_t(v)?),
            OperatorMode::Ba => a.spmv_t(&a.spmv(v)?),
            OperatorMode::Direct => a.spmv(v),
        }
    }

    /// One modified-Gram-Schmidt Arnoldi step against the current basis.
    /// The caller decides whether the step constitutes a breakdown and
    /// whether to [`push_basis`](Self::push_basis) the new vector.
    pub fn arnoldi_step(&mut self, a: &SparseMatrix) -> Result<ArnoldiStep, SolverError> {
        let v_last = self.basis.last().expect("basis never empty");
        let mut w = self.apply_operator(a, v_last)?;
        let w_norm_before = vecops::norm2(&w);
        let i = self.basis.len();
        let mut h_col = Vec::with_capacity(i + 1);
        for v in &self.basis {
            let h = vecops::dot(&w, v);
            vecops::axpy(-h, v, &mut w);
            h_col.push(h);
        }
        if self.reorthogonalize {
            for (j, v) in self.basis.iter().enumerate() {
                let correction = vecops::dot(&w, v);
                vecops::axpy(-correction, v, &mut w);
                h_col[j] += correction;
            }
        }
        let h_next = vecops::norm2(&w);
        h_col.push(h_next);
        let v_next = if h_next > 0.0 {
            vecops::scale(1.0 / h_next, &mut w);
            Some(w)
        } else {
            None
        };
        Ok(ArnoldiStep {
            h_col,
            v_next,
            w_norm_before,
        })
    }

    /// Appends the already-computed Hessenberg column to the triangular
    /// factor. `incoming` is the new raw entry of the projected right-hand
    /// side (zero except in range-restricted mode).
    pub fn append_reduced_column(&mut self, h_col: &[f64], incoming: f64) -> f64 {
        let res = givens_append_column_with_rhs(
            &mut self.r,
            &mut self.rotations,
            h_col,
            &mut self.t,
            &mut self.rho,
            incoming,
        );
        if self.mode == OperatorMode::Rr {
            self.sum_g_sq += incoming * incoming;
        }
        res
    }

    pub fn push_basis(&mut self, v: Vec<f64>) {
        debug_assert_eq!(v.len(), self.basis[0].len());
        self.basis.push(v);
    }

    pub fn initial_residual(&self) -> &[f64] {
        &self.r0
    }

    /// Residual norm of the projected least squares problem. For the
    /// standard modes this is `|ρ|`; the range-restricted space does not
    /// contain r₀, so the component of r₀ outside the basis is added back.
    pub fn residual_estimate(&self) -> f64 {
        match self.mode {
            OperatorMode::Rr => {
                let outside = (self.beta * self.beta - self.sum_g_sq).max(0.0);
                (outside + self.rho * self.rho).sqrt()
            }
            _ => self.rho.abs(),
        }
    }

    /// Forms the iterate for projected solution `y`: `x = Aᵀ (V y)` for the
    /// AB family, `x = V y` otherwise.
    pub fn assemble_x(&self, a: &SparseMatrix, y: &[f64]) -> Result<Vec<f64>, SparseError> {
        assert_eq!(y.len(), self.r.order());
        let space_dim = self.basis[0].len();
        let mut u = vec![0.0; space_dim];
        for (yj, v) in y.iter().zip(&self.basis) {
            vecops::axpy(*yj, v, &mut u);
        }
        match self.mode {
            OperatorMode::Ab | OperatorMode::Rr => a.spmv_t(&u),
            OperatorMode::Ba | OperatorMode::Direct => Ok(u),
        }
    }
}

/// `fl(RᵀR)`, formed explicitly in working precision with ascending-index
/// accumulation. Only the upper triangle is computed; the result is exactly
/// symmetric by construction.
pub fn form_normal_matrix(r: &UpperTriangular) -> DenseMatrix {
    let n = r.order();
    let mut s = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let ck = r.col(k);
        for j in 0..=k {
            let cj = r.col(j);
            let mut acc = 0.0;
            for p in 0..=j.min(k) {
                acc += cj[p] * ck[p];
            }
            s.set(j, k, acc);
            s.set(k, j, acc);
        }
    }
    s
}

/// `fl(Rᵀt)` with ascending-index accumulation.
pub fn normal_rhs(r: &UpperTriangular, t: &[f64]) -> Vec<f64> {
    let n = r.order();
    assert_eq!(t.len(), n);
    (0..n)
        .map(|j| {
            let cj = r.col(j);
            let mut acc = 0.0;
            for p in 0..=j {
                acc += cj[p] * t[p];
            }
            acc
        })
        .collect()
}

/// Plain extraction: `y = R⁻¹ t` by backward substitution.
pub fn subsolve_plain(r: &UpperTriangular, t: &[f64]) -> Result<Vec<f64>, DenseError> {
    back_substitute(r, t)
}

/// Stabilized extraction: solve `fl(RᵀR) y = fl(Rᵀt)` by Cholesky, falling
/// back to LDLᵀ when the normal matrix is numerically singular.
pub fn subsolve_stabilized(r: &UpperTriangular, t: &[f64]) -> Result<Vec<f64>, DenseError> {
    let s = form_normal_matrix(r);
    let rhs = normal_rhs(r, t);
    cholesky(&s)?.solve(&rhs)
}

/// Truncated-SVD extraction.
#[derive(Debug, Clone)]
pub struct TsvdSolution {
    pub y: Vec<f64>,
    /// Number of singular triplets kept; zero means every singular value
    /// fell below the threshold and `y` is identically zero.
    pub kept_rank: usize,
}

/// TSVD extraction: `y = Σ_{σⱼ ≥ μσ₁} (uⱼᵀt / σⱼ) vⱼ`. A singular value
/// exactly equal to `μσ₁` is kept.
pub fn subsolve_tsvd(
    r: &UpperTriangular,
    t: &[f64],
    mu: f64,
) -> Result<TsvdSolution, DenseError> {
    assert!(mu > 0.0 && mu < 1.0, "mu must lie in (0, 1)");
    let n = r.order();
    assert_eq!(t.len(), n);
    let svd = jacobi_svd(&r.to_dense())?;
    let sigma1 = svd.singular_values.first().copied().unwrap_or(0.0);
    let threshold = mu * sigma1;
    let mut y = vec![0.0; n];
    let mut kept_rank = 0;
    for (j, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma < threshold || sigma == 0.0 {
            break;
        }
        kept_rank += 1;
        let coeff = vecops::dot(svd.u.col(j), t) / sigma;
        vecops::axpy(coeff, svd.v.col(j), &mut y);
    }
    Ok(TsvdSolution { y, kept_rank })
}

/// Tikhonov in normal-equations form: `(fl(RᵀR) + λI) y = fl(Rᵀt)` by
/// Cholesky.
pub fn subsolve_tikhonov_normal(
    r: &UpperTriangular,
    t: &[f64],
    lambda: f64,
) -> Result<Vec<f64>, DenseError> {
    assert!(lambda >= 0.0, "lambda must be nonnegative");
    let mut s = form_normal_matrix(r);
    for j in 0..s.ncols() {
        let d = s.get(j, j);
        s.set(j, j, d + lambda);
    }
    let rhs = normal_rhs(r, t);
    cholesky(&s)?.solve(&rhs)
}

/// Tikhonov in augmented form: Givens QR of the stacked matrix
/// `(R; √λ I)` applied to the right-hand side `(t; 0)`, then backward
/// substitution. With `λ = 0` this reduces exactly to the plain subsolve.
pub fn subsolve_tikhonov_augmented(
    r: &UpperTriangular,
    t: &[f64],
    lambda: f64,
) -> Result<Vec<f64>, DenseError> {
    assert!(lambda >= 0.0, "lambda must be nonnegative");
    let n = r.order();
    assert_eq!(t.len(), n);
    let sqrt_lambda = lambda.sqrt();
    let mut work = r.clone();
    let mut rhs = t.to_vec();
    // Fold the rows of sqrt(lambda) I into R one at a time; each rotation
    // against the diagonal creates fill to the right, which subsequent
    // rotations of the same row eliminate.
    let mut row = vec![0.0; n];
    for k in 0..n {
        row[..n].fill(0.0);
        row[k] = sqrt_lambda;
        let mut row_rhs = 0.0;
        for j in k..n {
            if row[j] == 0.0 {
                continue;
            }
            let a = work.get(j, j);
            let b = row[j];
            let h = (a * a + b * b).sqrt();
            let (c, s) = (a / h, b / h);
            work.set(j, j, h);
            for jj in (j + 1)..n {
                let rjj = work.get(j, jj);
                let wjj = row[jj];
                work.set(j, jj, c * rjj + s * wjj);
                row[jj] = -s * rjj + c * wjj;
            }
            let (tj, wr) = (rhs[j], row_rhs);
            rhs[j] = c * tj + s * wr;
            row_rhs = -s * tj + c * wr;
        }
    }
    back_substitute(&work, &rhs)
}

/// One-way controller implementing the residual-jump switching rule: switch
/// at the first evaluated iteration `v` where
/// `atr(v) > factor · min_{i<v} atr(i)`.
#[derive(Debug, Clone)]
pub struct SwitchController {
    factor: f64,
    min_so_far: Option<f64>,
    switched_at: Option<usize>,
}

impl SwitchController {
    pub fn new(factor: f64) -> Self {
        Self {
            factor,
            min_so_far: None,
            switched_at: None,
        }
    }

    /// Feeds one evaluated `(iteration, atr)` pair; returns true exactly
    /// when the switch fires on this observation.
    pub fn observe(&mut self, iter: usize, atr: f64) -> bool {
        if self.switched_at.is_some() {
            return false;
        }
        if let Some(min) = self.min_so_far {
            if atr > self.factor * min {
                self.switched_at = Some(iter);
                return true;
            }
        }
        self.min_so_far = Some(self.min_so_far.map_or(atr, |m| m.min(atr)));
        false
    }

    pub fn switched_at(&self) -> Option<usize> {
        self.switched_at
    }
}

struct Evaluation {
    x: Vec<f64>,
    atr: f64,
    rnorm: f64,
}

enum EvalError {
    /// The projected triangular problem was exactly singular; the driver
    /// treats this as a hard breakdown.
    Singular,
    Fatal(SolverError),
}

impl From<SolverError> for EvalError {
    fn from(e: SolverError) -> Self {
        EvalError::Fatal(e)
    }
}

fn evaluate(
    a: &SparseMatrix,
    b: &[f64],
    ws: &GmresWorkspace,
    strategy: SubsolveKind,
    opts: &SolverOptions,
    atr0: f64,
) -> Result<Evaluation, EvalError> {
    let r = ws.triangular();
    let t = ws.transformed_rhs();
    let y = match strategy {
        SubsolveKind::Plain => subsolve_plain(r, t).map_err(singular_or_fatal)?,
        SubsolveKind::Stabilized => subsolve_stabilized(r, t).map_err(fatal)?,
        SubsolveKind::Tsvd => subsolve_tsvd(r, t, opts.mu).map_err(fatal)?.y,
        SubsolveKind::TikhonovNormal => {
            subsolve_tikhonov_normal(r, t, opts.lambda).map_err(fatal)?
        }
        SubsolveKind::TikhonovAugmented => {
            subsolve_tikhonov_augmented(r, t, opts.lambda).map_err(singular_or_fatal)?
        }
    };
    let x = ws.assemble_x(a, &y).map_err(SolverError::from)?;
    let residual = vecops::sub(b, &a.spmv(&x).map_err(SolverError::from)?);
    let atr_abs = vecops::norm2(&a.spmv_t(&residual).map_err(SolverError::from)?);
    Ok(Evaluation {
        x,
        atr: atr_abs / atr0,
        rnorm: vecops::norm2(&residual),
    })
}

fn singular_or_fatal(e: DenseError) -> EvalError {
    match e {
        DenseError::SingularTriangular { .. } => EvalError::Singular,
        other => EvalError::Fatal(other.into()),
    }
}

fn fatal(e: DenseError) -> EvalError {
    EvalError::Fatal(e.into())
}

fn condition_of_triangular(r: &UpperTriangular) -> f64 {
    match jacobi_svd(&r.to_dense()) {
        Ok(svd) => svd.condition_number(),
        Err(DenseError::SvdNoConvergence { best, .. }) => best.condition_number(),
        Err(_) => f64::NAN,
    }
}

/// Runs the selected GMRES variant with a fixed subsolve strategy.
pub fn run_gmres(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    run_gmres_with_observer(a, b, opts, &mut |_| {})
}

/// As [`run_gmres`], invoking `observer` on every trace record as it is
/// produced (the CLI streams records to disk through this hook).
pub fn run_gmres_with_observer(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<SolverResult, SolverError> {
    if !opts.method.is_gmres_family() {
        return Err(SolverError::InvalidOptions(format!(
            "{:?} is not a GMRES-family method; use solve()",
            opts.method
        )));
    }
    run_gmres_family(a, b, opts, false, observer)
}

/// AB-GMRES that starts with the plain subsolve and switches permanently to
/// the stabilized subsolve at the first relative-residual jump exceeding
/// `switch_factor`. The Arnoldi state carries over; only the extraction of
/// `y` changes.
pub fn run_stabilized_switching(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    run_stabilized_switching_with_observer(a, b, opts, &mut |_| {})
}

/// As [`run_stabilized_switching`] with a trace observer.
pub fn run_stabilized_switching_with_observer(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<SolverResult, SolverError> {
    if opts.method != SolverMethod::AbGmres {
        return Err(SolverError::InvalidOptions(format!(
            "switching is defined for AbGmres, got {:?}",
            opts.method
        )));
    }
    run_gmres_family(a, b, opts, true, observer)
}

fn run_gmres_family(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
    switching: bool,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<SolverResult, SolverError> {
    opts.validate()?;
    if a.nnz() == 0 {
        return Err(SolverError::InvalidInput("matrix has no nonzeros".into()));
    }
    if !vecops::all_finite(b) {
        return Err(SolverError::InvalidInput(
            "right-hand side has non-finite entries".into(),
        ));
    }
    if vecops::norm2(b) == 0.0 {
        return Err(SolverError::InvalidInput("right-hand side is zero".into()));
    }
    let mode = match opts.method {
        SolverMethod::AbGmres => OperatorMode::Ab,
        SolverMethod::BaGmres => OperatorMode::Ba,
        SolverMethod::RrAbGmres => OperatorMode::Rr,
        SolverMethod::Gmres => OperatorMode::Direct,
        other => {
            return Err(SolverError::InvalidOptions(format!(
                "{other:?} is not a GMRES-family method"
            )))
        }
    };
    if b.len() != a.nrows() {
        return Err(SolverError::InvalidInput(format!(
            "rhs length {} does not match {} rows",
            b.len(),
            a.nrows()
        )));
    }
    let atr0 = vecops::norm2(&a.spmv_t(b)?);
    if atr0 == 0.0 {
        // b ⟂ range(A): the zero vector is the least squares solution.
        return Ok(SolverResult {
            x_best: vec![0.0; a.ncols()],
            iter_best: 0,
            atr_best: 0.0,
            status: SolverStatus::Converged,
            trace: ConvergenceTrace::default(),
            switched_at: None,
            seed: opts.rng_seed,
        });
    }

    let max_iter = opts.max_iter.unwrap_or(a.nrows()).max(1);
    let mut ws = GmresWorkspace::new(a, b, mode, opts.reorthogonalize)?;
    let mut strategy = if switching {
        SubsolveKind::Plain
    } else {
        opts.subsolve
    };
    let mut controller = switching.then(|| SwitchController::new(opts.switch_factor));
    let mut switched_at: Option<usize> = None;
    let mut trace = ConvergenceTrace::default();
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    let mut status = SolverStatus::MaxIter;

    for iter in 1..=max_iter {
        let step = ws.arnoldi_step(a)?;
        let breakdown = step.is_breakdown();
        let incoming = match (mode, &step.v_next) {
            (OperatorMode::Rr, Some(v)) if !breakdown => vecops::dot(v, ws.initial_residual()),
            _ => 0.0,
        };
        ws.append_reduced_column(&step.h_col, incoming);

        let due = iter % opts.eval_cadence == 0 || breakdown || iter == max_iter;
        if due {
            match evaluate(a, b, &ws, strategy, opts, atr0) {
                Ok(eval) => {
                    let cond_r = if opts.cond_every > 0 && iter % opts.cond_every == 0 {
                        Some(condition_of_triangular(ws.triangular()))
                    } else {
                        None
                    };
                    let rec = TraceRecord {
                        iter,
                        atr: eval.atr,
                        rnorm: eval.rnorm,
                        rho: ws.residual_estimate(),
                        cond_r,
                        switched: switched_at.is_some(),
                        theorem4_ok: Some(
                            diagnostics::theorem4_check_with_constant(&ws, opts.theorem4_c)
                                .predicate,
                        ),
                    };
                    observer(&rec);
                    trace.push(rec);
                    if best.as_ref().map_or(true, |(_, atr, _)| eval.atr < *atr) {
                        best = Some((iter, eval.atr, eval.x));
                    }
                    if let Some(ctrl) = &mut controller {
                        if ctrl.observe(iter, eval.atr) {
                            switched_at = ctrl.switched_at();
                            strategy = SubsolveKind::Stabilized;
                        }
                    }
                    if eval.atr < opts.target_relres {
                        status = if breakdown {
                            SolverStatus::BreakdownHappy
                        } else {
                            SolverStatus::Converged
                        };
                        break;
                    }
                }
                Err(EvalError::Singular) => {
                    status = SolverStatus::BreakdownHard;
                    break;
                }
                Err(EvalError::Fatal(e)) => return Err(e),
            }
        }
        if breakdown {
            status = SolverStatus::BreakdownHard;
            break;
        }
        ws.push_basis(step.v_next.expect("non-breakdown step yields a vector"));
    }

    let (iter_best, atr_best, x_best) = match best {
        Some(b) => b,
        // Only reachable if the very first evaluation hit an exactly
        // singular projected problem; x = 0 has atr exactly 1.
        None => (0, 1.0, vec![0.0; a.ncols()]),
    };
    Ok(SolverResult {
        x_best,
        iter_best,
        atr_best,
        status,
        trace,
        switched_at,
        seed: opts.rng_seed,
    })
}

/// Dispatches on `opts.method`: the GMRES family goes through
/// [`run_gmres`], LSQR and LSMR to the baselines.
pub fn solve(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    solve_with_observer(a, b, opts, &mut |_| {})
}

/// As [`solve`] with a trace observer.
pub fn solve_with_observer(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<SolverResult, SolverError> {
    match opts.method {
        SolverMethod::Lsqr => crate::baselines::run_lsqr_with_observer(a, b, opts, observer),
        SolverMethod::Lsmr => crate::baselines::run_lsmr_with_observer(a, b, opts, observer),
        _ => run_gmres_with_observer(a, b, opts, observer),
    }
}
