//! Small dense kernels used inside the Krylov iteration: incremental Givens
//! QR of the Hessenberg matrix, triangular solves, Cholesky factorization
//! with an LDLᵀ fallback for numerically singular normal matrices, and a
//! one-sided Jacobi SVD.
//!
//! Everything here is written with a fixed operation order; none of the
//! kernels ever reassociates a sum, so results are reproducible bit for bit.

use thiserror::Error;

use crate::vecops;

/// Errors from the dense kernels.
#[derive(Debug, Error)]
pub enum DenseError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular triangular system: zero diagonal at index {index}")]
    SingularTriangular { index: usize },
    #[error("one-sided Jacobi SVD did not converge within {sweeps} sweeps")]
    SvdNoConvergence {
        sweeps: usize,
        /// Best factorization reached when the sweep limit was hit.
        best: Box<SvdResult>,
    },
}

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut a = Self::zeros(order, order);
        for i in 0..order {
            a.set(i, i, 1.0);
        }
        a
    }

    /// Builds from a row-major nested slice; rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut a = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                a.set(i, j, v);
            }
        }
        a
    }

    /// Builds from column vectors of equal length.
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let ncols = cols.len();
        let nrows = if ncols == 0 { 0 } else { cols[0].len() };
        let mut a = Self::zeros(nrows, ncols);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), nrows, "ragged columns");
            a.col_mut(j).copy_from_slice(col);
        }
        a
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.nrows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.nrows] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `y = A x`, accumulated down each column in index order.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            vecops::axpy(x[j], self.col(j), &mut y);
        }
        y
    }

    /// `y = Aᵀ x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "matvec_t dimension mismatch");
        (0..self.ncols).map(|j| vecops::dot(self.col(j), x)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let y = self.matvec(other.col(j));
            out.col_mut(j).copy_from_slice(&y);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        vecops::norm2(&self.data)
    }

    /// `(A + Aᵀ) / 2`; requires a square matrix.
    pub fn symmetrized(&self) -> DenseMatrix {
        assert_eq!(self.nrows, self.ncols, "symmetrize needs a square matrix");
        let mut s = self.clone();
        for j in 0..self.ncols {
            for i in 0..j {
                let avg = 0.5 * (self.get(i, j) + self.get(j, i));
                s.set(i, j, avg);
                s.set(j, i, avg);
            }
        }
        s
    }
}

/// Upper triangular matrix, packed column-major: column `j` stores rows
/// `0..=j` contiguously. Appending a column is an O(j) push, which is what
/// the incremental Hessenberg reduction needs.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTriangular {
    order: usize,
    data: Vec<f64>,
}

impl UpperTriangular {
    pub fn new() -> Self {
        Self {
            order: 0,
            data: Vec::new(),
        }
    }

    pub fn from_dense(a: &DenseMatrix) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "upper triangular must be square");
        let mut r = Self::new();
        for j in 0..a.ncols() {
            let col: Vec<f64> = (0..=j).map(|i| a.get(i, j)).collect();
            r.append_column(&col);
        }
        r
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn col_start(j: usize) -> usize {
        j * (j + 1) / 2
    }

    /// Entry (i, j) with `i <= j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i <= j && j < self.order);
        self.data[Self::col_start(j) + i]
    }

    /// Overwrites entry (i, j) with `i <= j`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i <= j && j < self.order);
        self.data[Self::col_start(j) + i] = v;
    }

    /// Column `j` as the slice of rows `0..=j`.
    pub fn col(&self, j: usize) -> &[f64] {
        debug_assert!(j < self.order);
        &self.data[Self::col_start(j)..Self::col_start(j) + j + 1]
    }

    /// Appends a column of length `order + 1`.
    pub fn append_column(&mut self, col: &[f64]) {
        assert_eq!(col.len(), self.order + 1, "column length must be order+1");
        self.data.extend_from_slice(col);
        self.order += 1;
    }

    pub fn diag(&self, j: usize) -> f64 {
        self.get(j, j)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.order, self.order);
        for j in 0..self.order {
            for i in 0..=j {
                a.set(i, j, self.get(i, j));
            }
        }
        a
    }

    /// `y = R x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.order);
        let mut y = vec![0.0; self.order];
        for j in 0..self.order {
            let col = self.col(j);
            for i in 0..=j {
                y[i] += col[i] * x[j];
            }
        }
        y
    }
}

impl Default for UpperTriangular {
    fn default() -> Self {
        Self::new()
    }
}

/// Lower triangular matrix, packed by rows: row `i` stores columns `0..=i`
/// contiguously (equivalently, column-major packed storage of its
/// transpose). This keeps both factorization and forward substitution on
/// unit-stride slices.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    order: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn new() -> Self {
        Self {
            order: 0,
            data: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn row_start(i: usize) -> usize {
        i * (i + 1) / 2
    }

    /// Entry (i, j) with `j <= i`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i && i < self.order);
        self.data[Self::row_start(i) + j]
    }

    /// Row `i` as the slice of columns `0..=i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[Self::row_start(i)..Self::row_start(i) + i + 1]
    }

    /// Appends a row of length `order + 1`.
    pub fn append_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.order + 1, "row length must be order+1");
        self.data.extend_from_slice(row);
        self.order += 1;
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.order, self.order);
        for i in 0..self.order {
            for j in 0..=i {
                a.set(i, j, self.get(i, j));
            }
        }
        a
    }
}

impl Default for LowerTriangular {
    fn default() -> Self {
        Self::new()
    }
}

/// Solves `R y = t` by backward substitution. Fails only on an exactly zero
/// diagonal entry; near-singular systems are solved as-is and the caller
/// decides what to do with the result.
pub fn back_substitute(r: &UpperTriangular, t: &[f64]) -> Result<Vec<f64>, DenseError> {
    let n = r.order();
    if t.len() != n {
        return Err(DenseError::DimensionMismatch(format!(
            "back_substitute: order {n} vs rhs length {}",
            t.len()
        )));
    }
    let mut y = t.to_vec();
    for j in (0..n).rev() {
        let d = r.diag(j);
        if d == 0.0 {
            return Err(DenseError::SingularTriangular { index: j });
        }
        y[j] /= d;
        let yj = y[j];
        let col = r.col(j);
        for i in 0..j {
            y[i] -= col[i] * yj;
        }
    }
    Ok(y)
}

/// Solves `L z = t` by forward substitution.
pub fn forward_substitute(l: &LowerTriangular, t: &[f64]) -> Result<Vec<f64>, DenseError> {
    let n = l.order();
    if t.len() != n {
        return Err(DenseError::DimensionMismatch(format!(
            "forward_substitute: order {n} vs rhs length {}",
            t.len()
        )));
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let d = l.diag(i);
        if d == 0.0 {
            return Err(DenseError::SingularTriangular { index: i });
        }
        let row = l.row(i);
        let mut acc = t[i];
        for j in 0..i {
            acc -= row[j] * z[j];
        }
        z[i] = acc / d;
    }
    Ok(z)
}

/// Solves `Lᵀ y = z` given a lower triangular `L`.
pub fn transpose_back_substitute(l: &LowerTriangular, z: &[f64]) -> Result<Vec<f64>, DenseError> {
    let n = l.order();
    if z.len() != n {
        return Err(DenseError::DimensionMismatch(format!(
            "transpose_back_substitute: order {n} vs rhs length {}",
            z.len()
        )));
    }
    let mut y = z.to_vec();
    for i in (0..n).rev() {
        let d = l.diag(i);
        if d == 0.0 {
            return Err(DenseError::SingularTriangular { index: i });
        }
        y[i] /= d;
        let yi = y[i];
        let row = l.row(i);
        for j in 0..i {
            y[j] -= row[j] * yi;
        }
    }
    Ok(y)
}

/// Plane rotation with `c² + s² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GivensRotation {
    pub c: f64,
    pub s: f64,
}

impl GivensRotation {
    /// Rotation annihilating `b` against `a`, with the convention `c >= 0`.
    /// Returns the rotation and the resulting first component (`±hypot`).
    /// A zero `b` yields the identity rotation.
    pub fn annihilating(a: f64, b: f64) -> (GivensRotation, f64) {
        if b == 0.0 {
            return (GivensRotation { c: 1.0, s: 0.0 }, a);
        }
        let mut h = a.hypot(b);
        if a < 0.0 {
            h = -h;
        }
        (GivensRotation { c: a / h, s: b / h }, h)
    }

    /// Applies the rotation to a pair: `(c·a + s·b, -s·a + c·b)`.
    #[inline]
    pub fn apply(&self, a: f64, b: f64) -> (f64, f64) {
        (self.c * a + self.s * b, -self.s * a + self.c * b)
    }
}

/// Appends one Hessenberg column to the Givens-maintained QR factorization.
///
/// `h_col` must have length `r.order() + 2` (the new column including its
/// subdiagonal entry). All previously generated rotations are applied, one
/// new rotation annihilates the subdiagonal, the rotated column is appended
/// to `r`, and the transformed right-hand side `(t, rho)` is updated.
/// Returns `|rho|`, the residual norm of the projected problem.
pub fn givens_append_column(
    r: &mut UpperTriangular,
    rotations: &mut Vec<GivensRotation>,
    h_col: &[f64],
    t: &mut Vec<f64>,
    rho: &mut f64,
) -> f64 {
    givens_append_column_with_rhs(r, rotations, h_col, t, rho, 0.0)
}

/// As [`givens_append_column`], but the raw right-hand side gains `incoming`
/// as its new trailing entry before the new rotation is applied. Standard
/// GMRES extends the RHS with zero; the range-restricted variant feeds the
/// projection of r₀ onto the newest basis vector.
pub(crate) fn givens_append_column_with_rhs(
    r: &mut UpperTriangular,
    rotations: &mut Vec<GivensRotation>,
    h_col: &[f64],
    t: &mut Vec<f64>,
    rho: &mut f64,
    incoming: f64,
) -> f64 {
    let s = r.order();
    assert_eq!(h_col.len(), s + 2, "Hessenberg column must have order+2 entries");
    assert_eq!(rotations.len(), s);
    assert_eq!(t.len(), s);

    let mut col = h_col.to_vec();
    for (k, rot) in rotations.iter().enumerate() {
        let (a, b) = rot.apply(col[k], col[k + 1]);
        col[k] = a;
        col[k + 1] = b;
    }
    let (rot, diag) = GivensRotation::annihilating(col[s], col[s + 1]);
    col[s] = diag;
    r.append_column(&col[..=s]);
    rotations.push(rot);

    let (t_new, rho_new) = rot.apply(*rho, incoming);
    t.push(t_new);
    *rho = rho_new;
    rho.abs()
}

/// Result of [`cholesky`]: either `L Lᵀ = S` (`ldl_d` absent) or, when a
/// nonpositive pivot forced the fallback, a unit lower triangular `L` and
/// diagonal `d` with `L diag(d) Lᵀ ≈ S` and exact-zero pivots clamped to 0.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub l: LowerTriangular,
    pub fallback_used: bool,
    /// Diagonal of the LDLᵀ fallback (zero entries mark clamped pivots).
    pub ldl_d: Option<Vec<f64>>,
    /// Raw pivot sequence before any square root or clamping.
    pub pivots: Vec<f64>,
}

impl CholeskyFactor {
    /// Solves `S y = rhs` using the factorization. Zero LDLᵀ pivots are
    /// treated as pseudoinverse directions (component set to zero), so a
    /// usable solution comes back even for numerically singular `S`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, DenseError> {
        let z = forward_substitute(&self.l, rhs)?;
        match &self.ldl_d {
            None => transpose_back_substitute(&self.l, &z),
            Some(d) => {
                let w: Vec<f64> = z
                    .iter()
                    .zip(d)
                    .map(|(&zi, &di)| if di == 0.0 { 0.0 } else { zi / di })
                    .collect();
                transpose_back_substitute(&self.l, &w)
            }
        }
    }
}

/// Cholesky factorization of a symmetric matrix by the bordering method
/// (row by row, so the factor of a leading principal block never changes
/// when the matrix grows).
///
/// The input is symmetrized as `(S + Sᵀ)/2` on entry. If a pivot `<= 0`
/// turns up, the whole factorization is redone as LDLᵀ with 1x1 pivots in
/// order; pivots with `|d| <= eps * max diag` are clamped to exact zero and
/// their column of `L` is skipped.
pub fn cholesky(s: &DenseMatrix) -> Result<CholeskyFactor, DenseError> {
    if s.nrows() != s.ncols() {
        return Err(DenseError::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let s = s.symmetrized();
    let n = s.nrows();

    let mut l = LowerTriangular::new();
    let mut pivots = Vec::with_capacity(n);
    let mut plain_ok = true;
    'plain: {
        for i in 0..n {
            let mut row = vec![0.0; i + 1];
            for j in 0..i {
                let mut acc = s.get(i, j);
                let lrow_j = l.row(j);
                for k in 0..j {
                    acc -= row[k] * lrow_j[k];
                }
                row[j] = acc / l.diag(j);
            }
            let mut pivot = s.get(i, i);
            for k in 0..i {
                pivot -= row[k] * row[k];
            }
            pivots.push(pivot);
            if pivot <= 0.0 {
                plain_ok = false;
                break 'plain;
            }
            row[i] = pivot.sqrt();
            l.append_row(&row);
        }
    }
    if plain_ok {
        return Ok(CholeskyFactor {
            l,
            fallback_used: false,
            ldl_d: None,
            pivots,
        });
    }

    // LDLᵀ fallback, again by bordering.
    let mut maxdiag = 0.0f64;
    for i in 0..n {
        maxdiag = maxdiag.max(s.get(i, i).abs());
    }
    let zero_tol = f64::EPSILON * maxdiag;

    let mut l = LowerTriangular::new();
    let mut d = Vec::with_capacity(n);
    let mut pivots = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0.0; i + 1];
        for j in 0..i {
            let mut acc = s.get(i, j);
            let lrow_j = l.row(j);
            for k in 0..j {
                acc -= row[k] * d[k] * lrow_j[k];
            }
            row[j] = if d[j] == 0.0 { 0.0 } else { acc / d[j] };
        }
        let mut pivot = s.get(i, i);
        for k in 0..i {
            pivot -= row[k] * row[k] * d[k];
        }
        pivots.push(pivot);
        let di = if pivot.abs() <= zero_tol { 0.0 } else { pivot };
        d.push(di);
        row[i] = 1.0;
        l.append_row(&row);
    }
    Ok(CholeskyFactor {
        l,
        fallback_used: true,
        ldl_d: Some(d),
        pivots,
    })
}

/// Singular value decomposition `A = U Σ Vᵀ` with orthonormal `U` (m x n),
/// nonincreasing `singular_values`, and orthogonal `V` (n x n).
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    /// σ₁/σₙ; infinite if the smallest singular value is zero.
    pub fn condition_number(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&max), Some(&min)) if min > 0.0 => max / min,
            (Some(&max), Some(_)) if max > 0.0 => f64::INFINITY,
            _ => f64::NAN,
        }
    }

    /// Number of singular values above `tol_factor * σ₁`.
    pub fn rank(&self, tol_factor: f64) -> usize {
        match self.singular_values.first() {
            None => 0,
            Some(&s1) => {
                let tol = tol_factor * s1;
                self.singular_values.iter().filter(|&&s| s > tol).count()
            }
        }
    }
}

const JACOBI_MAX_SWEEPS: usize = 30;

/// One-sided Jacobi SVD for `m >= n`. Columns of a working copy are rotated
/// until every pairwise Gram entry satisfies `|wᵢᵀwⱼ| <= eps ||wᵢ|| ||wⱼ||`;
/// if that is not reached in 30 sweeps, the best iterate is returned inside
/// the error.
pub fn jacobi_svd(a: &DenseMatrix) -> Result<SvdResult, DenseError> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        return Err(DenseError::DimensionMismatch(format!(
            "jacobi_svd needs nrows >= ncols, got {m}x{n}"
        )));
    }
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);

    let mut converged = n < 2;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let (app, aqq, apq) = {
                    let wp = w.col(p);
                    let wq = w.col(q);
                    (vecops::dot(wp, wp), vecops::dot(wq, wq), vecops::dot(wp, wq))
                };
                if apq.abs() <= f64::EPSILON * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| vecops::norm2(w.col(j))).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = DenseMatrix::zeros(m, n);
    let mut v_sorted = DenseMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        singular_values.push(sigma);
        v_sorted.col_mut(dst).copy_from_slice(v.col(src));
        if sigma > 0.0 {
            let inv = 1.0 / sigma;
            let (ucol, wcol) = (u.col_mut(dst), w.col(src));
            for (ui, &wi) in ucol.iter_mut().zip(wcol) {
                *ui = wi * inv;
            }
        }
    }
    // Exactly zero columns get an orthonormal completion so U stays
    // orthonormal even for structurally rank-deficient input.
    for j in 0..n {
        if singular_values[j] == 0.0 {
            complete_orthonormal_column(&mut u, j);
        }
    }

    let result = SvdResult {
        u,
        singular_values,
        v: v_sorted,
    };
    if converged {
        Ok(result)
    } else {
        Err(DenseError::SvdNoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            best: Box::new(result),
        })
    }
}

fn rotate_columns(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let m = a.nrows();
    for i in 0..m {
        let (xp, xq) = (a.get(i, p), a.get(i, q));
        a.set(i, p, c * xp - s * xq);
        a.set(i, q, s * xp + c * xq);
    }
}

fn complete_orthonormal_column(u: &mut DenseMatrix, j: usize) {
    let m = u.nrows();
    for seed in 0..m {
        let mut cand = vec![0.0; m];
        cand[seed] = 1.0;
        for _ in 0..2 {
            for k in 0..u.ncols() {
                if k == j {
                    continue;
                }
                let proj = vecops::dot(u.col(k), &cand);
                vecops::axpy(-proj, &u.col(k).to_vec(), &mut cand);
            }
        }
        let norm = vecops::norm2(&cand);
        if norm > 0.5 {
            vecops::scale(1.0 / norm, &mut cand);
            u.col_mut(j).copy_from_slice(&cand);
            return;
        }
    }
}

/// Modified Gram–Schmidt with one reorthogonalization pass; returns the
/// orthonormal basis of the span, dropping vectors whose orthogonalized
/// remainder falls below `drop_tol` times their original norm.
pub(crate) fn orthonormalize_mgs2(vectors: &[Vec<f64>], drop_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for vec in vectors {
        let orig_norm = vecops::norm2(vec);
        if orig_norm == 0.0 {
            continue;
        }
        let mut w = vec.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = vecops::dot(q, &w);
                vecops::axpy(-proj, q, &mut w);
            }
        }
        let norm = vecops::norm2(&w);
        if norm > drop_tol * orig_norm {
            vecops::scale(1.0 / norm, &mut w);
            basis.push(w);
        }
    }
    basis
}
