//! Compressed sparse row storage, Matrix Market ingestion, and the
//! matrix–vector products used by every solver in this crate.
//!
//! Matrices are canonical after construction: within each row the column
//! indices are strictly increasing, duplicate entries have been summed, and
//! explicit zeros are dropped. Products accumulate in a fixed order
//! (ascending row, ascending column within a row), so repeated runs produce
//! bit-identical results.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::dense::DenseMatrix;

/// Errors from sparse-matrix construction and Matrix Market I/O.
#[derive(Debug, Error)]
pub enum SparseError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported Matrix Market field '{0}' (only real and integer are supported)")]
    UnsupportedField(String),
    #[error("unsupported Matrix Market symmetry '{0}' (general, symmetric, skew-symmetric)")]
    UnsupportedSymmetry(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix has no nonzeros")]
    AllZero,
    #[error("entry ({row}, {col}) out of bounds for {nrows}x{ncols} matrix")]
    EntryOutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Report of the zero row/column pruning pass, mapping the pruned matrix
/// back to the original index space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneReport {
    /// Original indices of the rows that survived, strictly increasing.
    pub kept_rows: Vec<usize>,
    /// Original indices of the columns that survived, strictly increasing.
    pub kept_cols: Vec<usize>,
    pub removed_rows: usize,
    pub removed_cols: usize,
}

/// Real sparse matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_starts: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a canonical CSR matrix from unordered triplets. Duplicate
    /// entries are summed; entries that sum to exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(SparseError::EntryOutOfBounds {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_starts = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let (r, c, mut v) = sorted[k];
            k += 1;
            while k < sorted.len() && sorted[k].0 == r && sorted[k].1 == c {
                v += sorted[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_indices.push(c);
                values.push(v);
                row_starts[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            row_starts[r + 1] += row_starts[r];
        }
        Ok(Self {
            nrows,
            ncols,
            row_starts,
            col_indices,
            values,
        })
    }

    /// Converts a dense matrix, dropping exact zeros.
    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut triplets = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a.get(i, j);
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &triplets)
            .expect("dense entries are in bounds by construction")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Fraction of stored entries, in [0, 1].
    pub fn density(&self) -> f64 {
        if self.nrows == 0 || self.ncols == 0 {
            0.0
        } else {
            self.nnz() as f64 / (self.nrows as f64 * self.ncols as f64)
        }
    }

    pub fn row_starts(&self) -> &[usize] {
        &self.row_starts
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates stored entries in (row, col) order.
    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_starts[r]..self.row_starts[r + 1])
                .map(move |k| (r, self.col_indices[k], self.values[k]))
        })
    }

    /// Largest stored-entry count over rows and over columns. Used for the
    /// rounding-error budget of the adjoint identity.
    pub fn max_entries_per_line(&self) -> usize {
        let mut per_row = 0usize;
        let mut col_counts = vec![0usize; self.ncols];
        for r in 0..self.nrows {
            per_row = per_row.max(self.row_starts[r + 1] - self.row_starts[r]);
            for k in self.row_starts[r]..self.row_starts[r + 1] {
                col_counts[self.col_indices[k]] += 1;
            }
        }
        per_row.max(col_counts.into_iter().max().unwrap_or(0))
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        crate::vecops::norm2(&self.values)
    }

    /// `y = A x`, accumulated per row in ascending column order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        if x.len() != self.ncols {
            return Err(SparseError::DimensionMismatch(format!(
                "spmv: matrix is {}x{}, vector has length {}",
                self.nrows,
                self.ncols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_starts[r]..self.row_starts[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[r] = acc;
        }
        Ok(y)
    }

    /// `y = Aᵀ x` without materializing the transpose: a scatter pass over
    /// the CSR rows in ascending order. Each output entry receives its
    /// contributions in ascending original-row order, the same order a
    /// materialized transpose would use, so the two agree bitwise.
    pub fn spmv_t(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        if x.len() != self.nrows {
            return Err(SparseError::DimensionMismatch(format!(
                "spmv_t: matrix is {}x{}, vector has length {}",
                self.nrows,
                self.ncols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let xr = x[r];
            for k in self.row_starts[r]..self.row_starts[r + 1] {
                y[self.col_indices[k]] += self.values[k] * xr;
            }
        }
        Ok(y)
    }

    /// Exact structural transpose; transposing twice returns the original
    /// matrix bit for bit.
    pub fn transpose(&self) -> SparseMatrix {
        let nnz = self.nnz();
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        for r in 0..self.nrows {
            for k in self.row_starts[r]..self.row_starts[r + 1] {
                let c = self.col_indices[k];
                let dst = next[c];
                next[c] += 1;
                col_indices[dst] = r;
                values[dst] = self.values[k];
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_starts: counts,
            col_indices,
            values,
        }
    }

    /// Removes rows and columns that hold no stored entry. Fails if the
    /// matrix has no nonzeros at all.
    pub fn prune_zero_rows_cols(&self) -> Result<(SparseMatrix, PruneReport), SparseError> {
        if self.nnz() == 0 {
            return Err(SparseError::AllZero);
        }
        let mut row_used = vec![false; self.nrows];
        let mut col_used = vec![false; self.ncols];
        for r in 0..self.nrows {
            if self.row_starts[r + 1] > self.row_starts[r] {
                row_used[r] = true;
            }
            for k in self.row_starts[r]..self.row_starts[r + 1] {
                col_used[self.col_indices[k]] = true;
            }
        }
        let kept_rows: Vec<usize> = (0..self.nrows).filter(|&r| row_used[r]).collect();
        let kept_cols: Vec<usize> = (0..self.ncols).filter(|&c| col_used[c]).collect();
        let mut row_map = vec![usize::MAX; self.nrows];
        for (new, &old) in kept_rows.iter().enumerate() {
            row_map[old] = new;
        }
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in kept_cols.iter().enumerate() {
            col_map[old] = new;
        }

        let mut row_starts = vec![0usize; kept_rows.len() + 1];
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for (new_r, &old_r) in kept_rows.iter().enumerate() {
            for k in self.row_starts[old_r]..self.row_starts[old_r + 1] {
                col_indices.push(col_map[self.col_indices[k]]);
                values.push(self.values[k]);
            }
            row_starts[new_r + 1] = col_indices.len();
        }
        let report = PruneReport {
            removed_rows: self.nrows - kept_rows.len(),
            removed_cols: self.ncols - kept_cols.len(),
            kept_rows,
            kept_cols,
        };
        let pruned = SparseMatrix {
            nrows: report.kept_rows.len(),
            ncols: report.kept_cols.len(),
            row_starts,
            col_indices,
            values,
        };
        Ok((pruned, report))
    }

    /// Dense copy; intended for small matrices in tests and diagnostics.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter_entries() {
            a.set(r, c, v);
        }
        a
    }

    /// Checks the CSR structure invariants; used by tests.
    pub fn is_canonical(&self) -> bool {
        if self.row_starts.len() != self.nrows + 1
            || self.row_starts[0] != 0
            || *self.row_starts.last().unwrap() != self.values.len()
            || self.col_indices.len() != self.values.len()
        {
            return false;
        }
        for r in 0..self.nrows {
            if self.row_starts[r] > self.row_starts[r + 1] {
                return false;
            }
            let row = &self.col_indices[self.row_starts[r]..self.row_starts[r + 1]];
            if !row.windows(2).all(|w| w[0] < w[1]) {
                return false;
            }
            if row.iter().any(|&c| c >= self.ncols) {
                return false;
            }
        }
        self.values.iter().all(|&v| v != 0.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MmField {
    Real,
    Integer,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MmSymmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Reads a Matrix Market coordinate file into canonical CSR form.
///
/// Real and integer fields are accepted; symmetric and skew-symmetric
/// storage is expanded to full. Duplicate entries are summed.
pub fn mm_read<P: AsRef<Path>>(path: P) -> Result<SparseMatrix, SparseError> {
    let text = fs::read_to_string(path)?;
    mm_parse(&text)
}

/// Parses Matrix Market coordinate text. See [`mm_read`].
pub fn mm_parse(text: &str) -> Result<SparseMatrix, SparseError> {
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" {
        return Err(parse_err(1, "missing %%MatrixMarket header".into()));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(parse_err(
            1,
            format!("unsupported header '{} {}': expected 'matrix coordinate'", tokens[1], tokens[2]),
        ));
    }
    let field = match tokens[3].as_str() {
        "real" => MmField::Real,
        "integer" => MmField::Integer,
        other => return Err(SparseError::UnsupportedField(other.to_string())),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        "skew-symmetric" => MmSymmetry::SkewSymmetric,
        other => return Err(SparseError::UnsupportedSymmetry(other.to_string())),
    };
    let _ = field;

    // Size line: first non-comment, non-blank line after the header.
    let mut size: Option<(usize, usize, usize, usize)> = None;
    for (idx, line) in lines.by_ref() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let nrows = parse_usize(it.next(), lineno, "row count")?;
        let ncols = parse_usize(it.next(), lineno, "column count")?;
        let nnz = parse_usize(it.next(), lineno, "entry count")?;
        if it.next().is_some() {
            return Err(parse_err(lineno, "trailing tokens on size line".into()));
        }
        size = Some((nrows, ncols, nnz, lineno));
        break;
    }
    let (nrows, ncols, declared_nnz, _) =
        size.ok_or_else(|| parse_err(0, "missing size line".into()))?;

    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(declared_nnz * 2);
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if seen == declared_nnz {
            return Err(parse_err(
                lineno,
                format!("more than the declared {declared_nnz} entries"),
            ));
        }
        let mut it = trimmed.split_whitespace();
        let r = parse_usize(it.next(), lineno, "row index")?;
        let c = parse_usize(it.next(), lineno, "column index")?;
        let v_str = it
            .next()
            .ok_or_else(|| parse_err(lineno, "missing value".into()))?;
        if it.next().is_some() {
            return Err(parse_err(lineno, "trailing tokens on entry line".into()));
        }
        let v: f64 = v_str
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid value '{v_str}'")))?;
        if !v.is_finite() {
            return Err(parse_err(lineno, format!("non-finite value '{v_str}'")));
        }
        if r == 0 || c == 0 || r > nrows || c > ncols {
            return Err(parse_err(
                lineno,
                format!("index ({r}, {c}) outside 1..={nrows} x 1..={ncols}"),
            ));
        }
        let (r0, c0) = (r - 1, c - 1);
        match symmetry {
            MmSymmetry::General => triplets.push((r0, c0, v)),
            MmSymmetry::Symmetric => {
                triplets.push((r0, c0, v));
                if r0 != c0 {
                    triplets.push((c0, r0, v));
                }
            }
            MmSymmetry::SkewSymmetric => {
                if r0 == c0 {
                    return Err(parse_err(
                        lineno,
                        "diagonal entry in skew-symmetric file".into(),
                    ));
                }
                triplets.push((r0, c0, v));
                triplets.push((c0, r0, -v));
            }
        }
        seen += 1;
    }
    if seen != declared_nnz {
        return Err(parse_err(
            0,
            format!("file ended after {seen} of {declared_nnz} declared entries"),
        ));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Writes a canonical matrix as `coordinate real general` with 17
/// significant digits, enough for an exact read-back.
pub fn mm_write<P: AsRef<Path>>(a: &SparseMatrix, path: P) -> Result<(), SparseError> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(mm_format(a).as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Serializes a matrix in Matrix Market coordinate form.
pub fn mm_format(a: &SparseMatrix) -> String {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for (r, c, v) in a.iter_entries() {
        let _ = writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v);
    }
    out
}

fn parse_err(line: usize, msg: String) -> SparseError {
    SparseError::Parse { line, msg }
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize, SparseError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SparseMatrix {
        // [[1, 0, 2], [0, 3, 0]]
        SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]).unwrap()
    }

    #[test]
    fn smallest_legal_file() {
        let a = mm_parse("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.0\n").unwrap();
        assert_eq!((a.nrows(), a.ncols(), a.nnz()), (1, 1, 1));
        assert_eq!(a.values(), &[2.0]);
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let a = mm_parse("%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1.0\n1 1 1.0\n")
            .unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.values(), &[2.0]);
    }

    #[test]
    fn pattern_field_rejected() {
        let err = mm_parse("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n")
            .unwrap_err();
        assert!(matches!(err, SparseError::UnsupportedField(f) if f == "pattern"));
    }

    #[test]
    fn complex_field_rejected() {
        let err = mm_parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1.0 0.0\n")
            .unwrap_err();
        assert!(matches!(err, SparseError::UnsupportedField(f) if f == "complex"));
    }

    #[test]
    fn parse_error_carries_line_number() {
        let err = mm_parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 x 1.0\n")
            .unwrap_err();
        match err {
            SparseError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn out_of_range_index_rejected() {
        let err = mm_parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n")
            .unwrap_err();
        assert!(matches!(err, SparseError::Parse { line: 3, .. }));
    }

    #[test]
    fn truncated_file_rejected() {
        let err = mm_parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n")
            .unwrap_err();
        assert!(matches!(err, SparseError::Parse { .. }));
    }

    #[test]
    fn symmetric_storage_expands() {
        let a = mm_parse(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 1 5.0\n",
        )
        .unwrap();
        assert_eq!(a.nnz(), 3);
        let d = a.to_dense();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
    }

    #[test]
    fn skew_symmetric_storage_expands_with_sign() {
        let a = mm_parse("%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 5.0\n")
            .unwrap();
        let d = a.to_dense();
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 1), -5.0);
    }

    #[test]
    fn skew_symmetric_diagonal_rejected() {
        let err = mm_parse("%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n1 1 5.0\n")
            .unwrap_err();
        assert!(matches!(err, SparseError::Parse { line: 3, .. }));
    }

    #[test]
    fn integer_field_accepted() {
        let a = mm_parse("%%MatrixMarket matrix coordinate integer general\n1 2 2\n1 1 3\n1 2 -4\n")
            .unwrap();
        assert_eq!(a.values(), &[3.0, -4.0]);
    }

    #[test]
    fn transpose_identity() {
        let eye =
            SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]).unwrap();
        assert_eq!(eye.transpose(), eye);
    }

    #[test]
    fn transpose_hand_checkable() {
        let t = small().transpose();
        assert_eq!((t.nrows(), t.ncols()), (3, 2));
        let d = t.to_dense();
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.get(1, 1), 3.0);
        assert_eq!(d.get(2, 0), 2.0);
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn prune_removes_zero_row() {
        let a =
            SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (2, 1, 2.0)]).unwrap();
        let (p, rep) = a.prune_zero_rows_cols().unwrap();
        assert_eq!(p.nrows(), 2);
        assert_eq!(rep.removed_rows, 1);
        assert_eq!(rep.removed_cols, 0);
        assert_eq!(rep.kept_rows, vec![0, 2]);
    }

    #[test]
    fn prune_noop_when_full() {
        let a = small();
        let (p, rep) = a.prune_zero_rows_cols().unwrap();
        assert_eq!(p, a);
        assert_eq!(rep.removed_rows, 0);
        assert_eq!(rep.removed_cols, 0);
    }

    #[test]
    fn prune_all_zero_is_error() {
        let a = SparseMatrix::from_triplets(2, 2, &[]).unwrap();
        assert!(matches!(
            a.prune_zero_rows_cols(),
            Err(SparseError::AllZero)
        ));
    }

    #[test]
    fn spmv_identity() {
        let eye =
            SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]).unwrap();
        assert_eq!(eye.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spmv_hand_checkable() {
        assert_eq!(small().spmv(&[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        assert!(small().spmv(&[1.0, 1.0]).is_err());
        assert!(small().spmv_t(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn mm_roundtrip_exact() {
        let a = small();
        let text = mm_format(&a);
        let b = mm_parse(&text).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn canonical_after_construction() {
        let a = SparseMatrix::from_triplets(
            2,
            2,
            &[(1, 1, 2.0), (0, 1, 1.0), (0, 0, 1.0), (0, 1, -1.0)],
        )
        .unwrap();
        assert!(a.is_canonical());
        // The (0,1) pair cancelled to zero and was dropped.
        assert_eq!(a.nnz(), 2);
    }
}
