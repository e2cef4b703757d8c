//! Run summary schema and the `compare` table renderer.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixInfo {
    pub name: String,
    pub kind: String,
    pub nrows: usize,
    pub ncols: usize,
    pub nnz: usize,
    pub density: f64,
    /// Numerical rank at the 1e-10 relative tolerance, when requested.
    pub rank: Option<usize>,
    pub transposed: bool,
    pub pruned: Option<PruneInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneInfo {
    pub removed_rows: usize,
    pub removed_cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSummary {
    pub name: String,
    pub status: String,
    pub iter_best: Option<usize>,
    pub atr_best: Option<f64>,
    /// Mean wall time over the repeats.
    pub wall_seconds: f64,
    pub switched_at: Option<usize>,
    /// Trace file name relative to the output directory.
    pub trace: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub matrix: MatrixInfo,
    pub seed: u64,
    pub repeats: usize,
    pub precision: String,
    pub solvers: Vec<SolverSummary>,
}

impl RunSummary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let summary: RunSummary = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        if summary.schema_version != SCHEMA_VERSION {
            bail!(
                "{}: schema version {} does not match supported version {SCHEMA_VERSION}",
                path.display(),
                summary.schema_version
            );
        }
        Ok(summary)
    }
}

/// Renders one or more summaries as a markdown table, one row per
/// (matrix, solver), sorted for deterministic output.
pub fn render_comparison(summaries: &[RunSummary]) -> String {
    let mut rows: Vec<(String, String, String, String, String)> = Vec::new();
    for summary in summaries {
        for solver in &summary.solvers {
            let iter = solver
                .iter_best
                .map(|i| i.to_string())
                .unwrap_or_else(|| "-".to_string());
            let atr = solver
                .atr_best
                .map(|a| format!("{a:.3e}"))
                .unwrap_or_else(|| "-".to_string());
            rows.push((
                summary.matrix.name.clone(),
                solver.name.clone(),
                iter,
                atr,
                format!("{:.3}", solver.wall_seconds),
            ));
        }
    }
    rows.sort();
    let mut out = String::new();
    out.push_str("| matrix | solver | iter | atr | seconds |\n");
    out.push_str("|---|---|---:|---:|---:|\n");
    for (matrix, solver, iter, atr, secs) in rows {
        let _ = writeln!(out, "| {matrix} | {solver} | {iter} | {atr} | {secs} |");
    }
    out
}
