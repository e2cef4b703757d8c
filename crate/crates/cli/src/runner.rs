//! Orchestration of a benchmark run: problem loading, per-solver execution
//! with streamed CSV traces, and summary assembly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use krylov_stab_core::dense::jacobi_svd;
use krylov_stab_core::krylov::{
    run_gmres_with_observer, run_stabilized_switching_with_observer, SolverError, SolverMethod,
    SolverOptions, SolverResult, SolverStatus, TraceRecord,
};
use krylov_stab_core::problems::rng::{rng_for, uniform_vec};
use krylov_stab_core::problems::{make_ep3, make_nullsym_square, make_random_rect};
use krylov_stab_core::sparse::{mm_read, SparseMatrix};
use krylov_stab_core::baselines::{run_lsmr_with_observer, run_lsqr_with_observer};

use crate::spec::{ProblemArg, SolverSpec, Strategy};
use crate::summary::{MatrixInfo, PruneInfo, RunSummary, SolverSummary, SCHEMA_VERSION};

pub struct RunConfig {
    pub problem: Option<ProblemArg>,
    pub matrix_path: Option<PathBuf>,
    pub transpose: bool,
    pub prune: bool,
    pub solvers: Vec<SolverSpec>,
    pub seed: u64,
    pub max_iter: Option<usize>,
    pub mu: f64,
    pub lambda: f64,
    pub switch_factor: f64,
    pub target_relres: f64,
    pub trace_cadence: usize,
    pub cond_every: usize,
    pub out_dir: PathBuf,
    pub repeats: usize,
    pub parallel: bool,
    pub compute_rank: bool,
}

struct LoadedProblem {
    matrix: SparseMatrix,
    rhs: Vec<f64>,
    info: MatrixInfo,
    /// How to rebuild the right-hand side for a derived seed (repeats).
    rhs_kind: RhsKind,
}

enum RhsKind {
    /// Fixed by the problem itself (ep3).
    Fixed,
    /// Uniform (0,1) entries from stream 1 of the seed.
    Uniform,
    /// b = A x_true with x_true from stream 2 of the seed.
    Consistent,
}

fn load_problem(config: &RunConfig) -> Result<LoadedProblem> {
    if let Some(path) = &config.matrix_path {
        let raw = mm_read(path).with_context(|| format!("reading {}", path.display()))?;
        let oriented = if config.transpose { raw.transpose() } else { raw };
        let (matrix, pruned) = if config.prune {
            let (m, report) = oriented
                .prune_zero_rows_cols()
                .context("pruning zero rows/columns")?;
            (
                m,
                Some(PruneInfo {
                    removed_rows: report.removed_rows,
                    removed_cols: report.removed_cols,
                }),
            )
        } else {
            (oriented, None)
        };
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "matrix".into());
        let name = if config.transpose { format!("{stem}T") } else { stem };
        let mut rng = rng_for(config.seed, 1);
        let rhs = uniform_vec(&mut rng, matrix.nrows());
        let info = MatrixInfo {
            name,
            kind: "file".into(),
            nrows: matrix.nrows(),
            ncols: matrix.ncols(),
            nnz: matrix.nnz(),
            density: matrix.density(),
            rank: None,
            transposed: config.transpose,
            pruned,
        };
        return Ok(LoadedProblem {
            matrix,
            rhs,
            info,
            rhs_kind: RhsKind::Uniform,
        });
    }

    let problem = config
        .problem
        .as_ref()
        .expect("either --problem or --matrix is present");
    match problem {
        ProblemArg::Ep3 => {
            let (matrix, rhs) = make_ep3();
            let info = MatrixInfo {
                name: "ep3".into(),
                kind: "ep3".into(),
                nrows: 3,
                ncols: 3,
                nnz: matrix.nnz(),
                density: matrix.density(),
                rank: None,
                transposed: false,
                pruned: None,
            };
            Ok(LoadedProblem {
                matrix,
                rhs,
                info,
                rhs_kind: RhsKind::Fixed,
            })
        }
        ProblemArg::Random(spec) => {
            let mut spec = spec.clone();
            spec.rng_seed = config.seed;
            let (matrix, rhs, _) = make_random_rect(&spec)?;
            let name = format!(
                "random:{}x{},density={},rankdef={}{}",
                spec.nrows,
                spec.ncols,
                spec.density,
                spec.rank_deficiency,
                if spec.consistent { ",consistent" } else { "" }
            );
            let info = MatrixInfo {
                name,
                kind: "random".into(),
                nrows: matrix.nrows(),
                ncols: matrix.ncols(),
                nnz: matrix.nnz(),
                density: matrix.density(),
                rank: None,
                transposed: false,
                pruned: None,
            };
            Ok(LoadedProblem {
                matrix,
                rhs,
                info,
                rhs_kind: if spec.consistent {
                    RhsKind::Consistent
                } else {
                    RhsKind::Uniform
                },
            })
        }
        ProblemArg::Nullsym { order, nullity } => {
            let dense = make_nullsym_square(*order, *nullity, config.seed)?;
            let matrix = SparseMatrix::from_dense(&dense);
            let mut rng = rng_for(config.seed, 1);
            let rhs = uniform_vec(&mut rng, matrix.nrows());
            let info = MatrixInfo {
                name: format!("nullsym:{order},nullity={nullity}"),
                kind: "nullsym".into(),
                nrows: *order,
                ncols: *order,
                nnz: matrix.nnz(),
                density: matrix.density(),
                rank: None,
                transposed: false,
                pruned: None,
            };
            Ok(LoadedProblem {
                matrix,
                rhs,
                info,
                rhs_kind: RhsKind::Uniform,
            })
        }
    }
}

/// Seed for repeat `k`: the base seed itself for `k = 0`, then a
/// golden-ratio sequence.
fn derived_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn rhs_for_repeat(problem: &LoadedProblem, seed: u64) -> Vec<f64> {
    match problem.rhs_kind {
        RhsKind::Fixed => problem.rhs.clone(),
        RhsKind::Uniform => {
            let mut rng = rng_for(seed, 1);
            uniform_vec(&mut rng, problem.matrix.nrows())
        }
        RhsKind::Consistent => {
            let mut rng = rng_for(seed, 2);
            let x_true = uniform_vec(&mut rng, problem.matrix.ncols());
            problem
                .matrix
                .spmv(&x_true)
                .expect("dimensions agree by construction")
        }
    }
}

fn solver_options(config: &RunConfig, spec: &SolverSpec) -> SolverOptions {
    SolverOptions {
        method: spec.method,
        subsolve: match spec.strategy {
            Strategy::Fixed(kind) => kind,
            Strategy::Switching => krylov_stab_core::krylov::SubsolveKind::Plain,
        },
        mu: config.mu,
        lambda: config.lambda,
        switch_factor: config.switch_factor,
        max_iter: config.max_iter,
        target_relres: config.target_relres,
        eval_cadence: config.trace_cadence,
        rng_seed: config.seed,
        reorthogonalize: false,
        cond_every: config.cond_every,
        theorem4_c: 1.0,
    }
}

fn format_csv_record(rec: &TraceRecord) -> String {
    let cond = rec
        .cond_r
        .map(|c| format!("{c:.16e}"))
        .unwrap_or_default();
    let theorem4 = rec
        .theorem4_ok
        .map(|ok| ok.to_string())
        .unwrap_or_default();
    format!(
        "{},{:.16e},{:.16e},{:.16e},{},{},{}\n",
        rec.iter, rec.atr, rec.rnorm, rec.rho, cond, rec.switched, theorem4
    )
}

fn dispatch(
    spec: &SolverSpec,
    matrix: &SparseMatrix,
    rhs: &[f64],
    opts: &SolverOptions,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<SolverResult, SolverError> {
    match (spec.method, spec.strategy) {
        (SolverMethod::Lsqr, _) => run_lsqr_with_observer(matrix, rhs, opts, observer),
        (SolverMethod::Lsmr, _) => run_lsmr_with_observer(matrix, rhs, opts, observer),
        (_, Strategy::Switching) => {
            run_stabilized_switching_with_observer(matrix, rhs, opts, observer)
        }
        (_, Strategy::Fixed(_)) => run_gmres_with_observer(matrix, rhs, opts, observer),
    }
}

fn status_name(status: SolverStatus) -> &'static str {
    match status {
        SolverStatus::Converged => "converged",
        SolverStatus::MaxIter => "max-iter",
        SolverStatus::BreakdownHappy => "breakdown-happy",
        SolverStatus::BreakdownHard => "breakdown-hard",
        SolverStatus::Stagnated => "stagnated",
    }
}

/// Runs one solver through all repeats, streaming the first repeat's trace
/// to `trace_path` (flushed per record, so a killed run leaves a valid
/// prefix).
fn run_solver(
    config: &RunConfig,
    problem: &LoadedProblem,
    spec: &SolverSpec,
    trace_path: &Path,
) -> Result<SolverSummary> {
    let opts = solver_options(config, spec);
    let mut first_result: Option<SolverResult> = None;
    let mut total_seconds = 0.0;
    for repeat in 0..config.repeats.max(1) {
        let seed = derived_seed(config.seed, repeat);
        let rhs = rhs_for_repeat(problem, seed);
        let start = Instant::now();
        let result = if repeat == 0 {
            let file = File::create(trace_path)
                .with_context(|| format!("creating {}", trace_path.display()))?;
            let mut writer = BufWriter::new(file);
            writer.write_all(b"iter,atr,rnorm,rho,cond_R,switched,theorem4_ok\n")?;
            writer.flush()?;
            let mut observer = |rec: &TraceRecord| {
                let _ = writer.write_all(format_csv_record(rec).as_bytes());
                let _ = writer.flush();
            };
            dispatch(spec, &problem.matrix, &rhs, &opts, &mut observer)?
        } else {
            dispatch(spec, &problem.matrix, &rhs, &opts, &mut |_| {})?
        };
        total_seconds += start.elapsed().as_secs_f64();
        if repeat == 0 {
            first_result = Some(result);
        }
    }
    let result = first_result.expect("at least one repeat ran");
    Ok(SolverSummary {
        name: spec.name.clone(),
        status: status_name(result.status).into(),
        iter_best: Some(result.iter_best),
        atr_best: Some(result.atr_best),
        wall_seconds: total_seconds / config.repeats.max(1) as f64,
        switched_at: result.switched_at,
        trace: Some(
            trace_path
                .file_name()
                .map(|n| n.to_string_lossy().to_string())
                .unwrap_or_default(),
        ),
        error: None,
    })
}

fn numerical_rank(matrix: &SparseMatrix) -> Option<usize> {
    let dense = matrix.to_dense();
    let oriented = if dense.nrows() >= dense.ncols() {
        dense
    } else {
        dense.transpose()
    };
    match jacobi_svd(&oriented) {
        Ok(svd) => Some(svd.rank(1e-10)),
        Err(_) => None,
    }
}

/// Executes the full run; returns the summary and the list of failed
/// solver names (failures are isolated, the other solvers still run).
pub fn execute(config: &RunConfig) -> Result<(RunSummary, Vec<String>)> {
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let mut problem = load_problem(config)?;
    if config.compute_rank {
        problem.info.rank = numerical_rank(&problem.matrix);
    }

    let jobs: Vec<(usize, &SolverSpec, PathBuf)> = config
        .solvers
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let path = config.out_dir.join(format!("trace-{}.csv", spec.slug()));
            (i, spec, path)
        })
        .collect();

    let mut outcomes: Vec<Option<Result<SolverSummary>>> =
        (0..jobs.len()).map(|_| None).collect();
    if config.parallel {
        let problem_ref = &problem;
        let results: Vec<(usize, Result<SolverSummary>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(i, spec, path)| {
                    let (i, spec, path) = (*i, *spec, path.clone());
                    scope.spawn(move || (i, run_solver(config, problem_ref, spec, &path)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (i, res) in results {
            outcomes[i] = Some(res);
        }
    } else {
        for (i, spec, path) in &jobs {
            outcomes[*i] = Some(run_solver(config, &problem, spec, path));
        }
    }

    let mut failed = Vec::new();
    let mut solvers = Vec::with_capacity(jobs.len());
    for (outcome, spec) in outcomes.into_iter().zip(&config.solvers) {
        match outcome.expect("every job ran") {
            Ok(summary) => solvers.push(summary),
            Err(e) => {
                failed.push(spec.name.clone());
                solvers.push(SolverSummary {
                    name: spec.name.clone(),
                    status: "error".into(),
                    iter_best: None,
                    atr_best: None,
                    wall_seconds: 0.0,
                    switched_at: None,
                    trace: None,
                    error: Some(format!("{e:#}")),
                });
            }
        }
    }

    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        matrix: problem.info.clone(),
        seed: config.seed,
        repeats: config.repeats.max(1),
        precision: "f64".into(),
        solvers,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    std::fs::write(config.out_dir.join("summary.json"), json)?;
    Ok((summary, failed))
}
