//! Benchmark harness for the krylov-stab solvers.
//!
//! `krylov-stab run` loads or generates a least squares problem, runs one or
//! more solvers under the minimum-relative-residual protocol, and writes one
//! CSV convergence trace per solver plus a JSON summary. `krylov-stab
//! compare` merges summaries into a markdown table.

mod runner;
mod spec;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use runner::RunConfig;
use spec::{ProblemArg, SolverSpec};
use summary::{render_comparison, RunSummary};

#[derive(Parser)]
#[command(name = "krylov-stab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run solvers on a problem and write traces plus a summary.
    Run(RunArgs),
    /// Render one or more summary files as a markdown comparison table.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in problem: `ep3`, `random:<m>x<n>[,density=..][,rankdef=..][,consistent]`,
    /// or `nullsym:<order>[,nullity=..]`.
    #[arg(long, conflicts_with = "matrix")]
    problem: Option<String>,

    /// Matrix Market file to load instead of a generated problem.
    #[arg(long)]
    matrix: Option<PathBuf>,

    /// Transpose the matrix after reading (file problems only).
    #[arg(long, requires = "matrix")]
    transpose: bool,

    /// Keep zero rows/columns instead of pruning them (file problems only).
    #[arg(long, requires = "matrix")]
    no_prune: bool,

    /// Solver spec `<method>[:<subsolve>]`, repeatable. Methods: ab-gmres,
    /// ba-gmres, rr-ab-gmres, gmres, lsqr, lsmr. Subsolves: plain,
    /// stabilized, switching, tsvd, tikhonov-normal, tikhonov-augmented.
    #[arg(long = "solver", required = true, num_args = 1..)]
    solvers: Vec<String>,

    /// Seed for every random stream (overridden by KRYLOV_STAB_SEED).
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Iteration budget (default: m for GMRES methods, 20n for LSQR/LSMR).
    #[arg(long)]
    max_iter: Option<usize>,

    /// TSVD truncation threshold relative to the largest singular value.
    #[arg(long, default_value_t = 1e-8)]
    mu: f64,

    /// Tikhonov regularization parameter.
    #[arg(long, default_value_t = 1e-16)]
    lambda: f64,

    /// Relative-residual jump factor for the switching strategy.
    #[arg(long, default_value_t = 10.0)]
    switch_factor: f64,

    /// Stop once the relative residual drops below this value.
    #[arg(long, default_value_t = 1e-8)]
    target_relres: f64,

    /// Evaluate the explicit residual every this many iterations.
    #[arg(long, default_value_t = 1)]
    trace_cadence: usize,

    /// Record the condition number of the triangular factor every this many
    /// iterations (0 = never; each checkpoint costs a dense SVD).
    #[arg(long, default_value_t = 0)]
    cond_every: usize,

    /// Output directory for traces and the summary.
    #[arg(long)]
    out: PathBuf,

    /// Rerun each solver this many times with derived seeds; the reported
    /// wall time is the mean, convergence data comes from the first run.
    #[arg(long, default_value_t = 1)]
    repeats: usize,

    /// Run the solvers on parallel threads over the shared matrix.
    #[arg(long)]
    parallel: bool,

    /// Record the numerical rank in the summary (dense SVD; desk scale).
    #[arg(long)]
    compute_rank: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Summary files produced by `run`.
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            let error = serde_json::json!({
                "schema_version": summary::SCHEMA_VERSION,
                "error": format!("{e:#}"),
            });
            println!("{error}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let problem = match (&args.problem, &args.matrix) {
        (Some(text), None) => Some(ProblemArg::parse(text)?),
        (None, Some(_)) => None,
        (None, None) => bail!("one of --problem or --matrix is required"),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    let solvers = args
        .solvers
        .iter()
        .map(|s| SolverSpec::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let seed = match std::env::var("KRYLOV_STAB_SEED") {
        Ok(text) => text
            .parse()
            .context("KRYLOV_STAB_SEED must be an unsigned 64-bit integer")?,
        Err(_) => args.seed,
    };
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }

    let config = RunConfig {
        problem,
        matrix_path: args.matrix,
        transpose: args.transpose,
        prune: !args.no_prune,
        solvers,
        seed,
        max_iter: args.max_iter,
        mu: args.mu,
        lambda: args.lambda,
        switch_factor: args.switch_factor,
        target_relres: args.target_relres,
        trace_cadence: args.trace_cadence,
        cond_every: args.cond_every,
        out_dir: args.out,
        repeats: args.repeats,
        parallel: args.parallel,
        compute_rank: args.compute_rank,
    };
    let (summary, failed) = runner::execute(&config)?;

    for solver in &summary.solvers {
        match (&solver.error, solver.atr_best, solver.iter_best) {
            (None, Some(atr), Some(iter)) => eprintln!(
                "{}: {} (best atr {:.3e} at iteration {}, {:.3}s)",
                solver.name, solver.status, atr, iter, solver.wall_seconds
            ),
            _ => eprintln!(
                "{}: failed ({})",
                solver.name,
                solver.error.as_deref().unwrap_or("unknown error")
            ),
        }
    }
    eprintln!(
        "summary written to {}",
        config.out_dir.join("summary.json").display()
    );

    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        let error = serde_json::json!({
            "schema_version": summary::SCHEMA_VERSION,
            "error": format!("{} solver(s) failed", failed.len()),
            "failed_solvers": failed,
        });
        println!("{error}");
        Ok(ExitCode::FAILURE)
    }
}

fn compare(args: CompareArgs) -> Result<ExitCode> {
    let summaries = args
        .summaries
        .iter()
        .map(|p| RunSummary::load(p))
        .collect::<Result<Vec<_>>>()?;
    print!("{}", render_comparison(&summaries));
    Ok(ExitCode::SUCCESS)
}
