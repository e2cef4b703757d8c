//! LSQR and LSMR comparison baselines, both driven by Golub–Kahan
//! bidiagonalization, with the same best-relative-residual protocol and
//! trace format as the GMRES family.

use crate::krylov::{
    ConvergenceTrace, SolverError, SolverMethod, SolverOptions, SolverResult, SolverStatus,
    TraceRecord,
};
use crate::sparse::SparseMatrix;
use crate::vecops;

/// Evaluations without improvement of the best relative residual before a
/// run is declared stagnated.
const STAGNATION_WINDOW: usize = 500;

/// Golub–Kahan bidiagonalization state: `u` spans the left (m-dimensional)
/// side, `v` the right (n-dimensional) side, and `alpha`, `beta` are the
/// bidiagonal entries produced by the latest step.
#[derive(Debug, Clone)]
pub struct BidiagState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl BidiagState {
    /// Starts the recurrence: `β₁ u₁ = b`, `α₁ v₁ = Aᵀ u₁`.
    pub fn start(a: &SparseMatrix, b: &[f64]) -> Result<Self, SolverError> {
        let beta = vecops::norm2(b);
        if beta == 0.0 {
            return Err(SolverError::InvalidInput("right-hand side is zero".into()));
        }
        let mut u = b.to_vec();
        vecops::scale(1.0 / beta, &mut u);
        let mut v = a.spmv_t(&u)?;
        let alpha = vecops::norm2(&v);
        if alpha > 0.0 {
            vecops::scale(1.0 / alpha, &mut v);
        }
        Ok(Self { u, v, alpha, beta })
    }

    /// Advances one step: `βₖ₊₁ uₖ₊₁ = A vₖ − αₖ uₖ`, then
    /// `αₖ₊₁ vₖ₊₁ = Aᵀ uₖ₊₁ − βₖ₊₁ vₖ`. A zero norm leaves the
    /// corresponding vector zeroed and reports the exact termination to the
    /// caller through the returned scalars.
    pub fn step(&mut self, a: &SparseMatrix) -> Result<(f64, f64), SolverError> {
        let av = a.spmv(&self.v)?;
        for (ui, avi) in self.u.iter_mut().zip(&av) {
            *ui = avi - self.alpha * *ui;
        }
        let beta = vecops::norm2(&self.u);
        if beta > 0.0 {
            vecops::scale(1.0 / beta, &mut self.u);
        }
        let atu = a.spmv_t(&self.u)?;
        for (vi, atui) in self.v.iter_mut().zip(&atu) {
            *vi = atui - beta * *vi;
        }
        let alpha = vecops::norm2(&self.v);
        if alpha > 0.0 {
            vecops::scale(1.0 / alpha, &mut self.v);
        }
        self.alpha = alpha;
        self.beta = beta;
        Ok((alpha, beta))
    }
}

struct BaselineRun<'a> {
    a: &'a SparseMatrix,
    b: &'a [f64],
    atr0: f64,
    target: f64,
    eval_cadence: usize,
    max_iter: usize,
    trace: ConvergenceTrace,
    best: Option<(usize, f64, Vec<f64>)>,
    since_improvement: usize,
    status: SolverStatus,
}

impl<'a> BaselineRun<'a> {
    /// Evaluates the explicit residual of `x`; returns true when the run
    /// should stop (target met or stagnated).
    fn observe(
        &mut self,
        iter: usize,
        x: &[f64],
        rho_estimate: f64,
        observer: &mut dyn FnMut(&TraceRecord),
    ) -> Result<bool, SolverError> {
        let residual = vecops::sub(self.b, &self.a.spmv(x)?);
        let atr = vecops::norm2(&self.a.spmv_t(&residual)?) / self.atr0;
        let rec = TraceRecord {
            iter,
            atr,
            rnorm: vecops::norm2(&residual),
            rho: rho_estimate,
            cond_r: None,
            switched: false,
            theorem4_ok: None,
        };
        observer(&rec);
        self.trace.push(rec);
        if self.best.as_ref().map_or(true, |(_, a, _)| atr < *a) {
            self.best = Some((iter, atr, x.to_vec()));
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
            if self.since_improvement >= STAGNATION_WINDOW {
                self.status = SolverStatus::Stagnated;
                return Ok(true);
            }
        }
        if atr < self.target {
            self.status = SolverStatus::Converged;
            return Ok(true);
        }
        Ok(false)
    }

    fn finish(self, ncols: usize, seed: u64) -> SolverResult {
        let (iter_best, atr_best, x_best) = match self.best {
            Some(b) => b,
            None => (0, 1.0, vec![0.0; ncols]),
        };
        SolverResult {
            x_best,
            iter_best,
            atr_best,
            status: self.status,
            trace: self.trace,
            switched_at: None,
            seed,
        }
    }
}

fn prepare<'a>(
    a: &'a SparseMatrix,
    b: &'a [f64],
    opts: &SolverOptions,
    expect: SolverMethod,
) -> Result<Result<BaselineRun<'a>, SolverResult>, SolverError> {
    opts.validate()?;
    if opts.method != expect {
        return Err(SolverError::InvalidOptions(format!(
            "options select {:?}, but this entry point runs {:?}",
            opts.method, expect
        )));
    }
    if a.nnz() == 0 {
        return Err(SolverError::InvalidInput("matrix has no nonzeros".into()));
    }
    if b.len() != a.nrows() {
        return Err(SolverError::InvalidInput(format!(
            "rhs length {} does not match {} rows",
            b.len(),
            a.nrows()
        )));
    }
    if !vecops::all_finite(b) {
        return Err(SolverError::InvalidInput(
            "right-hand side has non-finite entries".into(),
        ));
    }
    if vecops::norm2(b) == 0.0 {
        return Err(SolverError::InvalidInput("right-hand side is zero".into()));
    }
    let atr0 = vecops::norm2(&a.spmv_t(b)?);
    if atr0 == 0.0 {
        return Ok(Err(SolverResult {
            x_best: vec![0.0; a.ncols()],
            iter_best: 0,
            atr_best: 0.0,
            status: SolverStatus::Converged,
            trace: ConvergenceTrace::default(),
            switched_at: None,
            seed: opts.rng_seed,
        }));
    }
    let max_iter = opts.max_iter.unwrap_or(20 * a.ncols()).max(1);
    Ok(Ok(BaselineRun {
        a,
        b,
        atr0,
        target: opts.target_relres,
        eval_cadence: opts.eval_cadence,
        max_iter,
        trace: ConvergenceTrace::default(),
        best: None,
        since_improvement: 0,
        status: SolverStatus::MaxIter,
    }))
}

/// LSQR without damping or preconditioning.
pub fn run_lsqr(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    run_lsqr_with_observer(a, b, opts, &mut |_| {})
}

/// As [`run_lsqr`] with a per-record trace observer.
pub fn run_lsqr_with_observer(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<SolverResult, SolverError> {
    let mut run = match prepare(a, b, opts, SolverMethod::Lsqr)? {
        Ok(run) => run,
        Err(done) => return Ok(done),
    };
    let mut bidiag = BidiagState::start(a, b)?;
    let mut x = vec![0.0; a.ncols()];
    let mut w = bidiag.v.clone();
    let mut phibar = bidiag.beta;
    let mut rhobar = bidiag.alpha;

    for iter in 1..=run.max_iter {
        let (alpha, beta) = bidiag.step(a)?;
        let exact_end = alpha == 0.0 || beta == 0.0;

        let rho = (rhobar * rhobar + beta * beta).sqrt();
        if rho == 0.0 {
            run.status = SolverStatus::BreakdownHard;
            break;
        }
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;

        vecops::axpy(phi / rho, &w, &mut x);
        let scale_w = theta / rho;
        for (wi, vi) in w.iter_mut().zip(&bidiag.v) {
            *wi = vi - scale_w * *wi;
        }

        if iter % run.eval_cadence == 0 || iter == run.max_iter || exact_end {
            if run.observe(iter, &x, phibar.abs(), observer)? {
                break;
            }
        }
        if exact_end {
            if run.status == SolverStatus::MaxIter {
                run.status = SolverStatus::BreakdownHard;
            }
            break;
        }
    }
    Ok(run.finish(a.ncols(), opts.rng_seed))
}

/// LSMR without damping or preconditioning.
pub fn run_lsmr(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    run_lsmr_with_observer(a, b, opts, &mut |_| {})
}

/// As [`run_lsmr`] with a per-record trace observer.
pub fn run_lsmr_with_observer(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
    observer: &mut dyn FnMut(&TraceRecord),
) -> Result<SolverResult, SolverError> {
    let mut run = match prepare(a, b, opts, SolverMethod::Lsmr)? {
        Ok(run) => run,
        Err(done) => return Ok(done),
    };
    let mut bidiag = BidiagState::start(a, b)?;
    let mut x = vec![0.0; a.ncols()];
    let mut h = bidiag.v.clone();
    let mut hbar = vec![0.0; a.ncols()];
    let mut alphabar = bidiag.alpha;
    let mut zetabar = bidiag.alpha * bidiag.beta;
    let mut rho_prev = 1.0;
    let mut rhobar_prev = 1.0;
    let mut cbar = 1.0;
    let mut sbar = 0.0;

    for iter in 1..=run.max_iter {
        let (alpha, beta) = bidiag.step(a)?;
        let exact_end = alpha == 0.0 || beta == 0.0;

        let rho = (alphabar * alphabar + beta * beta).sqrt();
        if rho == 0.0 {
            run.status = SolverStatus::BreakdownHard;
            break;
        }
        let c = alphabar / rho;
        let s = beta / rho;
        let theta_next = s * alpha;
        alphabar = c * alpha;

        let thetabar = sbar * rho;
        let rhobar = ((cbar * rho) * (cbar * rho) + theta_next * theta_next).sqrt();
        if rhobar == 0.0 {
            run.status = SolverStatus::BreakdownHard;
            break;
        }
        cbar = cbar * rho / rhobar;
        sbar = theta_next / rhobar;
        let zeta = cbar * zetabar;
        zetabar = -sbar * zetabar;

        let scale_hbar = thetabar * rho / (rho_prev * rhobar_prev);
        for (hb, hi) in hbar.iter_mut().zip(&h) {
            *hb = hi - scale_hbar * *hb;
        }
        vecops::axpy(zeta / (rho * rhobar), &hbar, &mut x);
        let scale_h = theta_next / rho;
        for (hi, vi) in h.iter_mut().zip(&bidiag.v) {
            *hi = vi - scale_h * *hi;
        }
        rho_prev = rho;
        rhobar_prev = rhobar;

        if iter % run.eval_cadence == 0 || iter == run.max_iter || exact_end {
            if run.observe(iter, &x, zetabar.abs(), observer)? {
                break;
            }
        }
        if exact_end {
            if run.status == SolverStatus::MaxIter {
                run.status = SolverStatus::BreakdownHard;
            }
            break;
        }
    }
    Ok(run.finish(a.ncols(), opts.rng_seed))
}
