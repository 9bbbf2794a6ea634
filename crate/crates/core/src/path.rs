//! Regularization path: `lambda_max`, a geometric grid and warm-started fits.

use std::time::{Duration, Instant};

use crate::coef::{Coefficients, PenaltyConfig, SUPPORT_EPS};
use crate::data::DesignData;
use crate::error::{Error, Result};
use crate::gradient::{all_pair_gradients, main_gradient, residual};
use crate::solver::{FitDiagnostics, Solver, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathConfig {
    pub n_lambda: usize,
    /// Last `lambda1` as a fraction of `lambda_max`.
    pub lambda_min_ratio: f64,
    /// `lambda2 / lambda1`, held fixed along the path.
    pub lambda2_ratio: f64,
    pub tol: f64,
    /// Stop after the first entry whose support (mains plus pairs) exceeds this.
    pub max_support: Option<usize>,
    /// Solver settings; its `tol` is replaced by `tol` above.
    pub solver: SolverOptions,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            n_lambda: 100,
            lambda_min_ratio: 0.05,
            lambda2_ratio: 2.0,
            tol: 1e-6,
            max_support: None,
            solver: SolverOptions::default(),
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambda == 0 {
            return Err(Error::invalid("n_lambda must be at least 1"));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio <= 1.0) {
            return Err(Error::invalid(format!(
                "lambda_min_ratio must lie in (0, 1], got {}",
                self.lambda_min_ratio
            )));
        }
        if !(self.lambda2_ratio >= 0.0 && self.lambda2_ratio.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda2_ratio must be nonnegative, got {}",
                self.lambda2_ratio
            )));
        }
        self.solver_options().validate()
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            ..self.solver
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathEntry {
    pub lambda1: f64,
    pub lambda2: f64,
    pub coef: Coefficients,
    pub diagnostics: FitDiagnostics,
    pub main_support: usize,
    pub pair_support: usize,
    pub wall_time: Duration,
    /// Set when the warm-started fit failed; the entry then holds the cold-restart
    /// result, or zeros if that failed too.
    pub error: Option<String>,
}

impl PathEntry {
    pub fn support_len(&self) -> usize {
        self.main_support + self.pair_support
    }

    pub fn penalty(&self) -> PenaltyConfig {
        PenaltyConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitPath {
    pub lambda_max: f64,
    pub lambda2_ratio: f64,
    pub entries: Vec<PathEntry>,
    /// The path ended before its last grid point because of `max_support`.
    pub stopped_early: bool,
}

const BISECTION_STEPS: usize = 200;
/// Relative inflation of the bisection bracket, so that the zero iterate passes
/// the group rule after the `1/L` scaling inside the prox.
const LAMBDA_MAX_MARGIN: f64 = 1e-10;

/// Smallest `lambda1` (with `lambda2 = ratio * lambda1`) at which zero is a fixed
/// point of the proximal gradient map: for every `i`,
/// `sum_j [|X~_ij^T y| - ratio * lambda1]_+ <= lambda1 - |X_i^T y|`.
pub fn lambda_max(data: &DesignData, ratio: f64) -> Result<f64> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::invalid(format!("lambda2 ratio must be nonnegative, got {ratio}")));
    }
    let p = data.p();
    let r = residual(data, &vec![0.0; data.n()]);
    let mains: Vec<f64> = main_gradient(data, &r).iter().map(|g| g.abs()).collect();
    let pair_abs: Vec<f64> = all_pair_gradients(data, &r).iter().map(|g| g.abs()).collect();
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut k = 0;
    for i in 0..p {
        for j in i + 1..p {
            groups[i].push(pair_abs[k]);
            groups[j].push(pair_abs[k]);
            k += 1;
        }
    }
    let mut best = 0.0f64;
    for (a, g) in mains.iter().zip(&groups) {
        best = best.max(group_threshold(*a, g, ratio));
    }
    Ok(best * (1.0 + LAMBDA_MAX_MARGIN))
}

/// Smallest `lambda >= 0` with `sum_j [b_j - ratio * lambda]_+ <= lambda - a`,
/// by bisection (the left side is nonincreasing, the right side increasing).
fn group_threshold(a: f64, b: &[f64], ratio: f64) -> f64 {
    let holds = |lambda: f64| b.iter().map(|v| (v - ratio * lambda).max(0.0)).sum::<f64>() <= lambda - a;
    if holds(0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = a + b.iter().sum::<f64>();
    while !holds(hi) {
        hi *= 2.0;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `n` values from `lambda_max` down to `min_ratio * lambda_max`, equally spaced in log scale.
pub fn lambda_grid(lambda_max: f64, n: usize, min_ratio: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => (0..n)
            .map(|k| {
                if k == 0 {
                    lambda_max
                } else {
                    lambda_max * min_ratio.powf(k as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the current pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Fits the whole path, warm-starting each point from the previous solution.
pub fn fit_path(data: &DesignData, config: &PathConfig, threads: Option<usize>) -> Result<FitPath> {
    config.validate()?;
    with_threads(threads, || fit_path_inner(data, config))?
}

fn entry_from(lambda1: f64, lambda2: f64, coef: Coefficients, diagnostics: FitDiagnostics, started: Instant) -> PathEntry {
    let support = coef.support(SUPPORT_EPS);
    PathEntry {
        lambda1,
        lambda2,
        main_support: support.mains.len(),
        pair_support: support.pairs.len(),
        coef,
        diagnostics,
        wall_time: started.elapsed(),
        error: None,
    }
}

fn fit_path_inner(data: &DesignData, config: &PathConfig) -> Result<FitPath> {
    let lmax = lambda_max(data, config.lambda2_ratio)?;
    let grid = if lmax > 0.0 {
        lambda_grid(lmax, config.n_lambda, config.lambda_min_ratio)
    } else {
        vec![0.0]
    };
    let mut solver = Solver::new(data, config.solver_options())?;
    let mut entries = Vec::with_capacity(grid.len());
    let mut warm: Option<Coefficients> = None;
    let mut stopped_early = false;

    for (k, &lambda1) in grid.iter().enumerate() {
        let started = Instant::now();
        let lambda2 = config.lambda2_ratio * lambda1;
        let pen = PenaltyConfig::new(lambda1, lambda2)?;
        let entry = match solver.fit(&pen, warm.as_ref()) {
            Ok(fit) => entry_from(lambda1, lambda2, fit.coef, fit.diagnostics, started),
            Err(first) => {
                log::warn!("fit at lambda1 = {lambda1:e} failed ({first}); retrying from a cold start");
                solver.reset();
                let mut entry = match solver.fit(&pen, None) {
                    Ok(fit) => entry_from(lambda1, lambda2, fit.coef, fit.diagnostics, started),
                    Err(second) => {
                        log::warn!("cold restart at lambda1 = {lambda1:e} failed too ({second})");
                        solver.reset();
                        entry_from(lambda1, lambda2, Coefficients::zeros(data.p()), FitDiagnostics::default(), started)
                    }
                };
                entry.error = Some(first.to_string());
                entry
            }
        };
        log::info!(
            "lambda1 = {:.4e}: {} mains, {} pairs, {} rounds, {:.3}s",
            lambda1,
            entry.main_support,
            entry.pair_support,
            entry.diagnostics.rounds,
            entry.wall_time.as_secs_f64()
        );
        warm = entry.error.is_none().then(|| entry.coef.clone());
        let too_dense = config.max_support.is_some_and(|m| entry.support_len() > m);
        entries.push(entry);
        if too_dense && k + 1 < grid.len() {
            stopped_early = true;
            break;
        }
    }
    Ok(FitPath {
        lambda_max: lmax,
        lambda2_ratio: config.lambda2_ratio,
        entries,
        stopped_early,
    })
}
