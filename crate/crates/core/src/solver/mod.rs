//! Active-set solver for a single penalty level.
//!
//! Each round solves the problem restricted to the active set with proximal
//! gradient descent, then takes one proximal gradient step over all variables.
//! Interaction gradients for that step are only evaluated on pairs that gradient
//! screening cannot rule out. Variables that become nonzero join the active set;
//! the fit stops when none do.

mod active;
mod restricted;
mod screening;

use std::collections::BTreeMap;

pub use active::ActiveSet;
pub use restricted::{pgd_restricted, RestrictedFit, RestrictedOptions};
pub use screening::{critical_set, CriticalSet, GradientSnapshot};

use crate::coef::{Coefficients, PenaltyConfig, SUPPORT_EPS};
use crate::data::{DesignData, Pair};
use crate::error::{Error, Result};
use crate::gradient::{intercept_for, main_gradient, pair_gradients, predict, residual};
use crate::prox::{prox_with_cache, DualCache, ProxInput, ProxOptions, ProxStats};
use crate::step::{estimate_step, StepMode};

/// Largest `p` for which the interaction norm bound is computed exactly.
pub const EXACT_BOUND_MAX_P: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Tolerance of each restricted solve.
    pub tol: f64,
    pub max_rounds: usize,
    pub max_inner_iter: usize,
    pub step_mode: StepMode,
    pub prox: ProxOptions,
    /// Refresh the gradient snapshot when the screened superset exceeds this many pairs.
    pub snapshot_refresh: usize,
    /// Byte budget for stored snapshot magnitudes; above it every screen scans all pairs.
    pub snapshot_memory: usize,
    /// Size of the marginal-correlation active set used when there is no warm support.
    pub initial_mains: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_rounds: 200,
            max_inner_iter: 20_000,
            step_mode: StepMode::Backtracking,
            prox: ProxOptions::default(),
            snapshot_refresh: 100_000,
            snapshot_memory: 1 << 30,
            initial_mains: 100,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_rounds == 0 || self.max_inner_iter == 0 {
            return Err(Error::invalid("iteration limits must be at least 1"));
        }
        Ok(())
    }
}

/// Output of one full proximal gradient step taken from a restricted solution.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterStep {
    pub proposal: Coefficients,
    pub critical: CriticalSet,
    /// Gradient over every main effect.
    pub main_gradient: Vec<f64>,
    /// Gradients over the active pairs and the critical pairs.
    pub pair_gradients: BTreeMap<Pair, f64>,
    pub prox: ProxStats,
    /// Nonzeros of the proposal outside the active set.
    pub new_mains: Vec<usize>,
    pub new_pairs: Vec<Pair>,
}

/// One proximal gradient step over all variables from `coef`.
///
/// Interactions outside the active pairs and the critical set have
/// `|gradient| <= lambda2`, so the feature rule zeroes them and they are left
/// out of the prox input.
#[allow(clippy::too_many_arguments)]
pub fn master_iteration(
    data: &DesignData,
    pen: &PenaltyConfig,
    coef: &Coefficients,
    active: &ActiveSet,
    snapshot: &GradientSnapshot,
    lipschitz: f64,
    prox_opts: &ProxOptions,
    cache: Option<&mut DualCache>,
) -> Result<MasterStep> {
    coef.validate(data.p())?;
    let prediction = predict(data, coef);
    let r = residual(data, &prediction);
    let critical = critical_set(data, &prediction, active.pairs(), pen.lambda2, snapshot);
    let main_grad = main_gradient(data, &r);

    let active_pairs: Vec<Pair> = active.pairs().iter().copied().collect();
    let mut grads: BTreeMap<Pair, f64> = active_pairs
        .iter()
        .copied()
        .zip(pair_gradients(data, &r, &active_pairs))
        .collect();
    grads.extend(critical.critical.iter().copied().zip(critical.critical_gradients.iter().copied()));

    let input = ProxInput {
        beta_tilde: coef.beta.iter().zip(&main_grad).map(|(b, g)| b - g / lipschitz).collect(),
        theta_tilde: grads.iter().map(|(pr, g)| (*pr, coef.theta(*pr) - g / lipschitz)).collect(),
        lipschitz,
        pen: *pen,
    };
    let out = prox_with_cache(&input, prox_opts, cache)?;
    let support = out.coef.support(SUPPORT_EPS);
    let new_mains = support.mains.iter().copied().filter(|i| !active.contains_main(*i)).collect();
    let new_pairs = support.pairs.iter().copied().filter(|pr| !active.contains_pair(pr)).collect();
    Ok(MasterStep {
        proposal: out.coef,
        critical,
        main_gradient: main_grad,
        pair_gradients: grads,
        prox: out.stats,
        new_mains,
        new_pairs,
    })
}

/// What the solver saw in one round, passed to the observer.
#[derive(Debug)]
pub struct RoundReport<'r> {
    pub round: usize,
    pub active: &'r ActiveSet,
    /// Restricted solution the full step was taken from.
    pub coef: &'r Coefficients,
    pub restricted_objective: f64,
    pub step: &'r MasterStep,
    pub lipschitz: f64,
}

impl RoundReport<'_> {
    pub fn active_mains(&self) -> usize {
        self.active.mains().len()
    }

    pub fn active_pairs(&self) -> usize {
        self.active.pairs().len()
    }

    pub fn superset_len(&self) -> usize {
        self.step.critical.superset_len
    }

    pub fn critical_len(&self) -> usize {
        self.step.critical.critical.len()
    }

    pub fn components(&self) -> usize {
        self.step.prox.components
    }

    pub fn max_component_edges(&self) -> usize {
        self.step.prox.max_component_edges
    }
}

pub type Observer<'a> = Box<dyn FnMut(&RoundReport<'_>) + Send + 'a>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitDiagnostics {
    pub rounds: usize,
    pub converged: bool,
    pub objective: f64,
    pub active_mains: usize,
    pub active_pairs: usize,
    pub pgd_iterations: usize,
    pub max_component_vertices: usize,
    pub max_component_edges: usize,
    pub max_prox_gap: f64,
    pub snapshot_refreshes: usize,
    pub degenerate_screens: usize,
    pub lipschitz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub coef: Coefficients,
    pub diagnostics: FitDiagnostics,
}

/// Active-set solver bound to one data set. Keeps the gradient snapshot, step
/// constant and dual warm starts between fits so that path fits reuse them.
pub struct Solver<'a> {
    data: &'a DesignData,
    opts: SolverOptions,
    interaction_bound: f64,
    lipschitz: f64,
    snapshot: Option<GradientSnapshot>,
    restricted_cache: DualCache,
    master_cache: DualCache,
    observer: Option<Observer<'a>>,
}

impl<'a> Solver<'a> {
    pub fn new(data: &'a DesignData, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let interaction_bound = if data.p() <= EXACT_BOUND_MAX_P {
            data.max_interaction_norm()
        } else {
            data.interaction_norm_bound()
        };
        let est = estimate_step(data, opts.step_mode, 200)?;
        let mut lipschitz = est.lipschitz;
        if opts.step_mode == StepMode::Exact {
            // power iteration approaches the top eigenvalue from below
            lipschitz *= 1.0 + 1e-9;
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            lipschitz = 1.0;
        }
        Ok(Solver {
            data,
            opts,
            interaction_bound,
            lipschitz,
            snapshot: None,
            restricted_cache: DualCache::new(),
            master_cache: DualCache::new(),
            observer: None,
        })
    }

    pub fn with_observer(mut self, observer: Observer<'a>) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn interaction_bound(&self) -> f64 {
        self.interaction_bound
    }

    pub fn snapshot(&self) -> Option<&GradientSnapshot> {
        self.snapshot.as_ref()
    }

    /// Drops the snapshot and dual warm starts.
    pub fn reset(&mut self) {
        self.snapshot = None;
        self.restricted_cache.clear();
        self.master_cache.clear();
    }

    fn take_snapshot(&mut self, prediction: Vec<f64>) {
        self.snapshot = Some(GradientSnapshot::capture(
            self.data,
            prediction,
            self.interaction_bound,
            self.opts.snapshot_memory,
        ));
    }

    /// Fits one penalty level. The support of `warm` seeds the active set; with
    /// no warm support the marginal-correlation set is used.
    pub fn fit(&mut self, pen: &PenaltyConfig, warm: Option<&Coefficients>) -> Result<Fit> {
        let data = self.data;
        let p = data.p();
        let start = match warm {
            Some(w) => {
                w.validate(p)?;
                w.clone()
            }
            None => Coefficients::zeros(p),
        };
        let support = start.support(SUPPORT_EPS);
        let mut active = if support.is_empty() {
            ActiveSet::marginal(data, self.opts.initial_mains.min(p))
        } else {
            ActiveSet::from_support(&support)
        };
        let mut x = active.restrict(&start);
        if self.snapshot.is_none() {
            self.take_snapshot(predict(data, &x));
        }
        let ropts = RestrictedOptions {
            tol: self.opts.tol,
            max_iter: self.opts.max_inner_iter,
            step_mode: self.opts.step_mode,
            prox: self.opts.prox,
        };
        let mut diag = FitDiagnostics::default();

        let mut round = 0;
        let last = loop {
            round += 1;
            let rfit = pgd_restricted(data, pen, &active, &x, self.lipschitz, &ropts, Some(&mut self.restricted_cache))?;
            self.lipschitz = rfit.lipschitz;
            diag.rounds = round;
            diag.pgd_iterations += rfit.iterations;

            let snapshot = self.snapshot.as_ref().expect("snapshot taken above");
            let mut step = master_iteration(
                data,
                pen,
                &rfit.coef,
                &active,
                snapshot,
                self.lipschitz,
                &self.opts.prox,
                Some(&mut self.master_cache),
            )?;
            diag.max_component_vertices = diag.max_component_vertices.max(step.prox.max_component_vertices);
            diag.max_component_edges = diag.max_component_edges.max(step.prox.max_component_edges);
            diag.max_prox_gap = diag.max_prox_gap.max(step.prox.max_gap).max(rfit.prox.max_gap);
            if let Some(obs) = self.observer.as_mut() {
                obs(&RoundReport {
                    round,
                    active: &active,
                    coef: &rfit.coef,
                    restricted_objective: rfit.objective,
                    step: &step,
                    lipschitz: self.lipschitz,
                });
            }

            if step.critical.degenerate {
                diag.degenerate_screens += 1;
            }
            if let Some(dense) = step.critical.dense_gradients.take() {
                self.snapshot = Some(GradientSnapshot::from_gradients(
                    data,
                    rfit.prediction.clone(),
                    dense,
                    self.interaction_bound,
                    self.opts.snapshot_memory,
                ));
                diag.snapshot_refreshes += 1;
            } else if step.critical.superset_len > self.opts.snapshot_refresh && snapshot.is_stored() {
                self.take_snapshot(rfit.prediction.clone());
                diag.snapshot_refreshes += 1;
            }

            if step.new_mains.is_empty() && step.new_pairs.is_empty() {
                diag.converged = rfit.converged;
                break rfit;
            }
            if round >= self.opts.max_rounds {
                log::warn!(
                    "active-set solver stopped after {round} rounds with {} new variables pending",
                    step.new_mains.len() + step.new_pairs.len()
                );
                break rfit;
            }
            active.extend(step.new_mains.iter().copied(), step.new_pairs.iter().copied());
            // continue from whichever of the proposal and the restricted solution is better
            let proposal_obj = restricted::half_sq(&residual(data, &predict(data, &step.proposal)))
                + pen.value(&step.proposal);
            x = if proposal_obj <= rfit.objective {
                active.restrict(&step.proposal)
            } else {
                rfit.coef
            };
        };

        let mut coef = last.coef;
        coef.intercept = intercept_for(data, &last.prediction);
        diag.objective = last.objective;
        diag.active_mains = active.mains().len();
        diag.active_pairs = active.pairs().len();
        diag.lipschitz = self.lipschitz;
        Ok(Fit { coef, diagnostics: diag })
    }
}

/// Fits a single penalty level with a fresh [`Solver`].
pub fn fit_single(
    data: &DesignData,
    pen: &PenaltyConfig,
    warm: Option<&Coefficients>,
    opts: SolverOptions,
) -> Result<Fit> {
    Solver::new(data, opts)?.fit(pen, warm)
}
