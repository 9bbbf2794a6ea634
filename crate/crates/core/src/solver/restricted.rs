//! Proximal gradient descent over a fixed active set.

use std::collections::BTreeMap;

use crate::coef::{Coefficients, PenaltyConfig};
use crate::data::{DesignData, Pair};
use crate::error::{Error, Result};
use crate::gradient::{dot, pair_gradients, predict, residual};
use crate::prox::{prox_with_cache, DualCache, ProxInput, ProxOptions, ProxStats};
use crate::step::StepMode;

use super::active::ActiveSet;

/// Stopping rule and step handling for [`pgd_restricted`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestrictedOptions {
    /// Stop once the relative objective change and the largest coordinate
    /// move (relative to `max(1, ||x||_inf)`) both fall to `tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub step_mode: StepMode,
    pub prox: ProxOptions,
}

impl Default for RestrictedOptions {
    fn default() -> Self {
        RestrictedOptions {
            tol: 1e-6,
            max_iter: 20_000,
            step_mode: StepMode::Backtracking,
            prox: ProxOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedFit {
    pub coef: Coefficients,
    pub objective: f64,
    pub prediction: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub lipschitz: f64,
    pub prox: ProxStats,
}

/// Allowed excess in the sufficient-decrease test, relative to the loss.
const DECREASE_SLACK: f64 = 1e-13;
const MAX_LIPSCHITZ: f64 = 1e300;

pub(crate) fn half_sq(r: &[f64]) -> f64 {
    0.5 * dot(r, r)
}

/// Proximal gradient descent restricted to `active`, starting from `init`.
///
/// `lipschitz` is the step constant to start from; in backtracking mode it is
/// doubled whenever the sufficient-decrease test fails and the final value is
/// returned in the result.
pub fn pgd_restricted(
    data: &DesignData,
    pen: &PenaltyConfig,
    active: &ActiveSet,
    init: &Coefficients,
    lipschitz: f64,
    opts: &RestrictedOptions,
    cache: Option<&mut DualCache>,
) -> Result<RestrictedFit> {
    init.validate(data.p())?;
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::invalid(format!("step constant must be positive, got {lipschitz}")));
    }
    let p = data.p();
    let mut x = active.restrict(init);
    x.intercept = 0.0;
    x.prune();
    let mut pred = predict(data, &x);
    let mut r = residual(data, &pred);
    let mut f = half_sq(&r);
    let mut obj = f + pen.value(&x);
    if active.is_empty() {
        return Ok(RestrictedFit {
            coef: x,
            objective: obj,
            prediction: pred,
            iterations: 0,
            converged: true,
            lipschitz,
            prox: ProxStats::default(),
        });
    }

    let mains: Vec<usize> = active.mains().iter().copied().collect();
    let pairs: Vec<Pair> = active.pairs().iter().copied().collect();
    let mut lip = lipschitz;
    let mut cache = cache;
    let mut last_stats = ProxStats::default();

    for it in 1..=opts.max_iter {
        let g_main: Vec<f64> = mains.iter().map(|&i| -dot(data.column(i), &r)).collect();
        let g_pair = pair_gradients(data, &r, &pairs);

        let (cand, cand_pred, cand_r, cand_f, stats) = loop {
            let mut beta_tilde = vec![0.0; p];
            for (&i, g) in mains.iter().zip(&g_main) {
                beta_tilde[i] = x.beta[i] - g / lip;
            }
            let theta_tilde: BTreeMap<Pair, f64> =
                pairs.iter().zip(&g_pair).map(|(pr, g)| (*pr, x.theta(*pr) - g / lip)).collect();
            let input = ProxInput {
                beta_tilde,
                theta_tilde,
                lipschitz: lip,
                pen: *pen,
            };
            let out = prox_with_cache(&input, &opts.prox, cache.as_deref_mut())?;
            let cand = out.coef;
            let cand_pred = predict(data, &cand);
            let cand_r = residual(data, &cand_pred);
            let cand_f = half_sq(&cand_r);
            if opts.step_mode == StepMode::Exact {
                break (cand, cand_pred, cand_r, cand_f, out.stats);
            }
            let mut lin = 0.0;
            let mut quad = 0.0;
            for (&i, g) in mains.iter().zip(&g_main) {
                let d = cand.beta[i] - x.beta[i];
                lin += g * d;
                quad += d * d;
            }
            for (pr, g) in pairs.iter().zip(&g_pair) {
                let d = cand.theta(*pr) - x.theta(*pr);
                lin += g * d;
                quad += d * d;
            }
            if cand_f <= f + lin + 0.5 * lip * quad + DECREASE_SLACK * f.abs() {
                break (cand, cand_pred, cand_r, cand_f, out.stats);
            }
            lip *= 2.0;
            if lip > MAX_LIPSCHITZ {
                return Err(Error::Numerical("step constant diverged during backtracking".into()));
            }
        };
        last_stats = stats;

        let cand_obj = cand_f + pen.value(&cand);
        let scale = mains
            .iter()
            .map(|&i| cand.beta[i].abs())
            .chain(cand.theta.values().map(|v| v.abs()))
            .fold(1.0f64, f64::max);
        let moved = mains
            .iter()
            .map(|&i| (cand.beta[i] - x.beta[i]).abs())
            .chain(pairs.iter().map(|pr| (cand.theta(*pr) - x.theta(*pr)).abs()))
            .fold(0.0f64, f64::max);
        let rel_change = (obj - cand_obj).abs() / cand_obj.abs().max(f64::MIN_POSITIVE);

        x = cand;
        pred = cand_pred;
        r = cand_r;
        f = cand_f;
        obj = cand_obj;
        if rel_change <= opts.tol && moved <= opts.tol * scale {
            return Ok(RestrictedFit {
                coef: x,
                objective: obj,
                prediction: pred,
                iterations: it,
                converged: true,
                lipschitz: lip,
                prox: last_stats,
            });
        }
    }
    log::warn!(
        "restricted solve stopped after {} iterations without reaching tol {:e}",
        opts.max_iter,
        opts.tol
    );
    Ok(RestrictedFit {
        coef: x,
        objective: obj,
        prediction: pred,
        iterations: opts.max_iter,
        converged: false,
        lipschitz: lip,
        prox: last_stats,
    })
}
