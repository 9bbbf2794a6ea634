//! Selection and prediction metrics.

use crate::coef::{Coefficients, Support};
use crate::data::{DesignData, Pair};
use crate::error::Result;
use crate::gradient::predict;

/// Selected coefficients (mains and interactions together) absent from the
/// truth, divided by the number selected. Zero when nothing is selected.
pub fn fdr(selected: &Support, truth: &Support) -> f64 {
    let total = selected.len();
    if total == 0 {
        return 0.0;
    }
    let false_mains = selected.mains.difference(&truth.mains).count();
    let false_pairs = selected.pairs.difference(&truth.pairs).count();
    (false_mains + false_pairs) as f64 / total as f64
}

/// Falsely selected interactions divided by the number of selected coefficients
/// (mains and interactions). Zero when nothing is selected.
pub fn interaction_fdr(selected: &Support, truth: &Support) -> f64 {
    let total = selected.len();
    if total == 0 {
        return 0.0;
    }
    selected.pairs.difference(&truth.pairs).count() as f64 / total as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Mse,
    Rmse,
}

/// Mean squared (or root mean squared) error of `b0 + X beta + X~ theta`
/// against the response of `data` in its original units. The features are
/// used as stored in `data`, so they must be on the scale the model was fit on.
pub fn prediction_error(coef: &Coefficients, data: &DesignData, kind: ErrorKind) -> Result<f64> {
    coef.validate(data.p())?;
    let y = data.raw_response();
    let pred = predict(data, coef);
    let mse = y
        .iter()
        .zip(&pred)
        .map(|(y, f)| {
            let e = y - (coef.intercept + f);
            e * e
        })
        .sum::<f64>()
        / data.n() as f64;
    Ok(match kind {
        ErrorKind::Mse => mse,
        ErrorKind::Rmse => mse.sqrt(),
    })
}

/// Interactions above `threshold` whose main effects are not both above it.
pub fn audit_strong_hierarchy(coef: &Coefficients, threshold: f64) -> Vec<Pair> {
    coef.theta
        .iter()
        .filter(|(pr, v)| v.abs() > threshold && (coef.beta[pr.i].abs() <= threshold || coef.beta[pr.j].abs() <= threshold))
        .map(|(pr, _)| *pr)
        .collect()
}
