//! Predictions and least-squares gradients with interaction columns generated on the fly.
//!
//! Every gradient entry is produced by one canonical expression so that the
//! full and restricted computations agree bit for bit:
//!
//! * `grad_beta_i   = -dot(X_i, r)`
//! * `grad_theta_ij = -dot(X_i * r, X_j)`
//!
//! where `r = y - X beta - X~ theta` (centered when an intercept is fit) and `dot`
//! accumulates in a fixed order.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::coef::Coefficients;
use crate::data::{pair_count, DesignData, Pair};
use crate::error::Result;

/// Work threshold (multiply-adds) below which loops stay sequential.
const PAR_WORK: usize = 1 << 16;

/// Dot product with four interleaved accumulators, combined in a fixed order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `X beta + sum_{i<j} X~_ij theta_ij`, without intercept.
pub fn predict(data: &DesignData, coef: &Coefficients) -> Vec<f64> {
    let mut out = vec![0.0; data.n()];
    for (i, &b) in coef.beta.iter().enumerate() {
        if b != 0.0 {
            for (o, x) in out.iter_mut().zip(data.column(i)) {
                *o += b * x;
            }
        }
    }
    for (pair, &t) in &coef.theta {
        if t != 0.0 {
            for ((o, a), b) in out.iter_mut().zip(data.column(pair.i)).zip(data.column(pair.j)) {
                *o += t * (a * b);
            }
        }
    }
    out
}

/// `y - prediction`, centered when the data fits an intercept.
pub fn residual(data: &DesignData, prediction: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = data.y().iter().zip(prediction).map(|(y, f)| y - f).collect();
    if data.fits_intercept() {
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        r.iter_mut().for_each(|v| *v -= mean);
    }
    r
}

/// Intercept minimizing the loss for fixed slopes, in original response units.
pub fn intercept_for(data: &DesignData, prediction: &[f64]) -> f64 {
    if !data.fits_intercept() {
        return 0.0;
    }
    let n = data.n() as f64;
    let mean_gap = data.y().iter().zip(prediction).map(|(y, f)| y - f).sum::<f64>() / n;
    data.response_offset() + mean_gap
}

/// Main-effect gradient over all `p` columns.
pub fn main_gradient(data: &DesignData, r: &[f64]) -> Vec<f64> {
    let p = data.p();
    if data.n() * p >= PAR_WORK {
        (0..p).into_par_iter().map(|i| -dot(data.column(i), r)).collect()
    } else {
        (0..p).map(|i| -dot(data.column(i), r)).collect()
    }
}

fn weighted_column(data: &DesignData, i: usize, r: &[f64]) -> Vec<f64> {
    data.column(i).iter().zip(r).map(|(x, r)| x * r).collect()
}

/// Interaction gradients for an arbitrary list of pairs, in input order.
pub fn pair_gradients(data: &DesignData, r: &[f64], pairs: &[Pair]) -> Vec<f64> {
    if pairs.is_empty() {
        return Vec::new();
    }
    // group positions by first index so each X_i * r is built once
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by_key(|&k| (pairs[k].i, pairs[k].j));
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for k in order {
        match groups.last_mut() {
            Some((i, ks)) if *i == pairs[k].i => ks.push(k),
            _ => groups.push((pairs[k].i, vec![k])),
        }
    }
    let eval = |(i, ks): &(usize, Vec<usize>)| -> Vec<(usize, f64)> {
        let xr = weighted_column(data, *i, r);
        ks.iter().map(|&k| (k, -dot(&xr, data.column(pairs[k].j)))).collect()
    };
    let parts: Vec<Vec<(usize, f64)>> = if data.n() * pairs.len() >= PAR_WORK {
        groups.par_iter().map(eval).collect()
    } else {
        groups.iter().map(eval).collect()
    };
    let mut out = vec![0.0; pairs.len()];
    for (k, g) in parts.into_iter().flatten() {
        out[k] = g;
    }
    out
}

/// Interaction gradients for every pair, laid out by [`Pair::linear_index`].
pub fn all_pair_gradients(data: &DesignData, r: &[f64]) -> Vec<f64> {
    let p = data.p();
    let mut out = vec![0.0; pair_count(p)];
    let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(p);
    let mut rest: &mut [f64] = &mut out;
    for i in 0..p {
        let (row, tail) = rest.split_at_mut(p - i - 1);
        rows.push((i, row));
        rest = tail;
    }
    let fill = |(i, row): &mut (usize, &mut [f64])| {
        let xr = weighted_column(data, *i, r);
        for (off, g) in row.iter_mut().enumerate() {
            *g = -dot(&xr, data.column(*i + 1 + off));
        }
    };
    if data.n() * pair_count(p) >= PAR_WORK {
        rows.par_iter_mut().for_each(fill);
    } else {
        rows.iter_mut().for_each(fill);
    }
    out
}

/// Streams every interaction gradient through `keep` without storing the full
/// vector; returns the kept `(pair, gradient)` entries in triangle order.
pub(crate) fn scan_pair_gradients<F>(data: &DesignData, r: &[f64], keep: F) -> Vec<(Pair, f64)>
where
    F: Fn(Pair, f64) -> bool + Sync,
{
    let p = data.p();
    let row = |i: usize| -> Vec<(Pair, f64)> {
        let xr = weighted_column(data, i, r);
        (i + 1..p)
            .filter_map(|j| {
                let g = -dot(&xr, data.column(j));
                let pair = Pair { i, j };
                keep(pair, g).then_some((pair, g))
            })
            .collect()
    };
    if data.n() * pair_count(p) >= PAR_WORK {
        (0..p).into_par_iter().map(row).collect::<Vec<_>>().concat()
    } else {
        (0..p).flat_map(row).collect()
    }
}

/// Gradient over all main effects and all interactions.
#[derive(Clone, Debug, PartialEq)]
pub struct FullGradient {
    pub beta: Vec<f64>,
    /// Indexed by [`Pair::linear_index`].
    pub theta: Vec<f64>,
}

impl FullGradient {
    pub fn theta_at(&self, pair: Pair, p: usize) -> f64 {
        self.theta[pair.linear_index(p)]
    }
}

/// Gradient over all main effects and a chosen subset of interactions.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialGradient {
    pub beta: Vec<f64>,
    pub theta: BTreeMap<Pair, f64>,
}

/// Full gradient of the least-squares loss; `O(n p^2)`.
pub fn full_gradient(data: &DesignData, coef: &Coefficients) -> Result<FullGradient> {
    coef.validate(data.p())?;
    let r = residual(data, &predict(data, coef));
    Ok(FullGradient {
        beta: main_gradient(data, &r),
        theta: all_pair_gradients(data, &r),
    })
}

/// Gradient restricted to the given pairs, plus the full main-effect gradient;
/// `O(n (p + |pairs|))`.
pub fn partial_gradient(data: &DesignData, coef: &Coefficients, pairs: &[Pair]) -> Result<PartialGradient> {
    coef.validate(data.p())?;
    for pair in pairs {
        Pair::checked(pair.i, pair.j, data.p())?;
    }
    let r = residual(data, &predict(data, coef));
    let g = pair_gradients(data, &r, pairs);
    Ok(PartialGradient {
        beta: main_gradient(data, &r),
        theta: pairs.iter().copied().zip(g).collect(),
    })
}
