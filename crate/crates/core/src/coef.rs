use std::collections::{BTreeMap, BTreeSet};

use crate::data::{DesignData, Pair};
use crate::error::{Error, Result};
use crate::gradient::{predict, residual};

/// A coordinate counts as nonzero above this magnitude when tracking supports.
pub const SUPPORT_EPS: f64 = 1e-10;

/// Main effects, sparse interaction effects and intercept.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Coefficients {
    pub beta: Vec<f64>,
    pub theta: BTreeMap<Pair, f64>,
    pub intercept: f64,
}

impl Coefficients {
    pub fn zeros(p: usize) -> Self {
        Coefficients {
            beta: vec![0.0; p],
            theta: BTreeMap::new(),
            intercept: 0.0,
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Interaction value; absent pairs are exactly zero.
    pub fn theta(&self, pair: Pair) -> f64 {
        self.theta.get(&pair).copied().unwrap_or(0.0)
    }

    pub fn set_theta(&mut self, pair: Pair, value: f64) {
        if value == 0.0 {
            self.theta.remove(&pair);
        } else {
            self.theta.insert(pair, value);
        }
    }

    /// Interactions of group `i` (every pair containing `i`).
    pub fn group(&self, i: usize) -> impl Iterator<Item = (Pair, f64)> + '_ {
        self.theta.iter().filter(move |(p, _)| p.contains(i)).map(|(p, v)| (*p, *v))
    }

    /// `max(|beta_i|, ||theta_{G_i}||_inf)` for every `i`.
    pub fn group_levels(&self) -> Vec<f64> {
        let mut lv: Vec<f64> = self.beta.iter().map(|b| b.abs()).collect();
        for (pair, v) in &self.theta {
            let a = v.abs();
            lv[pair.i] = lv[pair.i].max(a);
            lv[pair.j] = lv[pair.j].max(a);
        }
        lv
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.beta.len() != p {
            return Err(Error::Dimension {
                what: "main coefficients",
                expected: p,
                got: self.beta.len(),
            });
        }
        for pair in self.theta.keys() {
            Pair::checked(pair.i, pair.j, p)?;
        }
        Ok(())
    }

    pub fn support(&self, eps: f64) -> Support {
        Support {
            mains: (0..self.beta.len()).filter(|&i| self.beta[i].abs() > eps).collect(),
            pairs: self.theta.iter().filter(|(_, v)| v.abs() > eps).map(|(p, _)| *p).collect(),
        }
    }

    /// Drops interaction entries that are exactly zero.
    pub fn prune(&mut self) {
        self.theta.retain(|_, v| *v != 0.0);
    }
}

/// Indices of nonzero main effects and interaction pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Support {
    pub mains: BTreeSet<usize>,
    pub pairs: BTreeSet<Pair>,
}

impl Support {
    pub fn len(&self) -> usize {
        self.mains.len() + self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mains.is_empty() && self.pairs.is_empty()
    }
}

/// Regularization weights of the hierarchical penalty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl PenaltyConfig {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
            return Err(Error::invalid(format!(
                "penalties must be nonnegative, got lambda1 = {lambda1}, lambda2 = {lambda2}"
            )));
        }
        Ok(PenaltyConfig { lambda1, lambda2 })
    }

    /// `lambda1 * sum_i max(|beta_i|, ||theta_{G_i}||_inf) + lambda2 * ||theta||_1`.
    pub fn value(&self, coef: &Coefficients) -> f64 {
        let groups: f64 = coef.group_levels().iter().sum();
        let l1: f64 = coef.theta.values().map(|v| v.abs()).sum();
        self.lambda1 * groups + self.lambda2 * l1
    }
}

/// Least-squares loss `0.5 * ||y - X beta - sum X~_ij theta_ij||^2`, profiled over the
/// intercept when the data fits one.
pub fn loss(data: &DesignData, coef: &Coefficients) -> Result<f64> {
    coef.validate(data.p())?;
    let r = residual(data, &predict(data, coef));
    Ok(0.5 * r.iter().map(|v| v * v).sum::<f64>())
}

/// Penalized objective `f + Omega`.
pub fn objective(data: &DesignData, coef: &Coefficients, pen: &PenaltyConfig) -> Result<f64> {
    Ok(loss(data, coef)? + pen.value(coef))
}
