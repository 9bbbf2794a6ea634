use std::collections::BTreeSet;

use crate::coef::{Coefficients, Support};
use crate::data::{DesignData, Pair};
use crate::gradient::{main_gradient, residual};

/// Main effects and interaction pairs allowed to be nonzero in a restricted solve.
///
/// Every pair in the set has both endpoints among the main effects.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActiveSet {
    mains: BTreeSet<usize>,
    pairs: BTreeSet<Pair>,
}

impl ActiveSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_support(support: &Support) -> Self {
        let mut set = ActiveSet::new();
        set.extend(support.mains.iter().copied(), support.pairs.iter().copied());
        set
    }

    /// Cold-start guess: the `k` columns with the largest `|X_i^T y|` (ties by index).
    pub fn marginal(data: &DesignData, k: usize) -> Self {
        let zero = vec![0.0; data.n()];
        let score = main_gradient(data, &residual(data, &zero));
        let mut order: Vec<usize> = (0..data.p()).collect();
        order.sort_by(|&a, &b| score[b].abs().total_cmp(&score[a].abs()).then(a.cmp(&b)));
        order.truncate(k);
        ActiveSet {
            mains: order.into_iter().collect(),
            pairs: BTreeSet::new(),
        }
    }

    pub fn mains(&self) -> &BTreeSet<usize> {
        &self.mains
    }

    pub fn pairs(&self) -> &BTreeSet<Pair> {
        &self.pairs
    }

    pub fn contains_main(&self, i: usize) -> bool {
        self.mains.contains(&i)
    }

    pub fn contains_pair(&self, pair: &Pair) -> bool {
        self.pairs.contains(pair)
    }

    pub fn len(&self) -> usize {
        self.mains.len() + self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mains.is_empty() && self.pairs.is_empty()
    }

    pub fn insert_main(&mut self, i: usize) -> bool {
        self.mains.insert(i)
    }

    /// Adds the pair and both of its endpoints.
    pub fn insert_pair(&mut self, pair: Pair) -> bool {
        self.mains.insert(pair.i);
        self.mains.insert(pair.j);
        self.pairs.insert(pair)
    }

    /// Returns the number of variables that were not yet active.
    pub fn extend<M, P>(&mut self, mains: M, pairs: P) -> usize
    where
        M: IntoIterator<Item = usize>,
        P: IntoIterator<Item = Pair>,
    {
        let before = self.len();
        for i in mains {
            self.insert_main(i);
        }
        for pair in pairs {
            self.insert_pair(pair);
        }
        self.len() - before
    }

    /// Copy of `coef` with every inactive coordinate set to zero.
    pub fn restrict(&self, coef: &Coefficients) -> Coefficients {
        let mut out = Coefficients::zeros(coef.p());
        for &i in &self.mains {
            out.beta[i] = coef.beta[i];
        }
        for (pair, &v) in &coef.theta {
            if self.pairs.contains(pair) {
                out.set_theta(*pair, v);
            }
        }
        out.intercept = coef.intercept;
        out
    }

    /// Whether every nonzero of `coef` lies inside the set.
    pub fn covers(&self, coef: &Coefficients) -> bool {
        coef.beta.iter().enumerate().all(|(i, b)| *b == 0.0 || self.mains.contains(&i))
            && coef.theta.iter().all(|(pair, v)| *v == 0.0 || self.pairs.contains(pair))
    }
}
