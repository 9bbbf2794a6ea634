//! Gradient screening: bounding which inactive interactions can enter the support
//! from a stored gradient at an earlier point.
//!
//! With `w` the snapshot point and `x` the current point,
//! `|grad_ij f(x) - grad_ij f(w)| <= ||X~_ij|| * ||gamma||` where `gamma` is the
//! difference of the two predictions. Any pair with
//! `|grad_ij f(x)| > lambda2` therefore has `|grad_ij f(w)| > lambda2 - C ||gamma||`.

use std::collections::BTreeSet;

use crate::data::{all_pairs, pair_count, DesignData, Pair};
use crate::gradient::{all_pair_gradients, pair_gradients, residual, scan_pair_gradients};

/// Bytes per stored (magnitude, pair) entry.
const ENTRY_BYTES: usize = std::mem::size_of::<(f64, Pair)>();

/// Interaction gradient magnitudes at a reference point, sorted for threshold queries.
#[derive(Clone, Debug)]
pub struct GradientSnapshot {
    prediction: Vec<f64>,
    residual_norm: f64,
    /// Decreasing magnitudes; `None` when the memory budget is exceeded.
    sorted: Option<Vec<(f64, Pair)>>,
    interaction_bound: f64,
}

impl GradientSnapshot {
    /// Computes every interaction gradient at the point with the given prediction.
    pub fn capture(data: &DesignData, prediction: Vec<f64>, interaction_bound: f64, memory_cap: usize) -> Self {
        let r = residual(data, &prediction);
        let sorted = Self::fits(data, memory_cap).then(|| all_pair_gradients(data, &r));
        Self::from_parts(data, prediction, &r, sorted, interaction_bound)
    }

    /// Builds the snapshot from gradients already laid out by linear pair index.
    pub fn from_gradients(
        data: &DesignData,
        prediction: Vec<f64>,
        gradients: Vec<f64>,
        interaction_bound: f64,
        memory_cap: usize,
    ) -> Self {
        let r = residual(data, &prediction);
        let sorted = Self::fits(data, memory_cap).then_some(gradients);
        Self::from_parts(data, prediction, &r, sorted, interaction_bound)
    }

    fn fits(data: &DesignData, memory_cap: usize) -> bool {
        data.pair_count().saturating_mul(ENTRY_BYTES) <= memory_cap
    }

    fn from_parts(
        data: &DesignData,
        prediction: Vec<f64>,
        r: &[f64],
        gradients: Option<Vec<f64>>,
        interaction_bound: f64,
    ) -> Self {
        let sorted = gradients.map(|g| {
            let mut entries: Vec<(f64, Pair)> = all_pairs(data.p()).zip(g).map(|(pair, v)| (v.abs(), pair)).collect();
            entries.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            entries
        });
        GradientSnapshot {
            prediction,
            residual_norm: norm(r),
            sorted,
            interaction_bound,
        }
    }

    pub fn prediction(&self) -> &[f64] {
        &self.prediction
    }

    /// Upper bound on every interaction column norm used by the screening bound.
    pub fn interaction_bound(&self) -> f64 {
        self.interaction_bound
    }

    /// Whether magnitudes are stored (otherwise every query scans all pairs).
    pub fn is_stored(&self) -> bool {
        self.sorted.is_some()
    }

    /// Stored `(magnitude, pair)` entries in decreasing magnitude order.
    pub fn magnitudes(&self) -> Option<&[(f64, Pair)]> {
        self.sorted.as_deref()
    }

    /// Number of stored pairs whose snapshot magnitude exceeds `threshold`.
    pub fn count_above(&self, threshold: f64) -> Option<usize> {
        self.sorted.as_ref().map(|s| s.partition_point(|e| e.0 > threshold))
    }
}

/// Result of one screening query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CriticalSet {
    /// Candidate pairs outside the active set that were evaluated (empty when
    /// `degenerate`, in which case all inactive pairs were scanned).
    pub superset: Vec<Pair>,
    /// Number of inactive pairs whose gradient was evaluated.
    pub superset_len: usize,
    /// Pairs outside the active set with `|gradient| > lambda2`, in triangle order.
    pub critical: Vec<Pair>,
    pub critical_gradients: Vec<f64>,
    /// Snapshot threshold actually used (before the screen degenerated, if it did).
    pub threshold: f64,
    /// The bound was vacuous or the snapshot was not stored, so every inactive pair was evaluated.
    pub degenerate: bool,
    /// Every interaction gradient at the query point, kept when a degenerate
    /// screen computed them all so the snapshot can be refreshed for free.
    pub dense_gradients: Option<Vec<f64>>,
}

impl CriticalSet {
    pub fn contains_superset(&self, pair: &Pair, active_pairs: &BTreeSet<Pair>) -> bool {
        if self.degenerate {
            !active_pairs.contains(pair)
        } else {
            self.superset.binary_search(pair).is_ok()
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Finds the inactive interactions whose gradient at the current point exceeds
/// `lambda2` in magnitude, evaluating gradients only on the screened superset.
pub fn critical_set(
    data: &DesignData,
    prediction: &[f64],
    active_pairs: &BTreeSet<Pair>,
    lambda2: f64,
    snapshot: &GradientSnapshot,
) -> CriticalSet {
    let r = residual(data, prediction);
    let outside = |pair: &Pair| !active_pairs.contains(pair);

    let gamma: Vec<f64> = snapshot.prediction.iter().zip(prediction).map(|(a, b)| a - b).collect();
    let threshold = if gamma.iter().all(|g| *g == 0.0) {
        // identical predictions give bitwise identical gradients
        lambda2
    } else {
        let c = snapshot.interaction_bound;
        let gamma_norm = if data.fits_intercept() {
            let mean = gamma.iter().sum::<f64>() / gamma.len() as f64;
            norm(&gamma.iter().map(|g| g - mean).collect::<Vec<_>>())
        } else {
            norm(&gamma)
        };
        // allowance for rounding in the two gradient evaluations
        let scale = norm(&r) + snapshot.residual_norm + norm(prediction) + norm(&snapshot.prediction);
        let slack = 8.0 * (data.n() as f64 + 2.0) * f64::EPSILON * c * scale;
        lambda2 - c * gamma_norm * (1.0 + 1e-12) - slack
    };

    let sorted = match &snapshot.sorted {
        Some(s) if threshold > 0.0 => s,
        _ => return degenerate(data, &r, active_pairs, lambda2, threshold, snapshot.is_stored()),
    };

    let cut = sorted.partition_point(|e| e.0 > threshold);
    let mut superset: Vec<Pair> = sorted[..cut].iter().map(|e| e.1).filter(outside).collect();
    superset.sort_unstable();
    let grads = pair_gradients(data, &r, &superset);
    let (critical, critical_gradients) = superset
        .iter()
        .zip(&grads)
        .filter(|(_, g)| g.abs() > lambda2)
        .map(|(pair, g)| (*pair, *g))
        .unzip();
    CriticalSet {
        superset_len: superset.len(),
        superset,
        critical,
        critical_gradients,
        threshold,
        degenerate: false,
        dense_gradients: None,
    }
}

fn degenerate(
    data: &DesignData,
    r: &[f64],
    active_pairs: &BTreeSet<Pair>,
    lambda2: f64,
    threshold: f64,
    store: bool,
) -> CriticalSet {
    let superset_len = pair_count(data.p()) - active_pairs.len();
    let (critical, critical_gradients, dense_gradients) = if store {
        let dense = all_pair_gradients(data, r);
        let (c, g) = all_pairs(data.p())
            .zip(&dense)
            .filter(|(pair, g)| !active_pairs.contains(pair) && g.abs() > lambda2)
            .map(|(pair, g)| (pair, *g))
            .unzip();
        (c, g, Some(dense))
    } else {
        let kept = scan_pair_gradients(data, r, |pair, g| g.abs() > lambda2 && !active_pairs.contains(&pair));
        let (c, g) = kept.into_iter().unzip();
        (c, g, None)
    };
    log::debug!("gradient screen degenerated (threshold {threshold:.3e}); scanned {superset_len} pairs");
    CriticalSet {
        superset: Vec::new(),
        superset_len,
        critical,
        critical_gradients,
        threshold,
        degenerate: true,
        dense_gradients,
    }
}
