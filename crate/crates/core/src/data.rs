//! Design data: response, main-feature columns and on-the-fly interaction columns.
//!
//! Main features are stored column-major. Interaction columns `X_i * X_j` are
//! never materialized as a matrix; they are produced elementwise on demand.

use crate::error::{Error, Result};

/// An unordered feature pair stored with `i < j` (0-based indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
}

impl Pair {
    /// Builds a pair, validating `i < j < p`.
    pub fn checked(i: usize, j: usize, p: usize) -> Result<Self> {
        if i < j && j < p {
            Ok(Pair { i, j })
        } else {
            Err(Error::InvalidPair { i, j, p })
        }
    }

    /// Builds a pair from two distinct indices in either order.
    pub fn sorted(a: usize, b: usize) -> Self {
        debug_assert_ne!(a, b);
        if a < b {
            Pair { i: a, j: b }
        } else {
            Pair { i: b, j: a }
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.i == k || self.j == k
    }

    /// Position of the pair in the row-major upper triangle of a `p x p` matrix.
    pub fn linear_index(&self, p: usize) -> usize {
        self.i * (2 * p - self.i - 1) / 2 + (self.j - self.i - 1)
    }
}

/// Number of interaction pairs for `p` main features.
pub fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// All pairs in row-major triangle order.
pub fn all_pairs(p: usize) -> impl Iterator<Item = Pair> {
    (0..p).flat_map(move |i| (i + 1..p).map(move |j| Pair { i, j }))
}

/// Column centering and scaling applied to the main features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTransform {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureTransform {
    pub fn identity(p: usize) -> Self {
        FeatureTransform {
            center: vec![0.0; p],
            scale: vec![1.0; p],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.center.iter().all(|&c| c == 0.0) && self.scale.iter().all(|&s| s == 1.0)
    }

    /// Applies the transform to raw column-major features. The response is kept
    /// in its original units so predictions can be compared directly.
    pub fn apply(&self, n: usize, x: Vec<f64>, y: Vec<f64>) -> Result<DesignData> {
        let p = self.center.len();
        if x.len() != n * p {
            return Err(Error::Dimension {
                what: "feature matrix",
                expected: n * p,
                got: x.len(),
            });
        }
        let mut x = x;
        for (col, (&c, &s)) in x.chunks_mut(n).zip(self.center.iter().zip(&self.scale)) {
            for v in col {
                *v = (*v - c) / s;
            }
        }
        let mut data = DesignData::new(n, p, x, y)?;
        data.transform = self.clone();
        Ok(data)
    }
}

/// Response vector and main-feature matrix.
///
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct DesignData {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    column_norms: Vec<f64>,
    standardized: bool,
    transform: FeatureTransform,
    response_offset: f64,
    intercept: bool,
}

impl DesignData {
    /// Wraps raw data without any centering or scaling. `x` is column-major, `n * p` long.
    pub fn new(n: usize, p: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::invalid("design needs n >= 1 and p >= 1"));
        }
        if x.len() != n * p {
            return Err(Error::Dimension {
                what: "feature matrix",
                expected: n * p,
                got: x.len(),
            });
        }
        if y.len() != n {
            return Err(Error::Dimension {
                what: "response",
                expected: n,
                got: y.len(),
            });
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos % n,
                column: pos / n,
            });
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, column: p });
        }
        let column_norms = x.chunks(n).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        Ok(DesignData {
            n,
            p,
            x,
            y,
            column_norms,
            standardized: false,
            transform: FeatureTransform::identity(p),
            response_offset: 0.0,
            intercept: false,
        })
    }

    /// Builds data from row vectors (convenient for small inputs).
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::invalid("ragged rows"));
        }
        let mut x = vec![0.0; n * p];
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                x[c * n + r] = v;
            }
        }
        DesignData::new(n, p, x, y)
    }

    /// Centers the response, enables the unpenalized intercept and, when
    /// `standardize` is set, centers every main column and scales it to
    /// `||X_i||^2 / n = 1`. Constant columns are centered only.
    pub fn prepared(n: usize, p: usize, x: Vec<f64>, y: Vec<f64>, standardize: bool) -> Result<Self> {
        let raw = DesignData::new(n, p, x, y)?;
        let nf = n as f64;
        let y_mean = raw.y.iter().sum::<f64>() / nf;
        let y: Vec<f64> = raw.y.iter().map(|v| v - y_mean).collect();
        let transform = if standardize {
            let mut t = FeatureTransform::identity(p);
            for (k, col) in raw.x.chunks(n).enumerate() {
                let mean = col.iter().sum::<f64>() / nf;
                let ss = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
                let sd = (ss / nf).sqrt();
                t.center[k] = mean;
                t.scale[k] = if sd > 0.0 { sd } else { 1.0 };
            }
            t
        } else {
            FeatureTransform::identity(p)
        };
        let mut data = transform.apply(n, raw.x, y)?;
        data.standardized = standardize;
        data.response_offset = y_mean;
        data.intercept = true;
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Column-major feature storage.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.x[i * self.n..(i + 1) * self.n]
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// With an intercept the loss is profiled over it: residuals are centered
    /// before every loss and gradient evaluation.
    pub fn with_intercept(mut self, intercept: bool) -> Self {
        self.intercept = intercept;
        self
    }

    pub fn fits_intercept(&self) -> bool {
        self.intercept
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn transform(&self) -> &FeatureTransform {
        &self.transform
    }

    /// Amount subtracted from the raw response (zero unless the data was prepared).
    pub fn response_offset(&self) -> f64 {
        self.response_offset
    }

    /// Response in original units.
    pub fn raw_response(&self) -> Vec<f64> {
        self.y.iter().map(|v| v + self.response_offset).collect()
    }

    pub fn pair_count(&self) -> usize {
        pair_count(self.p)
    }

    /// Elementwise product of columns `i` and `j` (`i < j`).
    pub fn interaction_column(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        Pair::checked(i, j, self.p)?;
        let mut out = vec![0.0; self.n];
        self.fill_interaction(i, j, &mut out);
        Ok(out)
    }

    pub(crate) fn fill_interaction(&self, i: usize, j: usize, out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(self.column(i)).zip(self.column(j)) {
            *o = a * b;
        }
    }

    /// Exact `max_{i<j} ||X_i * X_j||_2`; zero when `p < 2`.
    pub fn max_interaction_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.p {
            let ci = self.column(i);
            for j in i + 1..self.p {
                let s: f64 = ci.iter().zip(self.column(j)).map(|(a, b)| (a * b) * (a * b)).sum();
                best = best.max(s);
            }
        }
        best.sqrt()
    }

    /// Cheap upper bound `max_i ||X_i||_inf * max_j ||X_j||_2` on every interaction norm.
    pub fn interaction_norm_bound(&self) -> f64 {
        let max_abs = self.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_norm = self.column_norms.iter().fold(0.0f64, |m, &v| m.max(v));
        max_abs * max_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interaction_column_products() {
        let d = DesignData::from_rows(&[vec![1.0, 3.0], vec![2.0, 4.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(d.interaction_column(0, 1).unwrap(), vec![3.0, 8.0]);
    }

    #[test]
    fn zero_column_annihilates() {
        let d = DesignData::from_rows(
            &[vec![0.0, 3.0, 1.5], vec![0.0, 4.0, -2.0]],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(d.interaction_column(0, 1).unwrap(), vec![0.0, 0.0]);
        assert_eq!(d.interaction_column(0, 2).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn interaction_column_matches_row_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let d = DesignData::from_rows(&rows, vec![0.0; 5]).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                let col = d.interaction_column(i, j).unwrap();
                for (r, row) in rows.iter().enumerate() {
                    assert_eq!(col[r], row[i] * row[j]);
                }
            }
        }
    }

    #[test]
    fn interaction_column_rejects_bad_indices() {
        let d = DesignData::from_rows(&[vec![1.0, 2.0, 3.0]], vec![1.0]).unwrap();
        assert!(d.interaction_column(1, 1).is_err());
        assert!(d.interaction_column(2, 1).is_err());
        assert!(d.interaction_column(0, 3).is_err());
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(DesignData::new(0, 1, vec![], vec![]).is_err());
        assert!(matches!(
            DesignData::new(2, 1, vec![1.0, f64::NAN], vec![0.0, 0.0]),
            Err(Error::NonFinite { row: 1, column: 0 })
        ));
    }

    #[test]
    fn standardization_invariants() {
        let rows = vec![
            vec![1.0, 10.0, 5.0],
            vec![2.0, 12.0, 5.0],
            vec![4.0, 9.0, 5.0],
            vec![7.0, 15.0, 5.0],
        ];
        let raw = DesignData::from_rows(&rows, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let d = DesignData::prepared(4, 3, raw.x().to_vec(), raw.y().to_vec(), true).unwrap();
        assert!(d.is_standardized());
        for k in 0..2 {
            let c = d.column(k);
            let mean: f64 = c.iter().sum::<f64>() / 4.0;
            let ms: f64 = c.iter().map(|v| v * v).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-10);
            assert!((ms - 1.0).abs() < 1e-10);
        }
        // constant column: centered to zero, scale left at one
        assert!(d.column(2).iter().all(|&v| v == 0.0));
        assert!((d.y().iter().sum::<f64>()).abs() < 1e-12);
        assert_eq!(d.response_offset(), 3.0);
        // interaction columns stay literal products of processed columns
        let ic = d.interaction_column(0, 1).unwrap();
        for r in 0..4 {
            assert_eq!(ic[r], d.column(0)[r] * d.column(1)[r]);
        }
    }

    #[test]
    fn linear_index_enumerates_triangle() {
        let p = 7;
        for (k, pair) in all_pairs(p).enumerate() {
            assert_eq!(pair.linear_index(p), k);
        }
        assert_eq!(all_pairs(p).count(), pair_count(p));
    }

    #[test]
    fn interaction_bound_dominates_exact() {
        let rows = vec![vec![1.0, -3.0, 0.5], vec![2.0, 0.1, -1.0], vec![-0.5, 2.0, 4.0]];
        let d = DesignData::from_rows(&rows, vec![0.0; 3]).unwrap();
        assert!(d.interaction_norm_bound() >= d.max_interaction_norm());
    }
}
