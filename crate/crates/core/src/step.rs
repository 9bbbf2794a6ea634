//! Lipschitz constant of the least-squares gradient map.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{pair_count, DesignData};
use crate::error::{Error, Result};
use crate::gradient::{all_pair_gradients, main_gradient};

/// Largest `p` accepted by [`StepMode::Exact`]; each matvec costs `O(n p^2)`.
pub const EXACT_MAX_P: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// Top eigenvalue of the Gram matrix of `[X | X~]`; held fixed during the fit.
    Exact,
    /// Start from the top eigenvalue of `X^T X` and double on failed sufficient decrease.
    Backtracking,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepEstimate {
    pub lipschitz: f64,
    pub iterations: usize,
    pub converged: bool,
}

const POWER_RTOL: f64 = 1e-13;

/// Power iteration for the top eigenvalue of the main-plus-interaction Gram
/// matrix (exact mode) or of `X^T X` (backtracking mode).
pub fn estimate_step(data: &DesignData, mode: StepMode, probe_iterations: usize) -> Result<StepEstimate> {
    let p = data.p();
    let with_pairs = mode == StepMode::Exact;
    if with_pairs && p > EXACT_MAX_P {
        return Err(Error::invalid(format!(
            "exact step estimation is limited to p <= {EXACT_MAX_P} (got p = {p})"
        )));
    }
    let m = if with_pairs { pair_count(p) } else { 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..p + m).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);

    let n = data.n();
    let mut z = vec![0.0; n];
    let mut pair_buf = vec![0.0; n];
    let mut rayleigh = 0.0;
    for it in 1..=probe_iterations.max(1) {
        // z = G v
        z.iter_mut().for_each(|e| *e = 0.0);
        for i in 0..p {
            let b = v[i];
            for (o, x) in z.iter_mut().zip(data.column(i)) {
                *o += b * x;
            }
        }
        if with_pairs {
            let mut k = p;
            for i in 0..p {
                for j in i + 1..p {
                    let t = v[k];
                    k += 1;
                    if t != 0.0 {
                        data.fill_interaction(i, j, &mut pair_buf);
                        for (o, x) in z.iter_mut().zip(&pair_buf) {
                            *o += t * x;
                        }
                    }
                }
            }
        }
        let next_rayleigh = z.iter().map(|e| e * e).sum::<f64>();
        // v = G^T z (the gradient helpers return -G^T r)
        let mut w = main_gradient(data, &z);
        if with_pairs {
            w.extend(all_pair_gradients(data, &z));
        }
        w.iter_mut().for_each(|e| *e = -*e);
        let norm = normalize(&mut w);
        let done = (next_rayleigh - rayleigh).abs() <= POWER_RTOL * next_rayleigh.max(f64::MIN_POSITIVE);
        rayleigh = next_rayleigh;
        if norm == 0.0 {
            return Ok(StepEstimate {
                lipschitz: 0.0,
                iterations: it,
                converged: true,
            });
        }
        v = w;
        if done {
            return Ok(StepEstimate {
                lipschitz: rayleigh,
                iterations: it,
                converged: true,
            });
        }
    }
    if with_pairs {
        warn!("power iteration did not converge in {probe_iterations} iterations");
    }
    Ok(StepEstimate {
        lipschitz: rayleigh,
        iterations: probe_iterations,
        converged: false,
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|e| e * e).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|e| *e /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    #[test]
    fn single_unit_column() {
        let d = DesignData::new(2, 1, vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        for mode in [StepMode::Exact, StepMode::Backtracking] {
            let est = estimate_step(&d, mode, 100).unwrap();
            assert!((est.lipschitz - 1.0).abs() < 1e-12);
            assert!(est.converged);
        }
    }

    #[test]
    fn matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (n, p) = (10, 4);
        let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = DesignData::new(n, p, x, vec![0.0; n]).unwrap();
        // dense [X | X~] with 4 + 6 columns
        let mut cols: Vec<f64> = d.x().to_vec();
        for i in 0..p {
            for j in i + 1..p {
                cols.extend(d.interaction_column(i, j).unwrap());
            }
        }
        let g = DMatrix::from_column_slice(n, p + 6, &cols);
        let gram = g.transpose() * &g;
        let top = gram.symmetric_eigenvalues().max();
        let est = estimate_step(&d, StepMode::Exact, 10_000).unwrap();
        assert!(((est.lipschitz - top) / top).abs() < 1e-6, "{} vs {top}", est.lipschitz);

        let xm = DMatrix::from_column_slice(n, p, d.x());
        let top_x = (xm.transpose() * &xm).symmetric_eigenvalues().max();
        let est_x = estimate_step(&d, StepMode::Backtracking, 10_000).unwrap();
        assert!(((est_x.lipschitz - top_x) / top_x).abs() < 1e-6);
    }

    #[test]
    fn scaling_by_two_quadruples_exact_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scaled = |x: &[f64]| x.iter().map(|v| 2.0 * v).collect::<Vec<f64>>();
        // without interaction columns the law is exact
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d1 = DesignData::new(8, 1, x.clone(), vec![0.0; 8]).unwrap();
        let d2 = DesignData::new(8, 1, scaled(&x), vec![0.0; 8]).unwrap();
        let l1 = estimate_step(&d1, StepMode::Exact, 10_000).unwrap().lipschitz;
        let l2 = estimate_step(&d2, StepMode::Exact, 10_000).unwrap().lipschitz;
        assert!((l2 / l1 - 4.0).abs() < 1e-10);

        // product columns scale by 4, so their Gram block scales by 16
        let x: Vec<f64> = (0..24).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d1 = DesignData::new(8, 3, x.clone(), vec![0.0; 8]).unwrap();
        let d2 = DesignData::new(8, 3, scaled(&x), vec![0.0; 8]).unwrap();
        let l1 = estimate_step(&d1, StepMode::Exact, 10_000).unwrap().lipschitz;
        let l2 = estimate_step(&d2, StepMode::Exact, 10_000).unwrap().lipschitz;
        assert!(l2 / l1 >= 4.0 * (1.0 - 1e-9) && l2 / l1 <= 16.0 * (1.0 + 1e-9));
        let lx1 = estimate_step(&d1, StepMode::Backtracking, 10_000).unwrap().lipschitz;
        let lx2 = estimate_step(&d2, StepMode::Backtracking, 10_000).unwrap().lipschitz;
        assert!((lx2 / lx1 - 4.0).abs() < 1e-8);
    }

    #[test]
    fn exact_mode_refuses_large_p() {
        let d = DesignData::new(1, 201, vec![1.0; 201], vec![0.0]).unwrap();
        assert!(estimate_step(&d, StepMode::Exact, 10).is_err());
    }

    #[test]
    fn flags_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = DesignData::new(12, 5, x, vec![0.0; 12]).unwrap();
        let est = estimate_step(&d, StepMode::Exact, 1).unwrap();
        assert!(!est.converged);
        assert!(est.lipschitz > 0.0);
    }
}
