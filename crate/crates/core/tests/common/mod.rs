#![allow(dead_code)]

use std::collections::BTreeMap;

use interprox::prox::{prox_unscreened, BcaOptions, DualState, ProxInput};
use interprox::{
    all_pairs, estimate_step, full_gradient, generate, objective, Coefficients, DesignData, PenaltyConfig, Setting,
    StepMode, TruthSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Synthetic data prepared with an intercept.
pub fn synthetic(setting: Setting, n: usize, p: usize, k: usize, seed: u64) -> DesignData {
    let sim = generate(&TruthSpec::new(setting, n, p, k, seed)).unwrap();
    let d = sim.data;
    DesignData::prepared(n, p, d.x().to_vec(), d.y().to_vec(), false).unwrap()
}

/// Uniform features and a response with a few main and interaction terms plus noise.
pub fn uniform_instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DesignData {
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n)
        .map(|k| {
            let c = |i: usize| x[i * n + k];
            2.0 * c(0) - 1.5 * c(1 % p) + 3.0 * c(0) * c(1 % p) + rng.random_range(-0.5..0.5)
        })
        .collect();
    DesignData::prepared(n, p, x, y, false).unwrap()
}

pub struct OracleFit {
    pub coef: Coefficients,
    pub objective: f64,
    pub iterations: usize,
}

/// Plain proximal gradient descent over every main effect and every pair, with
/// the exact step constant and the prox solved by one unscreened BCA run.
pub fn full_pgd(data: &DesignData, pen: &PenaltyConfig, start: Option<&Coefficients>, tol: f64, max_iter: usize) -> OracleFit {
    let p = data.p();
    let lip = estimate_step(data, StepMode::Exact, 100_000).unwrap().lipschitz * (1.0 + 1e-9);
    let bca = BcaOptions {
        tol: 1e-14,
        max_sweeps: 200_000,
        ..Default::default()
    };
    let mut x = start.cloned().unwrap_or_else(|| Coefficients::zeros(p));
    x.intercept = 0.0;
    let mut obj = objective(data, &x, pen).unwrap();
    let mut warm: Option<DualState> = None;
    for it in 1..=max_iter {
        let g = full_gradient(data, &x).unwrap();
        let input = ProxInput {
            beta_tilde: x.beta.iter().zip(&g.beta).map(|(b, gb)| b - gb / lip).collect(),
            theta_tilde: all_pairs(p).map(|pr| (pr, x.theta(pr) - g.theta_at(pr, p) / lip)).collect(),
            lipschitz: lip,
            pen: *pen,
        };
        let (mut next, sol) = prox_unscreened(&input, &bca, warm.take()).unwrap();
        warm = Some(sol.state);
        next.prune();
        let next_obj = objective(data, &next, pen).unwrap();
        let done = (obj - next_obj).abs() <= tol * next_obj.abs();
        x = next;
        obj = next_obj;
        if done {
            return OracleFit {
                coef: x,
                objective: obj,
                iterations: it,
            };
        }
    }
    OracleFit {
        coef: x,
        objective: obj,
        iterations: max_iter,
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Random prox input with every pair present; penalty regimes vary with `regime`.
pub fn random_prox_input(rng: &mut ChaCha8Rng, p: usize, regime: usize) -> ProxInput {
    let scale = rng.random_range(0.5..3.0);
    let beta_tilde: Vec<f64> = (0..p).map(|_| rng.random_range(-scale..scale)).collect();
    let mut theta_tilde = BTreeMap::new();
    for pr in all_pairs(p) {
        if rng.random_bool(0.6) {
            theta_tilde.insert(pr, rng.random_range(-scale..scale));
        }
    }
    let (l1, l2) = match regime % 4 {
        0 => (rng.random_range(0.05..1.0), 0.0),
        1 => (rng.random_range(5.0..20.0), rng.random_range(0.0..2.0)),
        2 => (rng.random_range(0.0..0.3), rng.random_range(0.0..0.3)),
        _ => (rng.random_range(0.1..2.0), rng.random_range(0.1..1.5)),
    };
    ProxInput {
        beta_tilde,
        theta_tilde,
        lipschitz: rng.random_range(0.5..2.0),
        pen: PenaltyConfig::new(l1, l2).unwrap(),
    }
}

/// Gradient of `0.5 * ||c(y - f)||^2` (`c` centers when the data fits an
/// intercept) by explicit loops over rows: `(main, pairs)` with pairs keyed by pair.
pub fn naive_gradient(data: &DesignData, coef: &Coefficients) -> (Vec<f64>, BTreeMap<interprox::Pair, f64>) {
    let (n, p) = (data.n(), data.p());
    let x = |k: usize, i: usize| data.x()[i * n + k];
    let mut r: Vec<f64> = (0..n)
        .map(|k| {
            let mut f = 0.0;
            for i in 0..p {
                f += coef.beta[i] * x(k, i);
            }
            for (pr, t) in &coef.theta {
                f += t * x(k, pr.i) * x(k, pr.j);
            }
            data.y()[k] - f
        })
        .collect();
    if data.fits_intercept() {
        let m = r.iter().sum::<f64>() / n as f64;
        r.iter_mut().for_each(|v| *v -= m);
    }
    let main = (0..p).map(|i| -(0..n).map(|k| x(k, i) * r[k]).sum::<f64>()).collect();
    let pairs = all_pairs(p)
        .map(|pr| (pr, -(0..n).map(|k| x(k, pr.i) * x(k, pr.j) * r[k]).sum::<f64>()))
        .collect();
    (main, pairs)
}

/// Prox by ADMM on the splitting `z_i = (beta_i, theta_{G_i})`, with the
/// `lambda1 ||z_i||_inf` step done through the Moreau identity and a sort-based
/// l1-ball projection. Returns `(beta, theta)`.
pub fn admm_prox(input: &ProxInput, iterations: usize) -> (Vec<f64>, BTreeMap<interprox::Pair, f64>) {
    let p = input.beta_tilde.len();
    let lip = input.lipschitz;
    let (l1, l2) = (input.pen.lambda1, input.pen.lambda2);
    let pairs: Vec<interprox::Pair> = input.theta_tilde.keys().copied().collect();
    let rho = lip;
    // group layout: slot 0 is beta_i, then the pairs touching i
    let groups: Vec<Vec<usize>> = (0..p)
        .map(|i| (0..pairs.len()).filter(|&e| pairs[e].i == i || pairs[e].j == i).collect())
        .collect();
    let mut beta = input.beta_tilde.clone();
    let mut theta: Vec<f64> = pairs.iter().map(|pr| input.theta_tilde[pr]).collect();
    let mut z: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.len() + 1]).collect();
    let mut u: Vec<Vec<f64>> = z.clone();
    let soft = |v: f64, g: f64| v.signum() * (v.abs() - g).max(0.0);
    for _ in 0..iterations {
        // x-update, coordinate-wise closed form
        for i in 0..p {
            let v = z[i][0] - u[i][0];
            beta[i] = (lip * input.beta_tilde[i] + rho * v) / (lip + rho);
        }
        let mut acc = vec![0.0; pairs.len()];
        for i in 0..p {
            for (k, &e) in groups[i].iter().enumerate() {
                acc[e] += z[i][k + 1] - u[i][k + 1];
            }
        }
        for (e, pr) in pairs.iter().enumerate() {
            let denom = lip + 2.0 * rho;
            theta[e] = soft((lip * input.theta_tilde[pr] + rho * acc[e]) / denom, l2 / denom);
        }
        // z-update: prox of (l1/rho) ||.||_inf = v - (l1/rho) P_{l1 ball}(v rho / l1)
        for i in 0..p {
            let mut v: Vec<f64> = std::iter::once(beta[i] + u[i][0])
                .chain(groups[i].iter().enumerate().map(|(k, &e)| theta[e] + u[i][k + 1]))
                .collect();
            let t = l1 / rho;
            if t > 0.0 {
                let scaled: Vec<f64> = v.iter().map(|x| x / t).collect();
                let proj = sort_project_l1(&scaled);
                for (x, q) in v.iter_mut().zip(proj) {
                    *x -= t * q;
                }
            }
            z[i] = v;
            // dual update
            u[i][0] += beta[i] - z[i][0];
            for (k, &e) in groups[i].iter().enumerate() {
                u[i][k + 1] += theta[e] - z[i][k + 1];
            }
        }
    }
    (beta, pairs.into_iter().zip(theta).collect())
}

/// Euclidean projection onto the unit l1 ball (Duchi et al. sort-based rule).
pub fn sort_project_l1(v: &[f64]) -> Vec<f64> {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= 1.0 {
        return v.to_vec();
    }
    let mut m: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    m.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, mk) in m.iter().enumerate() {
        cum += mk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if *mk > t {
            tau = t;
        }
    }
    v.iter().map(|x| x.signum() * (x.abs() - tau).max(0.0)).collect()
}
