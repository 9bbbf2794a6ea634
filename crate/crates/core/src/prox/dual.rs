//! Dual block coordinate ascent for one connected component of the prox problem.
//!
//! Each vertex `i` owns a dual block `(u^i, w^i)`: a scalar for the main effect
//! and one weight per incident edge. Edge `(a, b)` carries `w^a_b` (owned by `a`)
//! and `w^b_a` (owned by `b`). Blocks live in the unit l1 ball. The primal point
//! is recovered from the dual by
//!
//! ```text
//! beta_i   = beta~_i - (lambda1 / L) u^i
//! theta_ab = S_{lambda2 / L}(theta~_ab - (lambda1 / L)(w^a_b + w^b_a))
//! ```

use crate::data::Pair;

use super::graph::Component;
use super::threshold::{boxed_soft_threshold, l1_norm, project_l1_ball_in_place};
use super::ProxInput;

/// Dual variables of one component, indexed locally (vertex position, edge position).
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub u: Vec<f64>,
    /// `w[e] = [w^a_b, w^b_a]` for edge `e = (a, b)`, `a < b`.
    pub w: Vec<[f64; 2]>,
}

impl DualState {
    pub fn zeros(component: &Component) -> Self {
        DualState {
            u: vec![0.0; component.vertices.len()],
            w: vec![[0.0; 2]; component.edges.len()],
        }
    }

    /// `||(u^i, w^i)||_1` for every local vertex, summed in block order.
    pub fn block_norms(&self, component: &Component) -> Vec<f64> {
        let local = LocalProblem::incidence(component);
        (0..self.u.len())
            .map(|a| {
                let mut block = vec![self.u[a]];
                block.extend(local[a].iter().map(|&(e, side)| self.w[e][side]));
                l1_norm(&block)
            })
            .collect()
    }

    pub fn is_feasible(&self, component: &Component) -> bool {
        self.block_norms(component).iter().all(|&s| s <= 1.0)
    }
}

/// Dual gradient: one entry per vertex and one per edge (shared by both of its
/// directed weights).
#[derive(Clone, Debug, PartialEq)]
pub struct DualGradient {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

/// Block step rule for the projected ascent update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BlockStep {
    /// `1 / (lambda1^2 / L)`: the block gradient is coordinate-separable with
    /// slope at most `lambda1^2 / L` per coordinate.
    #[default]
    Separable,
    /// `1 / (d_i lambda1^2 / L)` with `d_i` the block dimension.
    Dimension,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BcaOptions {
    /// Relative duality-gap tolerance.
    pub tol: f64,
    pub max_sweeps: usize,
    pub step: BlockStep,
    /// Keep the gap after every sweep in [`ComponentSolution::gap_history`].
    pub record_history: bool,
}

impl Default for BcaOptions {
    fn default() -> Self {
        BcaOptions {
            tol: 1e-12,
            max_sweeps: 20_000,
            step: BlockStep::Separable,
            record_history: false,
        }
    }
}

/// Absolute floor on the gap threshold.
pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSolution {
    /// Main effects in component vertex order.
    pub beta: Vec<f64>,
    /// Interactions in component edge order.
    pub theta: Vec<f64>,
    /// Best primal value minus current dual value.
    pub gap: f64,
    pub primal: f64,
    pub dual: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub state: DualState,
    /// Largest block l1 norm observed right after any block update.
    pub max_block_norm: f64,
    /// Gap before the first sweep followed by the gap after each sweep.
    pub gap_history: Vec<f64>,
}

/// Component data flattened into local arrays.
pub(crate) struct LocalProblem {
    beta_t: Vec<f64>,
    theta_t: Vec<f64>,
    ends: Vec<(usize, usize)>,
    incid: Vec<Vec<(usize, usize)>>,
    lip: f64,
    l1: f64,
    l2: f64,
}

impl LocalProblem {
    fn incidence(component: &Component) -> Vec<Vec<(usize, usize)>> {
        let mut incid = vec![Vec::new(); component.vertices.len()];
        for (e, pair) in component.edges.iter().enumerate() {
            let (a, b) = local_ends(component, *pair);
            incid[a].push((e, 0));
            incid[b].push((e, 1));
        }
        incid
    }

    pub(crate) fn new(component: &Component, input: &ProxInput) -> Self {
        let beta_t = component.vertices.iter().map(|&v| input.beta_tilde[v]).collect();
        let theta_t = component
            .edges
            .iter()
            .map(|pair| input.theta_tilde.get(pair).copied().unwrap_or(0.0))
            .collect();
        let ends = component.edges.iter().map(|&pair| local_ends(component, pair)).collect();
        LocalProblem {
            beta_t,
            theta_t,
            ends,
            incid: Self::incidence(component),
            lip: input.lipschitz,
            l1: input.pen.lambda1,
            l2: input.pen.lambda2,
        }
    }

    fn ratio(&self) -> f64 {
        self.l1 / self.lip
    }

    fn primal_beta(&self, a: usize, u: f64) -> f64 {
        self.beta_t[a] - self.ratio() * u
    }

    fn primal_theta(&self, e: usize, w: [f64; 2]) -> f64 {
        boxed_soft_threshold(self.theta_t[e] - self.ratio() * (w[0] + w[1]), self.l2 / self.lip)
    }

    fn recover(&self, state: &DualState) -> (Vec<f64>, Vec<f64>) {
        let beta = (0..self.beta_t.len()).map(|a| self.primal_beta(a, state.u[a])).collect();
        let theta = (0..self.theta_t.len()).map(|e| self.primal_theta(e, state.w[e])).collect();
        (beta, theta)
    }

    fn dual_value(&self, state: &DualState) -> f64 {
        let half = 0.5 * self.lip;
        let mut q = 0.0;
        for a in 0..self.beta_t.len() {
            let b = self.primal_beta(a, state.u[a]);
            let d = b - self.beta_t[a];
            q += half * d * d + self.l1 * b * state.u[a];
        }
        for e in 0..self.theta_t.len() {
            let w = state.w[e];
            let t = self.primal_theta(e, w);
            let d = t - self.theta_t[e];
            q += half * d * d + self.l1 * t * (w[0] + w[1]) + self.l2 * t.abs();
        }
        q
    }

    fn primal_value(&self, beta: &[f64], theta: &[f64]) -> f64 {
        let half = 0.5 * self.lip;
        let mut level: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
        let mut v = 0.0;
        for (b, bt) in beta.iter().zip(&self.beta_t) {
            v += half * (b - bt) * (b - bt);
        }
        for (e, (t, tt)) in theta.iter().zip(&self.theta_t).enumerate() {
            v += half * (t - tt) * (t - tt) + self.l2 * t.abs();
            let (a, b) = self.ends[e];
            level[a] = level[a].max(t.abs());
            level[b] = level[b].max(t.abs());
        }
        v + self.l1 * level.iter().sum::<f64>()
    }

    fn gradient(&self, state: &DualState) -> DualGradient {
        DualGradient {
            u: (0..self.beta_t.len()).map(|a| self.l1 * self.primal_beta(a, state.u[a])).collect(),
            w: (0..self.theta_t.len()).map(|e| self.l1 * self.primal_theta(e, state.w[e])).collect(),
        }
    }
}

fn local_ends(component: &Component, pair: Pair) -> (usize, usize) {
    let pos = |v: usize| {
        component
            .vertices
            .binary_search(&v)
            .expect("edge endpoint outside component")
    };
    (pos(pair.i), pos(pair.j))
}

/// Gradient of the dual objective at `state`.
pub fn dual_gradient(state: &DualState, component: &Component, input: &ProxInput) -> DualGradient {
    LocalProblem::new(component, input).gradient(state)
}

/// Dual objective `q(u, w)`.
pub fn dual_objective(state: &DualState, component: &Component, input: &ProxInput) -> f64 {
    LocalProblem::new(component, input).dual_value(state)
}

/// Prox objective restricted to the component, at the given local primal point.
pub fn component_primal_objective(component: &Component, input: &ProxInput, beta: &[f64], theta: &[f64]) -> f64 {
    LocalProblem::new(component, input).primal_value(beta, theta)
}

/// Closed-form solution of a component without edges: soft-thresholding.
pub fn solve_isolated(component: &Component, input: &ProxInput) -> ComponentSolution {
    let gamma = input.pen.lambda1 / input.lipschitz;
    let beta: Vec<f64> = component
        .vertices
        .iter()
        .map(|&v| boxed_soft_threshold(input.beta_tilde[v], gamma))
        .collect();
    let local = LocalProblem::new(component, input);
    let primal = local.primal_value(&beta, &[]);
    // matching dual point: u = clip(L beta~ / lambda1, [-1, 1])
    let state = DualState {
        u: local
            .beta_t
            .iter()
            .map(|b| if local.l1 > 0.0 { (b / local.ratio()).clamp(-1.0, 1.0) } else { 0.0 })
            .collect(),
        w: Vec::new(),
    };
    let dual = local.dual_value(&state);
    ComponentSolution {
        beta,
        theta: Vec::new(),
        gap: (primal - dual).max(0.0),
        primal,
        dual,
        sweeps: 0,
        converged: true,
        state,
        max_block_norm: 0.0,
        gap_history: Vec::new(),
    }
}

/// Solves the prox problem on one component by projected block coordinate ascent
/// on the dual, sweeping vertices in ascending order until the relative duality
/// gap drops below `opts.tol`.
pub fn solve_component(
    component: &Component,
    input: &ProxInput,
    opts: &BcaOptions,
    warm: Option<DualState>,
) -> ComponentSolution {
    let local = LocalProblem::new(component, input);
    let m = component.vertices.len();

    if local.l1 == 0.0 {
        // no group coupling: closed form, any dual point is optimal
        let state = DualState::zeros(component);
        let (beta, theta) = local.recover(&state);
        let primal = local.primal_value(&beta, &theta);
        return ComponentSolution {
            beta,
            theta,
            gap: 0.0,
            primal,
            dual: primal,
            sweeps: 0,
            converged: true,
            state,
            max_block_norm: 0.0,
            gap_history: Vec::new(),
        };
    }

    let mut state = match warm {
        Some(s) if s.u.len() == m && s.w.len() == component.edges.len() => s,
        _ => DualState::zeros(component),
    };

    let slope = local.l1 * local.l1 / local.lip;
    let threshold = |primal: f64| (opts.tol * primal.abs()).max(GAP_FLOOR);

    let (mut best_beta, mut best_theta) = local.recover(&state);
    let mut best_primal = local.primal_value(&best_beta, &best_theta);
    let mut dual = local.dual_value(&state);
    let mut gap = best_primal - dual;
    let mut history = Vec::new();
    if opts.record_history {
        history.push(gap);
    }
    let mut max_block_norm = 0.0f64;
    let mut block: Vec<f64> = Vec::new();
    let mut sweeps = 0;
    let mut converged = gap <= threshold(best_primal);

    while !converged && sweeps < opts.max_sweeps {
        sweeps += 1;
        for a in 0..m {
            let incid = &local.incid[a];
            let step = match opts.step {
                BlockStep::Separable => 1.0 / slope,
                BlockStep::Dimension => 1.0 / ((1 + incid.len()) as f64 * slope),
            };
            block.clear();
            let u = state.u[a];
            block.push(u + step * local.l1 * local.primal_beta(a, u));
            for &(e, side) in incid {
                let w = state.w[e];
                block.push(w[side] + step * local.l1 * local.primal_theta(e, w));
            }
            project_l1_ball_in_place(&mut block);
            max_block_norm = max_block_norm.max(l1_norm(&block));
            state.u[a] = block[0];
            for (k, &(e, side)) in incid.iter().enumerate() {
                state.w[e][side] = block[k + 1];
            }
        }
        let (beta, theta) = local.recover(&state);
        let primal = local.primal_value(&beta, &theta);
        if primal < best_primal {
            best_primal = primal;
            best_beta = beta;
            best_theta = theta;
        }
        dual = local.dual_value(&state);
        gap = best_primal - dual;
        if opts.record_history {
            history.push(gap);
        }
        converged = gap <= threshold(best_primal);
    }

    ComponentSolution {
        beta: best_beta,
        theta: best_theta,
        gap,
        primal: best_primal,
        dual,
        sweeps,
        converged,
        state,
        max_block_norm,
        gap_history: history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coef::PenaltyConfig;
    use std::collections::BTreeMap;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn complete_component(m: usize) -> Component {
        let vertices: Vec<usize> = (0..m).collect();
        let edges = crate::data::all_pairs(m).collect();
        Component { vertices, edges }
    }

    fn random_input(rng: &mut ChaCha8Rng, comp: &Component, p: usize) -> ProxInput {
        let mut theta = BTreeMap::new();
        for e in &comp.edges {
            theta.insert(*e, rng.random_range(-3.0..3.0));
        }
        ProxInput {
            beta_tilde: (0..p).map(|_| rng.random_range(-3.0..3.0)).collect(),
            theta_tilde: theta,
            lipschitz: rng.random_range(0.5..3.0),
            pen: PenaltyConfig::new(rng.random_range(0.1..2.0), rng.random_range(0.0..1.0)).unwrap(),
        }
    }

    fn random_feasible(rng: &mut ChaCha8Rng, comp: &Component) -> DualState {
        let mut s = DualState {
            u: (0..comp.vertices.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            w: (0..comp.edges.len()).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect(),
        };
        // shrink each block into the ball
        let norms = s.block_norms(comp);
        let incid = LocalProblem::incidence(comp);
        for (a, nrm) in norms.iter().enumerate() {
            let f = 0.9 / nrm.max(1.0);
            s.u[a] *= f;
            for &(e, side) in &incid[a] {
                s.w[e][side] *= f;
            }
        }
        assert!(s.is_feasible(comp));
        s
    }

    #[test]
    fn zero_state_gradient() {
        let comp = complete_component(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut inp = random_input(&mut rng, &comp, 3);
        inp.theta_tilde.insert(Pair { i: 0, j: 1 }, 0.5 * inp.pen.lambda2 / inp.lipschitz);
        let g = dual_gradient(&DualState::zeros(&comp), &comp, &inp);
        for a in 0..3 {
            assert_eq!(g.u[a], inp.pen.lambda1 * inp.beta_tilde[a]);
        }
        assert_eq!(g.w[0], 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let comp = complete_component(4);
        let mut checked = 0;
        for _ in 0..50 {
            let inp = random_input(&mut rng, &comp, 4);
            let s = random_feasible(&mut rng, &comp);
            let local = LocalProblem::new(&comp, &inp);
            let g = local.gradient(&s);
            let h = 1e-6;
            for a in 0..4 {
                let mut sp = s.clone();
                sp.u[a] += h;
                let mut sm = s.clone();
                sm.u[a] -= h;
                let fd = (local.dual_value(&sp) - local.dual_value(&sm)) / (2.0 * h);
                assert!((fd - g.u[a]).abs() < 1e-5);
            }
            let gamma = inp.pen.lambda2 / inp.lipschitz;
            for e in 0..comp.edges.len() {
                let arg = local.theta_t[e] - local.ratio() * (s.w[e][0] + s.w[e][1]);
                if (arg.abs() - gamma).abs() < 1e-3 {
                    continue; // kink of the soft-threshold
                }
                for side in 0..2 {
                    let mut sp = s.clone();
                    sp.w[e][side] += h;
                    let mut sm = s.clone();
                    sm.w[e][side] -= h;
                    let fd = (local.dual_value(&sp) - local.dual_value(&sm)) / (2.0 * h);
                    assert!((fd - g.w[e]).abs() < 1e-5, "{fd} vs {}", g.w[e]);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn singleton_is_soft_threshold() {
        let comp = Component {
            vertices: vec![2],
            edges: vec![],
        };
        let inp = ProxInput {
            beta_tilde: vec![0.0, 0.0, -2.5],
            theta_tilde: BTreeMap::new(),
            lipschitz: 2.0,
            pen: PenaltyConfig::new(1.0, 0.3).unwrap(),
        };
        let fast = solve_isolated(&comp, &inp);
        assert_eq!(fast.beta, vec![-2.0]);
        assert!(fast.gap <= 1e-12);
        let slow = solve_component(&comp, &inp, &BcaOptions::default(), None);
        assert!((slow.beta[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn dominating_penalty_zeroes_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let comp = complete_component(4);
        let mut inp = random_input(&mut rng, &comp, 4);
        inp.pen = PenaltyConfig::new(1e6, 0.1).unwrap();
        let sol = solve_component(&comp, &inp, &BcaOptions::default(), None);
        assert!(sol.beta.iter().chain(&sol.theta).all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn gap_nonnegative_monotone_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for step in [BlockStep::Separable, BlockStep::Dimension] {
            for _ in 0..30 {
                let comp = complete_component(rng.random_range(2..7));
                let inp = random_input(&mut rng, &comp, comp.vertices.len());
                let opts = BcaOptions {
                    record_history: true,
                    step,
                    ..BcaOptions::default()
                };
                let sol = solve_component(&comp, &inp, &opts, None);
                assert!(sol.converged);
                assert!(sol.max_block_norm <= 1.0);
                assert!(sol.state.is_feasible(&comp));
                for w in sol.gap_history.windows(2) {
                    assert!(w[1] >= -1e-10);
                    assert!(w[1] <= w[0] + 1e-10);
                }
            }
        }
    }

    #[test]
    fn warm_start_reaches_same_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let comp = complete_component(5);
        let inp = random_input(&mut rng, &comp, 5);
        let cold = solve_component(&comp, &inp, &BcaOptions::default(), None);
        let warm = solve_component(&comp, &inp, &BcaOptions::default(), Some(cold.state.clone()));
        assert!(warm.sweeps <= 1);
        for (a, b) in cold.beta.iter().zip(&warm.beta) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
