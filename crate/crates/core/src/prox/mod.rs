//! Exact solver for the proximal step of the hierarchical penalty.
//!
//! The prox input is screened with the group and feature rules, the surviving
//! variables are split into connected components, and each component is solved
//! independently: isolated vertices by soft-thresholding, the rest by dual
//! block coordinate ascent.

mod dual;
mod graph;
mod threshold;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

pub use dual::{
    component_primal_objective, dual_gradient, dual_objective, solve_component, solve_isolated, BcaOptions,
    BlockStep, ComponentSolution, DualGradient, DualState, GAP_FLOOR,
};
pub use graph::{build_graph, screen_feature, screen_group, Component, InteractionGraph, UnionFind};
pub use threshold::{boxed_soft_threshold, l1_norm, project_l1_ball, project_l1_ball_in_place};

use crate::coef::{Coefficients, PenaltyConfig};
use crate::data::Pair;
use crate::error::{Error, Result};

/// Point to be mapped through the prox: `argmin L/2 ||x - x~||^2 + Omega(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxInput {
    pub beta_tilde: Vec<f64>,
    /// Absent pairs are exactly zero.
    pub theta_tilde: BTreeMap<Pair, f64>,
    pub lipschitz: f64,
    pub pen: PenaltyConfig,
}

impl ProxInput {
    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::invalid(format!("prox needs L > 0, got {}", self.lipschitz)));
        }
        let p = self.beta_tilde.len();
        for pair in self.theta_tilde.keys() {
            Pair::checked(pair.i, pair.j, p)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxOptions {
    pub bca: BcaOptions,
    /// Solve components on the rayon pool when there is enough work.
    pub parallel: bool,
}

impl Default for ProxOptions {
    fn default() -> Self {
        ProxOptions {
            bca: BcaOptions::default(),
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProxStats {
    pub components: usize,
    pub isolated: usize,
    pub max_component_vertices: usize,
    pub max_component_edges: usize,
    pub max_gap: f64,
    pub total_sweeps: usize,
    pub unconverged: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxOutput {
    pub coef: Coefficients,
    pub stats: ProxStats,
}

/// Dual warm starts keyed by component vertex set.
///
/// A component whose vertex set matches a cached one starts from the cached dual
/// point (weights of edges no longer present are dropped, new edges start at
/// zero). Entries not touched by the latest prox call are evicted.
#[derive(Clone, Debug, Default)]
pub struct DualCache {
    entries: HashMap<Vec<usize>, (Vec<Pair>, DualState)>,
}

impl DualCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn take(&mut self, component: &Component) -> Option<DualState> {
        let (edges, state) = self.entries.remove(&component.vertices)?;
        let w = component
            .edges
            .iter()
            .map(|e| edges.binary_search(e).map(|k| state.w[k]).unwrap_or([0.0; 2]))
            .collect();
        Some(DualState { u: state.u, w })
    }
}

/// Work (vertices + edges) below which components are solved sequentially.
const PAR_WORK: usize = 256;

/// Solves the prox problem exactly, with screening and decomposition.
pub fn prox(input: &ProxInput, opts: &ProxOptions) -> Result<ProxOutput> {
    prox_with_cache(input, opts, None)
}

/// [`prox`] with optional dual warm starts.
pub fn prox_with_cache(input: &ProxInput, opts: &ProxOptions, cache: Option<&mut DualCache>) -> Result<ProxOutput> {
    input.validate()?;
    let p = input.beta_tilde.len();
    let mut coef = Coefficients::zeros(p);

    if input.pen.lambda1 == 0.0 {
        // separable: identity on beta, soft-threshold on theta
        let gamma = input.pen.lambda2 / input.lipschitz;
        coef.beta.copy_from_slice(&input.beta_tilde);
        for (pair, t) in &input.theta_tilde {
            coef.set_theta(*pair, boxed_soft_threshold(*t, gamma));
        }
        return Ok(ProxOutput {
            coef,
            stats: ProxStats::default(),
        });
    }

    let graph = build_graph(input);
    let mut stats = ProxStats {
        components: graph.components.len(),
        max_component_vertices: graph.max_component_vertices(),
        max_component_edges: graph.max_component_edges(),
        ..ProxStats::default()
    };

    let mut jobs: Vec<(&Component, Option<DualState>)> = Vec::new();
    let mut cache = cache;
    for comp in &graph.components {
        if comp.is_singleton() {
            stats.isolated += 1;
            let v = comp.vertices[0];
            coef.beta[v] = boxed_soft_threshold(input.beta_tilde[v], input.pen.lambda1 / input.lipschitz);
        } else {
            let warm = cache.as_deref_mut().and_then(|c| c.take(comp));
            jobs.push((comp, warm));
        }
    }

    let work: usize = jobs.iter().map(|(c, _)| c.size()).sum();
    let run = |(comp, warm): (&Component, Option<DualState>)| solve_component(comp, input, &opts.bca, warm);
    let solutions: Vec<ComponentSolution> = if opts.parallel && jobs.len() > 1 && work >= PAR_WORK {
        jobs.clone().into_par_iter().map(run).collect()
    } else {
        jobs.clone().into_iter().map(run).collect()
    };

    let mut fresh = HashMap::new();
    for ((comp, _), sol) in jobs.iter().zip(solutions) {
        for (v, b) in comp.vertices.iter().zip(&sol.beta) {
            coef.beta[*v] = *b;
        }
        for (e, t) in comp.edges.iter().zip(&sol.theta) {
            coef.set_theta(*e, *t);
        }
        stats.max_gap = stats.max_gap.max(sol.gap);
        stats.total_sweeps += sol.sweeps;
        if !sol.converged {
            stats.unconverged += 1;
        }
        fresh.insert(comp.vertices.clone(), (comp.edges.clone(), sol.state));
    }
    if let Some(c) = cache {
        c.entries = fresh;
    }
    if stats.unconverged > 0 {
        log::debug!(
            "{} prox components hit the sweep limit (max gap {:.3e})",
            stats.unconverged,
            stats.max_gap
        );
    }
    Ok(ProxOutput { coef, stats })
}

/// Reference prox without screening or decomposition: one BCA run over every
/// vertex and every supplied pair.
pub fn prox_unscreened(input: &ProxInput, opts: &BcaOptions, warm: Option<DualState>) -> Result<(Coefficients, ComponentSolution)> {
    input.validate()?;
    let p = input.beta_tilde.len();
    let comp = Component {
        vertices: (0..p).collect(),
        edges: input.theta_tilde.keys().copied().collect(),
    };
    let sol = solve_component(&comp, input, opts, warm);
    let mut coef = Coefficients::zeros(p);
    coef.beta.copy_from_slice(&sol.beta);
    for (e, t) in comp.edges.iter().zip(&sol.theta) {
        coef.set_theta(*e, *t);
    }
    Ok((coef, sol))
}
