//! Screening rules for the proximal problem and the graph of surviving variables.

use crate::coef::PenaltyConfig;
use crate::data::Pair;

use super::ProxInput;

/// Group-level rule: `true` when the whole group `i` (main effect and every
/// interaction containing `i`) is zero in the prox solution. Ties screen.
pub fn screen_group<I>(beta_tilde_i: f64, theta_tilde_group: I, pen: &PenaltyConfig, lipschitz: f64) -> bool
where
    I: IntoIterator<Item = f64>,
{
    let gamma2 = pen.lambda2 / lipschitz;
    let excess: f64 = theta_tilde_group.into_iter().map(|t| (t.abs() - gamma2).max(0.0)).sum();
    excess <= pen.lambda1 / lipschitz - beta_tilde_i.abs()
}

/// Feature-level rule: `true` when the single interaction is zero in the prox solution.
pub fn screen_feature(theta_tilde_ij: f64, pen: &PenaltyConfig, lipschitz: f64) -> bool {
    theta_tilde_ij.abs() <= pen.lambda2 / lipschitz
}

/// Disjoint-set forest with path compression and union by rank.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        UnionFind {
            parent: (0..len).collect(),
            rank: vec![0; len],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// One connected component: sorted vertices and sorted edges.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Component {
    pub vertices: Vec<usize>,
    pub edges: Vec<Pair>,
}

impl Component {
    pub fn is_singleton(&self) -> bool {
        self.vertices.len() == 1 && self.edges.is_empty()
    }

    pub fn size(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }
}

/// Vertices failing the group rule, edges failing the feature rule with both
/// endpoints surviving, and the connected components of that graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionGraph {
    pub vertices: Vec<usize>,
    pub edges: Vec<Pair>,
    /// Ordered by smallest vertex.
    pub components: Vec<Component>,
}

impl InteractionGraph {
    pub fn max_component_vertices(&self) -> usize {
        self.components.iter().map(|c| c.vertices.len()).max().unwrap_or(0)
    }

    pub fn max_component_edges(&self) -> usize {
        self.components.iter().map(|c| c.edges.len()).max().unwrap_or(0)
    }
}

/// Screens the prox input and decomposes the survivors into components.
pub fn build_graph(input: &ProxInput) -> InteractionGraph {
    let p = input.beta_tilde.len();
    let lip = input.lipschitz;
    let gamma1 = input.pen.lambda1 / lip;
    let gamma2 = input.pen.lambda2 / lip;

    let mut excess = vec![0.0; p];
    for (pair, t) in &input.theta_tilde {
        let e = (t.abs() - gamma2).max(0.0);
        excess[pair.i] += e;
        excess[pair.j] += e;
    }
    let alive: Vec<bool> = (0..p)
        .map(|i| !(excess[i] <= gamma1 - input.beta_tilde[i].abs()))
        .collect();
    let vertices: Vec<usize> = (0..p).filter(|&i| alive[i]).collect();
    let edges: Vec<Pair> = input
        .theta_tilde
        .iter()
        .filter(|(pair, t)| alive[pair.i] && alive[pair.j] && t.abs() > gamma2)
        .map(|(pair, _)| *pair)
        .collect();

    let mut uf = UnionFind::new(p);
    for e in &edges {
        uf.union(e.i, e.j);
    }
    // component slot per root, in order of first (smallest) vertex
    let mut slot = vec![usize::MAX; p];
    let mut components: Vec<Component> = Vec::new();
    for &v in &vertices {
        let r = uf.find(v);
        if slot[r] == usize::MAX {
            slot[r] = components.len();
            components.push(Component {
                vertices: Vec::new(),
                edges: Vec::new(),
            });
        }
        components[slot[r]].vertices.push(v);
    }
    for &e in &edges {
        let r = uf.find(e.i);
        components[slot[r]].edges.push(e);
    }
    InteractionGraph {
        vertices,
        edges,
        components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet, VecDeque};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pen(l1: f64, l2: f64) -> PenaltyConfig {
        PenaltyConfig::new(l1, l2).unwrap()
    }

    #[test]
    fn group_rule_examples() {
        assert!(screen_group(0.0, [0.0, 0.0], &pen(1.0, 0.5), 1.0));
        // lambda1/L = 1, lambda2/L = 0.1: 0.4 <= 0.7
        assert!(screen_group(0.3, [0.5], &pen(1.0, 0.1), 1.0));
        // same ratios with L = 4
        assert!(screen_group(0.3, [0.5], &pen(4.0, 0.4), 4.0));
        assert!(!screen_group(1.2, std::iter::empty(), &pen(1.0, 0.1), 1.0));
        // boundary: 0 <= 1 - 1
        assert!(screen_group(1.0, std::iter::empty(), &pen(1.0, 0.1), 1.0));
    }

    #[test]
    fn feature_rule_examples() {
        assert!(screen_feature(0.0, &pen(1.0, 0.0), 1.0));
        assert!(screen_feature(0.2, &pen(1.0, 0.3), 1.0));
        assert!(!screen_feature(0.2, &pen(1.0, 0.1), 1.0));
        assert!(screen_feature(0.3, &pen(1.0, 0.3), 1.0));
    }

    #[test]
    fn union_find_merges() {
        let mut uf = UnionFind::new(6);
        assert!(uf.union(0, 1));
        assert!(uf.union(2, 3));
        assert!(uf.union(1, 3));
        assert!(!uf.union(0, 2));
        assert_eq!(uf.find(0), uf.find(3));
        assert_ne!(uf.find(0), uf.find(4));
    }

    fn input(beta: Vec<f64>, theta: &[((usize, usize), f64)], l1: f64, l2: f64) -> ProxInput {
        ProxInput {
            beta_tilde: beta,
            theta_tilde: theta.iter().map(|&((i, j), v)| (Pair { i, j }, v)).collect(),
            lipschitz: 1.0,
            pen: pen(l1, l2),
        }
    }

    #[test]
    fn everything_screened() {
        let g = build_graph(&input(vec![0.5, -0.9, 0.0], &[], 1.0, 1.0));
        assert!(g.vertices.is_empty() && g.edges.is_empty() && g.components.is_empty());
    }

    #[test]
    fn minimal_graph() {
        let g = build_graph(&input(vec![5.0, -5.0, 0.0], &[((0, 1), 3.0)], 1.0, 1.0));
        assert_eq!(g.vertices, vec![0, 1]);
        assert_eq!(g.edges, vec![Pair { i: 0, j: 1 }]);
        assert_eq!(g.components.len(), 1);
        assert_eq!(g.components[0].vertices, vec![0, 1]);
    }

    #[test]
    fn edge_needs_both_endpoints() {
        // vertex 0 survives through its interaction, vertex 2 is screened
        let g = build_graph(&input(vec![0.0, 3.0, 0.0], &[((0, 2), 4.0)], 1.0, 1.0));
        assert_eq!(g.vertices, vec![0, 1, 2]);
        let g = build_graph(&input(vec![0.0, 3.0, 0.0], &[((0, 2), 1.8)], 1.0, 1.0));
        assert_eq!(g.vertices, vec![1]);
        assert!(g.edges.is_empty());
    }

    fn bfs_partition(vertices: &[usize], edges: &[Pair]) -> BTreeSet<BTreeSet<usize>> {
        let mut adj: BTreeMap<usize, Vec<usize>> = vertices.iter().map(|&v| (v, vec![])).collect();
        for e in edges {
            adj.get_mut(&e.i).unwrap().push(e.j);
            adj.get_mut(&e.j).unwrap().push(e.i);
        }
        let mut seen = BTreeSet::new();
        let mut parts = BTreeSet::new();
        for &s in vertices {
            if !seen.insert(s) {
                continue;
            }
            let mut part = BTreeSet::from([s]);
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for &w in &adj[&v] {
                    if seen.insert(w) {
                        part.insert(w);
                        q.push_back(w);
                    }
                }
            }
            parts.insert(part);
        }
        parts
    }

    #[test]
    fn components_match_bfs_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let p = rng.random_range(1..25);
            let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut theta = BTreeMap::new();
            for i in 0..p {
                for j in i + 1..p {
                    if rng.random_bool(0.15) {
                        theta.insert(Pair { i, j }, rng.random_range(-2.0..2.0));
                    }
                }
            }
            let inp = ProxInput {
                beta_tilde: beta,
                theta_tilde: theta,
                lipschitz: rng.random_range(0.5..2.0),
                pen: pen(rng.random_range(0.0..2.0), rng.random_range(0.0..1.0)),
            };
            let g = build_graph(&inp);
            // partition validity
            let mut seen = BTreeSet::new();
            for c in &g.components {
                for v in &c.vertices {
                    assert!(seen.insert(*v));
                }
                for e in &c.edges {
                    assert!(c.vertices.contains(&e.i) && c.vertices.contains(&e.j));
                }
            }
            assert_eq!(seen.into_iter().collect::<Vec<_>>(), g.vertices);
            assert_eq!(g.components.iter().map(|c| c.edges.len()).sum::<usize>(), g.edges.len());
            let ours: BTreeSet<BTreeSet<usize>> =
                g.components.iter().map(|c| c.vertices.iter().copied().collect()).collect();
            assert_eq!(ours, bfs_partition(&g.vertices, &g.edges));
            // screening consistency with the scalar rules
            for i in 0..p {
                let group = inp.theta_tilde.iter().filter(|(pr, _)| pr.contains(i)).map(|(_, v)| *v);
                let screened = screen_group(inp.beta_tilde[i], group, &inp.pen, inp.lipschitz);
                assert_eq!(screened, !g.vertices.contains(&i));
            }
        }
    }
}
