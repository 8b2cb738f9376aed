//! Test-only oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use ragkit::graph::{AttributedGraph, Topology};
use ragkit::model::{Covariance, EdgeLaw, ModelParams, NodeLaw};
use ragkit::{Morphism, RandomGraphModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every partial injective node map from `n` source nodes into `m` targets.
pub fn all_partial_injections(n: usize, m: usize) -> Vec<Vec<Option<usize>>> {
    fn rec(a: usize, n: usize, m: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if a == n {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        rec(a + 1, n, m, used, cur, out);
        cur.pop();
        for i in 0..m {
            if !used[i] {
                used[i] = true;
                cur.push(Some(i));
                rec(a + 1, n, m, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n, m, &mut vec![false; m], &mut Vec::new(), &mut out);
    out
}

/// Every bijection of `0..n`.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    all_partial_injections(n, n)
        .into_iter()
        .filter(|m| m.iter().all(Option::is_some))
        .map(|m| m.into_iter().map(Option::unwrap).collect())
        .collect()
}

/// Best log-likelihood over all morphisms, by exhaustive enumeration.
pub fn exhaustive_best(model: &RandomGraphModel, graph: &AttributedGraph) -> (Vec<Option<usize>>, f64) {
    let topo = model.topology();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for map in all_partial_injections(graph.node_count(), topo.node_count()) {
        let morph = Morphism::from_node_map(graph, &topo, map.clone()).unwrap();
        let ll = model.log_likelihood(graph, &morph).unwrap();
        if ll > best.1 {
            best = (map, ll);
        }
    }
    best
}

pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64, node_dim: usize, edge_dim: usize, spread: f64) -> AttributedGraph {
    let nodes = (0..n)
        .map(|_| (0..node_dim).map(|_| rng.random_range(-spread..spread)).collect())
        .collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(density) {
                edges.push((u, v, (0..edge_dim).map(|_| rng.random_range(-1.0..1.0)).collect()));
            }
        }
    }
    AttributedGraph::from_parts("r", None, nodes, edges)
}

/// Graph with nodes reordered: node `k` of the result is node `perm[k]` of `g`.
pub fn permute(g: &AttributedGraph, perm: &[usize]) -> AttributedGraph {
    let mut pos = vec![0; perm.len()];
    for (k, &old) in perm.iter().enumerate() {
        pos[old] = k;
    }
    let nodes = perm.iter().map(|&old| g.node_attr(old).to_vec()).collect();
    let edges = g
        .edges()
        .iter()
        .map(|e| (pos[e.u], pos[e.v], e.attr.to_vec()))
        .collect();
    AttributedGraph::from_parts(format!("{}-perm", g.id()), None, nodes, edges)
}

/// Random model with arbitrary probabilities and unit-scale Gaussians.
pub fn random_model(rng: &mut impl Rng, n: usize, max_edges: usize, node_dim: usize, edge_dim: usize) -> RandomGraphModel {
    let nodes = (0..n)
        .map(|_| NodeLaw {
            p_occur: rng.random_range(0.01..=0.99),
            mean: (0..node_dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            covariance: Covariance::scaled_identity(node_dim, rng.random_range(0.2..2.0)),
            occur_count: 0,
            update_count: 0,
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            pairs.push((u, v));
        }
    }
    use rand::seq::SliceRandom;
    pairs.shuffle(rng);
    let k = rng.random_range(0..=max_edges.min(pairs.len()));
    let edges = pairs[..k]
        .iter()
        .map(|&(u, v)| EdgeLaw {
            u,
            v,
            p_occur_given_endpoints: rng.random_range(0.01..=0.99),
            mean: (0..edge_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            covariance: Covariance::scaled_identity(edge_dim, 1.0),
            occur_count: 0,
            endpoint_copresence_count: 0,
            update_count: 0,
        })
        .collect();
    RandomGraphModel::from_laws("r", node_dim, edge_dim, nodes, edges, 0, ModelParams::default()).unwrap()
}

pub fn topology_of(g: &AttributedGraph) -> Topology {
    g.topology()
}
