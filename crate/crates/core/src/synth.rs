//! Two-class synthetic datasets: Erdős–Rényi base graphs with Gaussian
//! attributes, corrupted at a controlled distortion level.
//!
//! Every sample draws from its own ChaCha stream keyed by
//! `(seed, split, class, sample index)`, so growing `per_class` leaves the
//! earlier samples untouched.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Edge, GraphDataset, Node};

/// Retries allowed when a distortion deletes every base node.
pub const MAX_DISTORT_ATTEMPTS: usize = 10;

const STREAM_BASE: u64 = 0xB45E;
const STREAM_SAMPLE: u64 = 0x5A3B;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistortionSpec {
    /// Per-element modification probability and attribute-noise factor.
    pub level: f64,
    pub base_nodes: usize,
    pub edge_density: f64,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub attr_noise_sigma: f64,
    pub seed: u64,
}

impl Default for DistortionSpec {
    fn default() -> Self {
        Self {
            level: 0.05,
            base_nodes: 10,
            edge_density: 0.4,
            node_dim: 2,
            edge_dim: 1,
            attr_noise_sigma: 1.0,
            seed: 7,
        }
    }
}

impl DistortionSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(0.0..=1.0).contains(&self.level) {
            return bad(format!("distortion level {} outside [0, 1]", self.level));
        }
        if self.base_nodes < 2 {
            return bad("base graphs need at least 2 nodes".into());
        }
        if !(self.edge_density > 0.0 && self.edge_density <= 1.0) {
            return bad(format!("edge density {} outside (0, 1]", self.edge_density));
        }
        if self.node_dim == 0 || self.edge_dim == 0 {
            return bad("attribute dimensions must be positive".into());
        }
        if !(self.attr_noise_sigma > 0.0 && self.attr_noise_sigma.is_finite()) {
            return bad("attr_noise_sigma must be positive".into());
        }
        Ok(())
    }
}

/// Which split a sample belongs to; part of its stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train = 0,
    Test = 1,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent random stream for a key path.
pub fn keyed_rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut state = seed;
    for &k in key {
        state = splitmix64(&mut state) ^ k;
    }
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize, center: f64, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| center + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn node_id(i: usize) -> String {
    format!("n{i:03}")
}

/// Category names used by [`make_dataset`].
pub fn category_names() -> Vec<String> {
    vec!["class0".to_string(), "class1".to_string()]
}

/// Connected Erdős–Rényi base graph: a random spanning tree plus every other
/// pair with probability `edge_density`. Node attributes are drawn around
/// the class center `±(1, ..., 1) / sqrt(node_dim)`, edge attributes around 0.
pub fn generate_base<R: Rng>(spec: &DistortionSpec, class: usize, rng: &mut R) -> Result<AttributedGraph> {
    spec.validate()?;
    let n = spec.base_nodes;
    let sign = if class % 2 == 0 { 1.0 } else { -1.0 };
    let center = sign / (spec.node_dim as f64).sqrt();
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            id: node_id(i),
            attr: gaussian_vec(rng, spec.node_dim, center, 1.0).into(),
        })
        .collect();

    let mut adjacent = vec![false; n * n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        let child = order[k];
        adjacent[parent * n + child] = true;
        adjacent[child * n + parent] = true;
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let present = adjacent[u * n + v] || rng.random_bool(spec.edge_density);
            if present {
                edges.push(Edge {
                    u,
                    v,
                    attr: gaussian_vec(rng, spec.edge_dim, 0.0, 1.0).into(),
                });
            }
        }
    }
    let label = category_names().get(class).cloned();
    Ok(AttributedGraph::new(format!("base-{class}"), label, nodes, edges))
}

/// What a distortion did to its base graph.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistortionReport {
    pub attempts: usize,
    pub deleted_nodes: usize,
    pub deleted_edges: usize,
    pub spurious_edges: usize,
    pub spurious_node: bool,
    /// Base node index of each output node, `None` for the spurious node.
    pub origin: Vec<Option<usize>>,
}

/// Corrupts `base`: Bernoulli(level) node and edge deletions, spurious edges
/// with probability `level * edge_density` per absent pair, at most one
/// spurious node (probability `level`), attribute noise with standard
/// deviation `level * attr_noise_sigma`, and a random node permutation.
pub fn distort<R: Rng>(
    base: &AttributedGraph,
    spec: &DistortionSpec,
    rng: &mut R,
) -> Result<(AttributedGraph, DistortionReport)> {
    spec.validate()?;
    let level = spec.level;
    let noise = level * spec.attr_noise_sigma;
    let n = base.node_count();
    let mut report = DistortionReport::default();

    let mut keep = vec![false; n];
    loop {
        if report.attempts == MAX_DISTORT_ATTEMPTS {
            return Err(Error::DistortionExhausted(MAX_DISTORT_ATTEMPTS));
        }
        report.attempts += 1;
        for k in keep.iter_mut() {
            *k = !rng.random_bool(level);
        }
        if keep.iter().any(|&k| k) {
            break;
        }
    }
    report.deleted_nodes = keep.iter().filter(|&&k| !k).count();

    let mut origin: Vec<Option<usize>> = (0..n).filter(|&i| keep[i]).map(Some).collect();
    let mut new_index = vec![usize::MAX; n];
    for (k, o) in origin.iter().enumerate() {
        new_index[o.unwrap()] = k;
    }
    let mut attrs: Vec<Vec<f64>> = origin
        .iter()
        .map(|o| {
            let x = base.node_attr(o.unwrap());
            x.iter()
                .map(|v| v + noise * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let mut edges: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for e in base.edges() {
        if !(keep[e.u] && keep[e.v]) {
            continue;
        }
        if rng.random_bool(level) {
            report.deleted_edges += 1;
            continue;
        }
        let attr = e
            .attr
            .iter()
            .map(|v| v + noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        edges.push((new_index[e.u], new_index[e.v], attr));
    }

    if rng.random_bool(level) {
        report.spurious_node = true;
        origin.push(None);
        attrs.push(gaussian_vec(rng, spec.node_dim, 0.0, 1.0));
    }

    let m = origin.len();
    let mut adjacent = vec![false; m * m];
    for &(u, v, _) in &edges {
        adjacent[u * m + v] = true;
        adjacent[v * m + u] = true;
    }
    let spurious_p = (level * spec.edge_density).min(1.0);
    for u in 0..m {
        for v in u + 1..m {
            if !adjacent[u * m + v] && rng.random_bool(spurious_p) {
                report.spurious_edges += 1;
                edges.push((u, v, gaussian_vec(rng, spec.edge_dim, 0.0, 1.0)));
            }
        }
    }

    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(rng);
    // perm[new position] = pre-permutation index
    let mut position = vec![0; m];
    for (p, &old) in perm.iter().enumerate() {
        position[old] = p;
    }
    let nodes = perm
        .iter()
        .enumerate()
        .map(|(p, &old)| Node {
            id: node_id(p),
            attr: attrs[old].clone().into(),
        })
        .collect();
    let edges = edges
        .into_iter()
        .map(|(u, v, attr)| Edge {
            u: position[u],
            v: position[v],
            attr: attr.into(),
        })
        .collect();
    report.origin = perm.iter().map(|&old| origin[old]).collect();
    let graph = AttributedGraph::new(base.id().to_string(), base.label().map(str::to_string), nodes, edges)
        .canonical_order();
    Ok((graph, report))
}

/// The two class base graphs of a spec.
pub fn base_graphs(spec: &DistortionSpec) -> Result<Vec<AttributedGraph>> {
    (0..2)
        .map(|class| generate_base(spec, class, &mut keyed_rng(spec.seed, &[STREAM_BASE, class as u64])))
        .collect()
}

/// One distorted sample of `class` from its own keyed stream.
pub fn sample(
    spec: &DistortionSpec,
    base: &AttributedGraph,
    split: Split,
    class: usize,
    index: usize,
) -> Result<AttributedGraph> {
    let mut rng = keyed_rng(spec.seed, &[STREAM_SAMPLE, split as u64, class as u64, index as u64]);
    let (g, _) = distort(base, spec, &mut rng)?;
    Ok(g.with_id(format!("{}-c{class}-{index:04}", split.name())))
}

/// Train and test sets with `per_class` distorted copies of each class base
/// graph per split, classes interleaved.
pub fn make_dataset(spec: &DistortionSpec, per_class: usize) -> Result<(GraphDataset, GraphDataset)> {
    spec.validate()?;
    if per_class == 0 {
        return Err(Error::InvalidParameter("per_class must be at least 1".into()));
    }
    let bases = base_graphs(spec)?;
    let split = |s: Split| -> Result<GraphDataset> {
        let mut graphs = Vec::with_capacity(2 * per_class);
        for index in 0..per_class {
            for (class, base) in bases.iter().enumerate() {
                graphs.push(sample(spec, base, s, class, index)?);
            }
        }
        GraphDataset::new(spec.node_dim, spec.edge_dim, category_names(), graphs)
    };
    Ok((split(Split::Train)?, split(Split::Test)?))
}
