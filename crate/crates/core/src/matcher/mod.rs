//! Graduated-assignment matching of an attributed graph against a target
//! structure (a random graph model or another graph).
//!
//! The soft assignment is annealed in `beta`; at every temperature the
//! compatibilities are linearized around the current match matrix, the
//! matrix is re-estimated as `exp(beta * Q)` and pushed towards double
//! stochasticity with Sinkhorn sweeps. The converged matrix is discretized
//! greedily into a partial injective [`Morphism`], which a short discrete
//! local search then polishes against the exact score.

mod compat;
mod refine;
mod sinkhorn;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use compat::{likelihood_compatibility, GaussianKernelCompatibility, LikelihoodCompatibility};
pub use sinkhorn::{sinkhorn_normalize, MatchMatrix};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Topology};

/// Entries of the soft matrix never drop below this value.
const ENTRY_FLOOR: f64 = 1e-300;

/// Annealing parameters of the graduated assignment loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSchedule {
    pub beta_initial: f64,
    pub beta_rate: f64,
    pub beta_final: f64,
    pub sinkhorn_iters: usize,
    pub assignment_iters_per_beta: usize,
    /// Sweeps of discrete local search after discretization; 0 disables it.
    pub local_search_passes: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            beta_initial: 0.5,
            beta_rate: 1.075,
            beta_final: 10.0,
            sinkhorn_iters: 30,
            assignment_iters_per_beta: 4,
            local_search_passes: 16,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("anneal schedule: {msg}")));
        if !(self.beta_initial > 0.0 && self.beta_initial.is_finite()) {
            return bad("beta_initial must be positive");
        }
        if !(self.beta_rate > 1.0 && self.beta_rate.is_finite()) {
            return bad("beta_rate must exceed 1");
        }
        if !(self.beta_final.is_finite() && self.beta_initial < self.beta_final) {
            return bad("beta_initial must be below beta_final");
        }
        if self.sinkhorn_iters == 0 || self.assignment_iters_per_beta == 0 {
            return bad("iteration counts must be positive");
        }
        Ok(())
    }

    /// Applies `key=value` overrides, e.g. `beta_final=20,sinkhorn_iters=50`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{part}`")))?;
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("`{v}` is not a number")))
            };
            let int = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidParameter(format!("`{v}` is not an integer")))
            };
            match key.trim() {
                "beta_initial" => self.beta_initial = num(value)?,
                "beta_rate" => self.beta_rate = num(value)?,
                "beta_final" => self.beta_final = num(value)?,
                "sinkhorn_iters" => self.sinkhorn_iters = int(value)?,
                "assignment_iters_per_beta" => self.assignment_iters_per_beta = int(value)?,
                "local_search_passes" => self.local_search_passes = int(value)?,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown schedule parameter `{other}`"
                    )))
                }
            }
        }
        self.validate()?;
        Ok(self)
    }
}

/// Log-space compatibilities between a source graph and a target structure.
///
/// Source elements are identified by their attribute vectors, target
/// elements by index into [`Compatibility::target`]. Every method must be
/// total; `-inf` is allowed and means "never".
pub trait Compatibility {
    fn target(&self) -> &Topology;

    /// Source node with attribute `attr` assigned to target node `target`.
    fn node(&self, attr: &[f64], target: usize) -> f64;

    /// Source edge assigned to target edge `target_edge`.
    fn edge(&self, attr: &[f64], target_edge: usize) -> f64;

    /// Source node left unmatched.
    fn node_unmatched(&self, _attr: &[f64]) -> f64 {
        0.0
    }

    /// Target node left unmatched.
    fn target_node_unmatched(&self, _target: usize) -> f64 {
        0.0
    }

    /// Source edge with no target counterpart.
    fn edge_unmatched(&self, _attr: &[f64]) -> f64 {
        0.0
    }

    /// Target edge whose endpoints are both matched but which has no source
    /// edge between their preimages.
    fn target_edge_absent(&self, _target_edge: usize) -> f64 {
        0.0
    }
}

/// Partial injective map from source nodes/edges to target nodes/edges;
/// `None` is the empty image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Morphism {
    pub node_map: Vec<Option<usize>>,
    pub edge_map: Vec<Option<usize>>,
}

impl Morphism {
    /// Derives the edge map: a source edge maps to the target edge joining
    /// the images of its endpoints, if both are mapped and that edge exists.
    pub fn from_node_map(
        source: &AttributedGraph,
        target: &Topology,
        node_map: Vec<Option<usize>>,
    ) -> Result<Self> {
        if node_map.len() != source.node_count() {
            return Err(Error::BadMorphism(format!(
                "node map covers {} nodes, graph has {}",
                node_map.len(),
                source.node_count()
            )));
        }
        let edge_map = source
            .edges()
            .iter()
            .map(|e| match (node_map[e.u], node_map[e.v]) {
                (Some(i), Some(j)) if i < target.node_count() && j < target.node_count() => {
                    target.edge_between(i, j)
                }
                _ => None,
            })
            .collect();
        let m = Self { node_map, edge_map };
        m.validate(source, target)?;
        Ok(m)
    }

    /// Every source element unmatched.
    pub fn empty(source: &AttributedGraph) -> Self {
        Self {
            node_map: vec![None; source.node_count()],
            edge_map: vec![None; source.edge_count()],
        }
    }

    pub fn identity(source: &AttributedGraph) -> Self {
        Self {
            node_map: (0..source.node_count()).map(Some).collect(),
            edge_map: (0..source.edge_count()).map(Some).collect(),
        }
    }

    /// Checks injectivity, index ranges and edge/endpoint consistency.
    pub fn validate(&self, source: &AttributedGraph, target: &Topology) -> Result<()> {
        let bad = |msg: String| Err(Error::BadMorphism(msg));
        if self.node_map.len() != source.node_count() {
            return bad(format!(
                "node map covers {} nodes, graph has {}",
                self.node_map.len(),
                source.node_count()
            ));
        }
        if self.edge_map.len() != source.edge_count() {
            return bad(format!(
                "edge map covers {} edges, graph has {}",
                self.edge_map.len(),
                source.edge_count()
            ));
        }
        let mut used = vec![false; target.node_count()];
        for (a, image) in self.node_map.iter().enumerate() {
            if let Some(i) = *image {
                if i >= target.node_count() {
                    return bad(format!("node {a} maps to missing target node {i}"));
                }
                if std::mem::replace(&mut used[i], true) {
                    return bad(format!("target node {i} has two preimages"));
                }
            }
        }
        let mut used = vec![false; target.edge_count()];
        for (k, image) in self.edge_map.iter().enumerate() {
            let e = &source.edges()[k];
            let expected = match (self.node_map[e.u], self.node_map[e.v]) {
                (Some(i), Some(j)) => target.edge_between(i, j),
                _ => None,
            };
            if *image != expected {
                return bad(format!(
                    "edge {k} maps to {image:?}, endpoints imply {expected:?}"
                ));
            }
            if let Some(t) = *image {
                if std::mem::replace(&mut used[t], true) {
                    return bad(format!("target edge {t} has two preimages"));
                }
            }
        }
        Ok(())
    }

    pub fn matched_nodes(&self) -> usize {
        self.node_map.iter().flatten().count()
    }

    /// Target node -> source node.
    pub fn inverse_nodes(&self, target_nodes: usize) -> Vec<Option<usize>> {
        let mut inv = vec![None; target_nodes];
        for (a, i) in self.node_map.iter().enumerate() {
            if let Some(i) = *i {
                inv[i] = Some(a);
            }
        }
        inv
    }

    /// Target edge -> source edge.
    pub fn inverse_edges(&self, target_edges: usize) -> Vec<Option<usize>> {
        let mut inv = vec![None; target_edges];
        for (e, t) in self.edge_map.iter().enumerate() {
            if let Some(t) = *t {
                inv[t] = Some(e);
            }
        }
        inv
    }
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    pub morphism: Morphism,
    /// Converged soft assignment, slack row and column included.
    pub soft: MatchMatrix,
    /// Total compatibility of the discrete morphism.
    pub score: f64,
}

/// Runs matches under a fixed schedule and counts every call.
#[derive(Debug, Default)]
pub struct Matcher {
    schedule: AnnealSchedule,
    calls: AtomicU64,
}

impl Matcher {
    pub fn new(schedule: AnnealSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            schedule,
            calls: AtomicU64::new(0),
        })
    }

    pub fn schedule(&self) -> &AnnealSchedule {
        &self.schedule
    }

    /// Number of match calls issued so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) -> u64 {
        self.calls.swap(0, Ordering::Relaxed)
    }

    pub fn run<C: Compatibility + ?Sized>(
        &self,
        source: &AttributedGraph,
        compat: &C,
    ) -> Result<MatchResult> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match_graph(source, compat, &self.schedule)
    }
}

/// Dense compatibility tables for one (source, target) pair.
pub(crate) struct Tables {
    n: usize,
    m: usize,
    node: Vec<f64>,
    source_slack: Vec<f64>,
    target_slack: Vec<f64>,
    /// `edge(e, t) - edge_unmatched(e)`, indexed `e * target_edges + t`.
    edge_gain: Vec<f64>,
    target_absent: Vec<f64>,
    target_edges: usize,
}

impl Tables {
    fn build<C: Compatibility + ?Sized>(source: &AttributedGraph, compat: &C) -> Self {
        let target = compat.target();
        let n = source.node_count();
        let m = target.node_count();
        let te = target.edge_count();
        let mut node = Vec::with_capacity(n * m);
        for a in 0..n {
            let attr = source.node_attr(a);
            node.extend((0..m).map(|i| compat.node(attr, i)));
        }
        let source_slack = (0..n).map(|a| compat.node_unmatched(source.node_attr(a))).collect();
        let target_slack = (0..m).map(|i| compat.target_node_unmatched(i)).collect();
        let mut edge_gain = Vec::with_capacity(source.edge_count() * te);
        for e in 0..source.edge_count() {
            let attr = source.edge_attr(e);
            let base = compat.edge_unmatched(attr);
            edge_gain.extend((0..te).map(|t| compat.edge(attr, t) - base));
        }
        let target_absent = (0..te).map(|t| compat.target_edge_absent(t)).collect();
        Self {
            n,
            m,
            node,
            source_slack,
            target_slack,
            edge_gain,
            target_absent,
            target_edges: te,
        }
    }
}

/// Graduated-assignment match of `source` against `compat.target()`.
pub fn match_graph<C: Compatibility + ?Sized>(
    source: &AttributedGraph,
    compat: &C,
    schedule: &AnnealSchedule,
) -> Result<MatchResult> {
    if source.is_empty() {
        return Err(Error::EmptyInput("source graph has no nodes"));
    }
    schedule.validate()?;
    let target = compat.target();
    let tables = Tables::build(source, compat);
    let (n, m) = (tables.n, tables.m);
    let w = m + 1;

    let mut soft = MatchMatrix::filled(n, m, true, 1.0 / w as f64);
    soft.set(n, m, 0.0);
    if m > 0 {
        let src_topo = source.topology();
        let has_absent = tables.target_absent.iter().any(|&h| h != 0.0);
        let mut q = vec![0.0; n * m];
        let mut col_mass = vec![0.0; m];
        let mut nbr_mass = vec![0.0; m];
        let mut beta = schedule.beta_initial;
        while beta < schedule.beta_final {
            for _ in 0..schedule.assignment_iters_per_beta {
                linearize(&tables, &src_topo, target, &soft, has_absent, &mut q, &mut col_mass, &mut nbr_mass);
                exponentiate(&tables, &q, beta, &mut soft);
                soft.sinkhorn_unchecked(schedule.sinkhorn_iters);
                floor_entries(&mut soft);
            }
            beta *= schedule.beta_rate;
        }
        soft.settle();
    } else {
        for a in 0..n {
            soft.set(a, 0, 1.0);
        }
    }

    let mut node_map = discretize(&soft);
    if m > 0 && schedule.local_search_passes > 0 {
        let src_topo = source.topology();
        refine::polish(&tables, &src_topo, target, &mut node_map, schedule.local_search_passes);
    }
    let morphism = Morphism::from_node_map(source, target, node_map)?;
    let score = morphism_score(source, compat, &morphism);
    Ok(MatchResult {
        morphism,
        soft,
        score,
    })
}

/// Gradient of the quadratic assignment objective at the current soft
/// matrix: `q[a, i] = node(a, i) + sum_{b, j} M[b, j] C(ab, ij)`.
#[allow(clippy::too_many_arguments)]
fn linearize(
    t: &Tables,
    src: &Topology,
    target: &Topology,
    soft: &MatchMatrix,
    has_absent: bool,
    q: &mut [f64],
    col_mass: &mut [f64],
    nbr_mass: &mut [f64],
) {
    let (n, m) = (t.n, t.m);
    let w = m + 1;
    let data = soft.data();
    if has_absent {
        col_mass.iter_mut().for_each(|v| *v = 0.0);
        for b in 0..n {
            for j in 0..m {
                col_mass[j] += data[b * w + j];
            }
        }
    }
    for a in 0..n {
        let src_nbrs = src.neighbors(a);
        if has_absent {
            nbr_mass.iter_mut().for_each(|v| *v = 0.0);
            for &(b, _) in src_nbrs {
                for j in 0..m {
                    nbr_mass[j] += data[b * w + j];
                }
            }
        }
        for i in 0..m {
            let mut acc = t.node[a * m + i];
            let tgt_nbrs = target.neighbors(i);
            for &(b, e) in src_nbrs {
                let gains = &t.edge_gain[e * t.target_edges..(e + 1) * t.target_edges];
                let row = &data[b * w..b * w + m];
                for &(j, te) in tgt_nbrs {
                    acc += row[j] * gains[te];
                }
            }
            if has_absent {
                for &(j, te) in tgt_nbrs {
                    let free = col_mass[j] - data[a * w + j] - nbr_mass[j];
                    acc += t.target_absent[te] * free.max(0.0);
                }
            }
            q[a * m + i] = acc;
        }
    }
}

/// Sets `soft = exp(beta * Q)` with real rows normalized in log space. The
/// slack row keeps its absolute scale because it is never row-normalized.
fn exponentiate(t: &Tables, q: &[f64], beta: f64, soft: &mut MatchMatrix) {
    let (n, m) = (t.n, t.m);
    let w = m + 1;
    let data = soft.data_mut();
    let mut logits = vec![0.0; w];
    for a in 0..n {
        for i in 0..m {
            logits[i] = beta * q[a * m + i];
        }
        logits[m] = beta * t.source_slack[a];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let row = &mut data[a * w..(a + 1) * w];
        if max == f64::NEG_INFINITY {
            row.iter_mut().for_each(|v| *v = 1.0 / w as f64);
            continue;
        }
        let mut sum = 0.0;
        for (v, &l) in row.iter_mut().zip(&logits) {
            *v = (l - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = (*v / sum).max(ENTRY_FLOOR);
        }
    }
    for i in 0..m {
        data[n * w + i] = (beta * t.target_slack[i]).exp().max(ENTRY_FLOOR);
    }
    data[n * w + m] = 0.0;
}

fn floor_entries(soft: &mut MatchMatrix) {
    let (n, m) = (soft.rows(), soft.cols());
    let w = m + 1;
    for (k, v) in soft.data_mut().iter_mut().enumerate() {
        if k != n * w + m && !(*v >= ENTRY_FLOOR) {
            *v = ENTRY_FLOOR;
        }
    }
}

/// Greedy discretization: repeatedly fix the largest remaining entry and
/// strike its row and column. Slack entries leave the element unmatched and
/// strike only the real row (or column). Ties go to the lowest
/// (row, column) pair.
fn discretize(soft: &MatchMatrix) -> Vec<Option<usize>> {
    let (n, m) = (soft.rows(), soft.cols());
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity((n + 1) * (m + 1));
    for r in 0..=n {
        for c in 0..=m {
            if r == n && c == m {
                continue;
            }
            entries.push((soft.get(r, c), r, c));
        }
    }
    entries.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut node_map = vec![None; n];
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; m];
    let mut remaining = n;
    for (_, r, c) in entries {
        if remaining == 0 {
            break;
        }
        match (r < n, c < m) {
            (true, true) => {
                if !row_done[r] && !col_done[c] {
                    row_done[r] = true;
                    col_done[c] = true;
                    node_map[r] = Some(c);
                    remaining -= 1;
                }
            }
            (true, false) => {
                if !row_done[r] {
                    row_done[r] = true;
                    remaining -= 1;
                }
            }
            (false, true) => col_done[c] = true,
            (false, false) => unreachable!(),
        }
    }
    node_map
}

/// Total compatibility of a discrete morphism.
pub fn morphism_score<C: Compatibility + ?Sized>(
    source: &AttributedGraph,
    compat: &C,
    morphism: &Morphism,
) -> f64 {
    let target = compat.target();
    let mut score = 0.0;
    let inv_nodes = morphism.inverse_nodes(target.node_count());
    for (a, image) in morphism.node_map.iter().enumerate() {
        let attr = source.node_attr(a);
        score += match image {
            Some(i) => compat.node(attr, *i),
            None => compat.node_unmatched(attr),
        };
    }
    for (i, pre) in inv_nodes.iter().enumerate() {
        if pre.is_none() {
            score += compat.target_node_unmatched(i);
        }
    }
    let inv_edges = morphism.inverse_edges(target.edge_count());
    for (e, image) in morphism.edge_map.iter().enumerate() {
        let attr = source.edge_attr(e);
        score += match image {
            Some(t) => compat.edge(attr, *t),
            None => compat.edge_unmatched(attr),
        };
    }
    for (t, &(i, j)) in target.edges().iter().enumerate() {
        if inv_edges[t].is_none() && inv_nodes[i].is_some() && inv_nodes[j].is_some() {
            score += compat.target_edge_absent(t);
        }
    }
    score
}
