//! Random attributed graph models.
//!
//! A model is a prototype graph whose nodes and edges are random variables:
//! a Bernoulli occurrence (edges conditional on both endpoints occurring)
//! and a Gaussian attribute law. Occurrence probabilities are occurrence
//! frequencies over the presented samples; means follow the natural-gradient
//! step `mu += eta (x - mu)` and covariances the first-order rule
//! `S = (1 - eta) S + eta (x - mu)(x - mu)^T`, floored to stay positive
//! definite.

pub mod gaussian;

use serde::{Deserialize, Serialize};

pub use gaussian::{Covariance, GaussianLogDensity};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Topology};
use crate::matcher::{likelihood_compatibility, Matcher, Morphism};

/// Learning-rate rule for the online attribute updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaRule {
    /// `eta_t = 1 / t`, `t` the element's update count including this update.
    InverseCount,
    Constant { eta: f64 },
}

impl EtaRule {
    pub fn rate(&self, t: u64) -> f64 {
        match *self {
            EtaRule::InverseCount => 1.0 / t.max(1) as f64,
            EtaRule::Constant { eta } => eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EtaRule::Constant { eta } if !(eta > 0.0 && eta <= 1.0) => Err(
                Error::InvalidParameter(format!("learning rate {eta} outside (0, 1]")),
            ),
            _ => Ok(()),
        }
    }
}

/// Hyperparameters shared by every law of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Initial covariance scale, `sigma0^2 I`.
    pub sigma0_sq: f64,
    /// Eigenvalue floor applied after every covariance update.
    pub lambda_min: f64,
    /// Density charged to outcome elements with no model counterpart.
    pub epsilon_outlier: f64,
    /// Probabilities are clamped to `[p_min, 1 - p_min]` before logarithms.
    pub p_min: f64,
    pub eta: EtaRule,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            sigma0_sq: 1.0,
            lambda_min: 1e-4,
            epsilon_outlier: 1e-6,
            p_min: 1e-6,
            eta: EtaRule::InverseCount,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.sigma0_sq > 0.0 && self.sigma0_sq.is_finite()) {
            return bad(format!("sigma0_sq must be positive, got {}", self.sigma0_sq));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min.is_finite()) {
            return bad(format!("lambda_min must be positive, got {}", self.lambda_min));
        }
        if !(self.epsilon_outlier > 0.0 && self.epsilon_outlier.is_finite()) {
            return bad(format!("epsilon_outlier must be positive, got {}", self.epsilon_outlier));
        }
        if !(self.p_min > 0.0 && self.p_min < 0.5) {
            return bad(format!("p_min must lie in (0, 0.5), got {}", self.p_min));
        }
        self.eta.validate()
    }

    fn ln_p(&self, p: f64) -> f64 {
        p.clamp(self.p_min, 1.0 - self.p_min).ln()
    }

    fn ln_q(&self, p: f64) -> f64 {
        (1.0 - p.clamp(self.p_min, 1.0 - self.p_min)).ln()
    }
}

/// Occurrence and attribute law of one model node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLaw {
    pub p_occur: f64,
    pub mean: Vec<f64>,
    pub covariance: Covariance,
    pub occur_count: u64,
    pub update_count: u64,
}

/// Occurrence (conditional on both endpoints) and attribute law of one
/// model edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLaw {
    pub u: usize,
    pub v: usize,
    pub p_occur_given_endpoints: f64,
    pub mean: Vec<f64>,
    pub covariance: Covariance,
    pub occur_count: u64,
    pub endpoint_copresence_count: u64,
    pub update_count: u64,
}

/// Which factors of the outcome probability to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikelihoodMode {
    #[default]
    Full,
    /// Occurrence factors only, attribute densities skipped.
    StructureOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomGraphModel {
    category: String,
    node_dim: usize,
    edge_dim: usize,
    nodes: Vec<NodeLaw>,
    edges: Vec<EdgeLaw>,
    sample_count: u64,
    params: ModelParams,
}

impl RandomGraphModel {
    /// Assembles and validates a model from explicit laws.
    pub fn from_laws(
        category: impl Into<String>,
        node_dim: usize,
        edge_dim: usize,
        nodes: Vec<NodeLaw>,
        edges: Vec<EdgeLaw>,
        sample_count: u64,
        params: ModelParams,
    ) -> Result<Self> {
        let m = Self {
            category: category.into(),
            node_dim,
            edge_dim,
            nodes,
            edges,
            sample_count,
            params,
        };
        m.validate()?;
        Ok(m)
    }

    /// Model with no nodes: every outcome element is an outlier.
    pub fn empty(category: impl Into<String>, node_dim: usize, edge_dim: usize, params: ModelParams) -> Self {
        Self {
            category: category.into(),
            node_dim,
            edge_dim,
            nodes: Vec::new(),
            edges: Vec::new(),
            sample_count: 0,
            params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let n = self.nodes.len();
        let mut pairs = std::collections::HashSet::new();
        for (k, e) in self.edges.iter().enumerate() {
            if e.u >= n || e.v >= n || e.u == e.v {
                return Err(Error::InvalidParameter(format!(
                    "model edge {k} has invalid endpoints ({}, {})",
                    e.u, e.v
                )));
            }
            if !pairs.insert(crate::graph::ordered(e.u, e.v)) {
                return Err(Error::InvalidParameter(format!("model edge {k} is a duplicate")));
            }
        }
        let law_ok = |p: f64, mean: &[f64], cov: &Covariance, dim: usize, what: &str| -> Result<()> {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{what} probability {p} outside [0, 1]")));
            }
            if mean.len() != dim || cov.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: mean.len(),
                    context: "model law",
                });
            }
            Ok(())
        };
        for node in &self.nodes {
            law_ok(node.p_occur, &node.mean, &node.covariance, self.node_dim, "node")?;
            if node.occur_count > self.sample_count {
                return Err(Error::InvalidParameter("node occur_count exceeds sample_count".into()));
            }
        }
        for edge in &self.edges {
            law_ok(edge.p_occur_given_endpoints, &edge.mean, &edge.covariance, self.edge_dim, "edge")?;
            if edge.occur_count > self.sample_count {
                return Err(Error::InvalidParameter("edge occur_count exceeds sample_count".into()));
            }
        }
        Ok(())
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    pub fn nodes(&self) -> &[NodeLaw] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeLaw] {
        &self.edges
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn epsilon_outlier(&self) -> f64 {
        self.params.epsilon_outlier
    }

    pub fn topology(&self) -> Topology {
        Topology::new(self.nodes.len(), self.edges.iter().map(|e| (e.u, e.v)))
    }

    /// Clamped `ln p`.
    pub fn ln_p(&self, p: f64) -> f64 {
        self.params.ln_p(p)
    }

    /// Clamped `ln (1 - p)`.
    pub fn ln_q(&self, p: f64) -> f64 {
        self.params.ln_q(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Prototype initialized from the largest graph (most nodes, first in
    /// the given order on ties): means at that graph's attributes,
    /// covariances `sigma0^2 I`, every probability 1 from one sample.
    pub fn init_prototype(
        category: impl Into<String>,
        node_dim: usize,
        edge_dim: usize,
        graphs: &[&AttributedGraph],
        params: ModelParams,
    ) -> Result<Self> {
        let category = category.into();
        params.validate()?;
        let largest = graphs
            .iter()
            .copied()
            .reduce(|best, g| if g.node_count() > best.node_count() { g } else { best })
            .ok_or_else(|| Error::EmptyClass(category.clone()))?;
        largest.validate(node_dim, edge_dim)?;
        let g = largest.canonical_order();
        let nodes = g
            .nodes()
            .iter()
            .map(|n| NodeLaw {
                p_occur: 1.0,
                mean: n.attr.to_vec(),
                covariance: Covariance::scaled_identity(node_dim, params.sigma0_sq),
                occur_count: 1,
                update_count: 1,
            })
            .collect();
        let edges = g
            .edges()
            .iter()
            .map(|e| EdgeLaw {
                u: e.u,
                v: e.v,
                p_occur_given_endpoints: 1.0,
                mean: e.attr.to_vec(),
                covariance: Covariance::scaled_identity(edge_dim, params.sigma0_sq),
                occur_count: 1,
                endpoint_copresence_count: 1,
                update_count: 1,
            })
            .collect();
        Ok(Self {
            category,
            node_dim,
            edge_dim,
            nodes,
            edges,
            sample_count: 1,
            params,
        })
    }

    fn check_graph_dims(&self, graph: &AttributedGraph) -> Result<()> {
        graph.validate(self.node_dim, self.edge_dim)?;
        Ok(())
    }

    /// Presents one aligned sample: updates counts, occurrence probabilities
    /// and the attribute laws of every matched element.
    pub fn observe(&mut self, graph: &AttributedGraph, morphism: &Morphism, rule: &EtaRule) -> Result<()> {
        rule.validate()?;
        self.check_graph_dims(graph)?;
        let topo = self.topology();
        morphism.validate(graph, &topo)?;
        let lambda_min = self.params.lambda_min;

        self.sample_count += 1;
        for (a, image) in morphism.node_map.iter().enumerate() {
            if let Some(i) = *image {
                let law = &mut self.nodes[i];
                law.occur_count += 1;
                law.update_count += 1;
                let eta = rule.rate(law.update_count);
                update_gaussian(&mut law.mean, &mut law.covariance, graph.node_attr(a), eta, lambda_min);
            }
        }
        for (e, image) in morphism.edge_map.iter().enumerate() {
            if let Some(t) = *image {
                let law = &mut self.edges[t];
                law.occur_count += 1;
                law.update_count += 1;
                let eta = rule.rate(law.update_count);
                update_gaussian(&mut law.mean, &mut law.covariance, graph.edge_attr(e), eta, lambda_min);
            }
        }
        let present = morphism.inverse_nodes(self.nodes.len());
        for law in &mut self.edges {
            if present[law.u].is_some() && present[law.v].is_some() {
                law.endpoint_copresence_count += 1;
            }
        }
        let n = self.sample_count as f64;
        for law in &mut self.nodes {
            law.p_occur = law.occur_count as f64 / n;
        }
        for law in &mut self.edges {
            law.p_occur_given_endpoints = if law.endpoint_copresence_count == 0 {
                0.0
            } else {
                law.occur_count as f64 / law.endpoint_copresence_count as f64
            };
        }
        Ok(())
    }

    /// Log-probability (density for attributes) of `graph` generated under
    /// `morphism`. Outcome elements without an image are charged
    /// `ln epsilon_outlier` each; model edges with an absent endpoint
    /// contribute nothing.
    pub fn log_likelihood(&self, graph: &AttributedGraph, morphism: &Morphism) -> Result<f64> {
        self.log_likelihood_with(graph, morphism, LikelihoodMode::Full)
    }

    pub fn log_likelihood_with(
        &self,
        graph: &AttributedGraph,
        morphism: &Morphism,
        mode: LikelihoodMode,
    ) -> Result<f64> {
        let topo = self.topology();
        morphism.validate(graph, &topo)?;
        if mode == LikelihoodMode::Full {
            self.check_graph_dims(graph)?;
        }
        let ln_eps = self.params.epsilon_outlier.ln();
        let present = morphism.inverse_nodes(self.nodes.len());
        let mut total = 0.0;

        for (i, law) in self.nodes.iter().enumerate() {
            match present[i] {
                Some(a) => {
                    total += self.ln_p(law.p_occur);
                    if mode == LikelihoodMode::Full {
                        let g = GaussianLogDensity::new(&law.mean, &law.covariance)?;
                        total += g.log_density(graph.node_attr(a));
                    }
                }
                None => total += self.ln_q(law.p_occur),
            }
        }
        total += ln_eps * morphism.node_map.iter().filter(|m| m.is_none()).count() as f64;

        let matched_edges = morphism.inverse_edges(self.edges.len());
        for (t, law) in self.edges.iter().enumerate() {
            match matched_edges[t] {
                Some(e) => {
                    total += self.ln_p(law.p_occur_given_endpoints);
                    if mode == LikelihoodMode::Full {
                        let g = GaussianLogDensity::new(&law.mean, &law.covariance)?;
                        total += g.log_density(graph.edge_attr(e));
                    }
                }
                None if present[law.u].is_some() && present[law.v].is_some() => {
                    total += self.ln_q(law.p_occur_given_endpoints);
                }
                None => {}
            }
        }
        total += ln_eps * morphism.edge_map.iter().filter(|m| m.is_none()).count() as f64;
        Ok(total)
    }

    /// Log-likelihood under the morphism found by matching `graph` against
    /// this model with likelihood compatibilities.
    pub fn best_log_likelihood(&self, graph: &AttributedGraph, matcher: &Matcher) -> Result<f64> {
        Ok(self.best_match(graph, matcher)?.1)
    }

    /// The matched morphism together with its log-likelihood.
    pub fn best_match(&self, graph: &AttributedGraph, matcher: &Matcher) -> Result<(Morphism, f64)> {
        self.check_graph_dims(graph)?;
        let compat = likelihood_compatibility(self)?;
        let result = matcher.run(graph, &compat)?;
        let ll = self.log_likelihood(graph, &result.morphism)?;
        Ok((result.morphism, ll))
    }
}

fn update_gaussian(mean: &mut [f64], cov: &mut Covariance, x: &[f64], eta: f64, lambda_min: f64) {
    let diff: Vec<f64> = x.iter().zip(mean.iter()).map(|(x, m)| x - m).collect();
    for (m, d) in mean.iter_mut().zip(&diff) {
        *m += eta * d;
    }
    *cov = cov.blend_outer(&diff, eta, lambda_min);
}

/// Summary of one prototype fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: RandomGraphModel,
    /// Match calls issued while fitting (one per graph after the first).
    pub match_calls: u64,
}

/// Synthesizes the prototype of one class: initialize from the largest
/// graph, then align every other graph (in the given order) with the
/// current model and present it.
pub fn fit(
    category: impl Into<String>,
    node_dim: usize,
    edge_dim: usize,
    graphs: &[&AttributedGraph],
    params: &ModelParams,
    matcher: &Matcher,
) -> Result<FitReport> {
    let category = category.into();
    let mut model =
        RandomGraphModel::init_prototype(category, node_dim, edge_dim, graphs, params.clone())?;
    let seed_index = prototype_index(graphs).expect("init_prototype rejects empty input");
    let before = matcher.calls();
    for (k, graph) in graphs.iter().enumerate() {
        if k == seed_index {
            continue;
        }
        let compat = likelihood_compatibility(&model)?;
        let result = matcher.run(graph, &compat)?;
        drop(compat);
        model.observe(graph, &result.morphism, &params.eta)?;
    }
    Ok(FitReport {
        model,
        match_calls: matcher.calls() - before,
    })
}

/// Index of the graph `init_prototype` picks.
pub fn prototype_index(graphs: &[&AttributedGraph]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, g) in graphs.iter().enumerate() {
        if best.map_or(true, |b| g.node_count() > graphs[b].node_count()) {
            best = Some(k);
        }
    }
    best
}

/// Dataset log-likelihood `sum_i best_log_likelihood(model, G_i)`, the
/// diagnostic cost of a fitted prototype.
pub fn dataset_log_likelihood(
    model: &RandomGraphModel,
    graphs: &[&AttributedGraph],
    matcher: &Matcher,
) -> Result<f64> {
    graphs
        .iter()
        .map(|g| model.best_log_likelihood(g, matcher))
        .sum()
}
