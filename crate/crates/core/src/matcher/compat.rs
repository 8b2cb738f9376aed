use crate::error::Result;
use crate::graph::{AttributedGraph, Topology};
use crate::model::{GaussianLogDensity, RandomGraphModel};

use super::Compatibility;

/// Compatibilities that make the total match score equal to the model's
/// log-likelihood of the outcome under the discrete morphism.
///
/// A node assigned to model node `v` scores `ln p(v) + ln N(x; mu_v, S_v)`;
/// an edge scores the same with its conditional occurrence probability.
/// Unassigned model nodes score `ln q(v)`, outcome outliers
/// `ln epsilon_outlier`, and model edges missing between matched endpoints
/// `ln (1 - p(e))`.
#[derive(Debug, Clone)]
pub struct LikelihoodCompatibility<'m> {
    model: &'m RandomGraphModel,
    topology: Topology,
    node_density: Vec<GaussianLogDensity>,
    edge_density: Vec<GaussianLogDensity>,
    node_ln_p: Vec<f64>,
    node_ln_q: Vec<f64>,
    edge_ln_p: Vec<f64>,
    edge_ln_q: Vec<f64>,
    ln_eps: f64,
}

pub fn likelihood_compatibility(model: &RandomGraphModel) -> Result<LikelihoodCompatibility<'_>> {
    LikelihoodCompatibility::new(model)
}

impl<'m> LikelihoodCompatibility<'m> {
    pub fn new(model: &'m RandomGraphModel) -> Result<Self> {
        let node_density = model
            .nodes()
            .iter()
            .map(|l| GaussianLogDensity::new(&l.mean, &l.covariance))
            .collect::<Result<_>>()?;
        let edge_density = model
            .edges()
            .iter()
            .map(|l| GaussianLogDensity::new(&l.mean, &l.covariance))
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            topology: model.topology(),
            node_density,
            edge_density,
            node_ln_p: model.nodes().iter().map(|l| model.ln_p(l.p_occur)).collect(),
            node_ln_q: model.nodes().iter().map(|l| model.ln_q(l.p_occur)).collect(),
            edge_ln_p: model
                .edges()
                .iter()
                .map(|l| model.ln_p(l.p_occur_given_endpoints))
                .collect(),
            edge_ln_q: model
                .edges()
                .iter()
                .map(|l| model.ln_q(l.p_occur_given_endpoints))
                .collect(),
            ln_eps: model.epsilon_outlier().ln(),
        })
    }

    pub fn model(&self) -> &RandomGraphModel {
        self.model
    }
}

impl Compatibility for LikelihoodCompatibility<'_> {
    fn target(&self) -> &Topology {
        &self.topology
    }

    fn node(&self, attr: &[f64], target: usize) -> f64 {
        self.node_ln_p[target] + self.node_density[target].log_density(attr)
    }

    fn edge(&self, attr: &[f64], target_edge: usize) -> f64 {
        self.edge_ln_p[target_edge] + self.edge_density[target_edge].log_density(attr)
    }

    fn node_unmatched(&self, _attr: &[f64]) -> f64 {
        self.ln_eps
    }

    fn target_node_unmatched(&self, target: usize) -> f64 {
        self.node_ln_q[target]
    }

    fn edge_unmatched(&self, _attr: &[f64]) -> f64 {
        self.ln_eps
    }

    fn target_edge_absent(&self, target_edge: usize) -> f64 {
        self.edge_ln_q[target_edge]
    }
}

/// Graph-to-graph similarity: `exp(-|x - y|^2 / (2 h^2))` for node pairs
/// and for edge pairs whose endpoints correspond; everything else scores 0.
#[derive(Debug, Clone)]
pub struct GaussianKernelCompatibility<'g> {
    target: &'g AttributedGraph,
    topology: Topology,
    inv_two_h2: f64,
}

impl<'g> GaussianKernelCompatibility<'g> {
    pub fn new(target: &'g AttributedGraph, bandwidth: f64) -> Self {
        Self {
            target,
            topology: target.topology(),
            inv_two_h2: 1.0 / (2.0 * bandwidth * bandwidth),
        }
    }

    /// Unit bandwidth.
    pub fn unit(target: &'g AttributedGraph) -> Self {
        Self::new(target, 1.0)
    }

    fn kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 * self.inv_two_h2).exp()
    }
}

impl Compatibility for GaussianKernelCompatibility<'_> {
    fn target(&self) -> &Topology {
        &self.topology
    }

    fn node(&self, attr: &[f64], target: usize) -> f64 {
        self.kernel(attr, self.target.node_attr(target))
    }

    fn edge(&self, attr: &[f64], target_edge: usize) -> f64 {
        // topology edges are built in the graph's edge order
        self.kernel(attr, self.target.edge_attr(target_edge))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Covariance, ModelParams, NodeLaw};

    fn model(p: f64) -> RandomGraphModel {
        RandomGraphModel::from_laws(
            "c",
            1,
            1,
            vec![NodeLaw {
                p_occur: p,
                mean: vec![0.0],
                covariance: Covariance::scaled_identity(1, 1.0),
                occur_count: 1,
                update_count: 1,
            }],
            vec![],
            2,
            ModelParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn node_compatibility_values() {
        let m = model(1.0);
        let c = likelihood_compatibility(&m).unwrap();
        let clamp = (1.0f64 - 1e-6).ln();
        assert!((c.node(&[0.0], 0) - (-0.918_938_533_204_672_7 + clamp)).abs() < 1e-12);
        assert!((c.node(&[0.0], 0) - c.node(&[3.0], 0) - 4.5).abs() < 1e-12);

        let half = model(0.5);
        let c = likelihood_compatibility(&half).unwrap();
        assert!((c.node(&[0.0], 0) - (-1.612_085_713_764_618)).abs() < 1e-12);
    }
}
