//! Attributed graphs, datasets and their JSON-Lines representation.
//!
//! Graphs are undirected, carry one real attribute vector per node and per
//! edge, and are immutable once built. Node identifiers are opaque strings
//! externally and dense indices internally.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

/// First violated graph invariant, with the identity of the offending element.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge {edge} references missing node `{endpoint}`")]
    DanglingEdge { edge: usize, endpoint: String },
    #[error("edge {edge} is a self-loop on node `{node}`")]
    SelfLoop { edge: usize, node: String },
    #[error("edge {edge} duplicates the pair (`{u}`, `{v}`)")]
    DuplicateEdge { edge: usize, u: String, v: String },
    #[error("{kind} `{id}` has attribute dimension {found}, expected {expected}")]
    DimensionMismatch {
        kind: &'static str,
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("{kind} `{id}` has a non-finite attribute value")]
    NonFinite { kind: &'static str, id: String },
    #[error("graph `{graph}` has label `{label}` outside the declared categories")]
    UnknownLabel { graph: String, label: String },
}

/// A real attribute vector. Entries are finite once validated.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttrVector(Vec<f64>);

impl AttrVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for AttrVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for AttrVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub attr: AttrVector,
}

/// Undirected edge between two node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub attr: AttrVector,
}

impl Edge {
    /// Endpoints as (min, max).
    pub fn key(&self) -> (usize, usize) {
        ordered(self.u, self.v)
    }
}

#[inline]
pub(crate) fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    id: String,
    label: Option<String>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl AttributedGraph {
    /// Assembles a graph without checking it; see [`AttributedGraph::validate`].
    pub fn new(
        id: impl Into<String>,
        label: Option<String>,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
    ) -> Self {
        Self {
            id: id.into(),
            label,
            nodes,
            edges,
        }
    }

    /// Builds a graph from attribute lists, naming nodes `0..n`.
    pub fn from_parts(
        id: impl Into<String>,
        label: Option<String>,
        node_attrs: Vec<Vec<f64>>,
        edges: Vec<(usize, usize, Vec<f64>)>,
    ) -> Self {
        let nodes = node_attrs
            .into_iter()
            .enumerate()
            .map(|(i, a)| Node {
                id: i.to_string(),
                attr: a.into(),
            })
            .collect();
        let edges = edges
            .into_iter()
            .map(|(u, v, a)| Edge { u, v, attr: a.into() })
            .collect();
        Self::new(id, label, nodes, edges)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_attr(&self, i: usize) -> &[f64] {
        &self.nodes[i].attr
    }

    pub fn edge_attr(&self, e: usize) -> &[f64] {
        &self.edges[e].attr
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn topology(&self) -> Topology {
        Topology::new(self.nodes.len(), self.edges.iter().map(Edge::key))
    }

    /// Checks every graph invariant at the given attribute dimensions and
    /// reports the first violation.
    pub fn validate(&self, node_dim: usize, edge_dim: usize) -> Result<(), GraphError> {
        let mut seen = HashSet::with_capacity(self.nodes.len());
        for node in &self.nodes {
            if !seen.insert(node.id.as_str()) {
                return Err(GraphError::DuplicateNode(node.id.clone()));
            }
            check_attr("node", &node.id, &node.attr, node_dim)?;
        }
        let mut pairs = HashSet::with_capacity(self.edges.len());
        for (k, edge) in self.edges.iter().enumerate() {
            for end in [edge.u, edge.v] {
                if end >= self.nodes.len() {
                    return Err(GraphError::DanglingEdge {
                        edge: k,
                        endpoint: end.to_string(),
                    });
                }
            }
            if edge.u == edge.v {
                return Err(GraphError::SelfLoop {
                    edge: k,
                    node: self.nodes[edge.u].id.clone(),
                });
            }
            if !pairs.insert(edge.key()) {
                return Err(GraphError::DuplicateEdge {
                    edge: k,
                    u: self.nodes[edge.u].id.clone(),
                    v: self.nodes[edge.v].id.clone(),
                });
            }
            let id = format!("{}-{}", self.nodes[edge.u].id, self.nodes[edge.v].id);
            check_attr("edge", &id, &edge.attr, edge_dim)?;
        }
        Ok(())
    }

    /// Nodes sorted by id and edges by (min endpoint, max endpoint), each
    /// edge stored with `u < v`. Attribute values are untouched.
    pub fn canonical_order(&self) -> AttributedGraph {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| self.nodes[a].id.cmp(&self.nodes[b].id));
        let mut position = vec![0; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let nodes = order.iter().map(|&i| self.nodes[i].clone()).collect();
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| {
                let (u, v) = ordered(position[e.u], position[e.v]);
                Edge {
                    u,
                    v,
                    attr: e.attr.clone(),
                }
            })
            .collect();
        edges.sort_by_key(|e| (e.u, e.v));
        AttributedGraph {
            id: self.id.clone(),
            label: self.label.clone(),
            nodes,
            edges,
        }
    }

    pub fn to_record(&self) -> GraphRecord {
        GraphRecord {
            id: self.id.clone(),
            label: self.label.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id.clone(),
                    attr: n.attr.to_vec(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    u: self.nodes[e.u].id.clone(),
                    v: self.nodes[e.v].id.clone(),
                    attr: e.attr.to_vec(),
                })
                .collect(),
        }
    }

    /// Resolves string endpoints to indices. Only dangling endpoints are
    /// rejected here; everything else is left to `validate`.
    pub fn from_record(record: GraphRecord) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(record.nodes.len());
        for (i, n) in record.nodes.iter().enumerate() {
            index.entry(n.id.clone()).or_insert(i);
        }
        let mut edges = Vec::with_capacity(record.edges.len());
        for (k, e) in record.edges.into_iter().enumerate() {
            let lookup = |end: &String| {
                index.get(end).copied().ok_or_else(|| GraphError::DanglingEdge {
                    edge: k,
                    endpoint: end.clone(),
                })
            };
            let u = lookup(&e.u)?;
            let v = lookup(&e.v)?;
            edges.push(Edge {
                u,
                v,
                attr: e.attr.into(),
            });
        }
        let nodes = record
            .nodes
            .into_iter()
            .map(|n| Node {
                id: n.id,
                attr: n.attr.into(),
            })
            .collect();
        Ok(Self::new(record.id, record.label, nodes, edges))
    }

    /// One JSON line, canonical order.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.canonical_order().to_record())
            .expect("graph records always serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let record: GraphRecord = serde_json::from_str(line)?;
        Ok(Self::from_record(record)?)
    }
}

fn check_attr(kind: &'static str, id: &str, attr: &AttrVector, dim: usize) -> Result<(), GraphError> {
    if attr.len() != dim {
        return Err(GraphError::DimensionMismatch {
            kind,
            id: id.to_string(),
            expected: dim,
            found: attr.len(),
        });
    }
    if !attr.is_finite() {
        return Err(GraphError::NonFinite {
            kind,
            id: id.to_string(),
        });
    }
    Ok(())
}

/// Bare undirected structure: node count, edge list and adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    lookup: HashMap<(usize, usize), usize>,
    neighbors: Vec<Vec<(usize, usize)>>,
}

impl Topology {
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let edges: Vec<(usize, usize)> = edges.into_iter().map(|(u, v)| ordered(u, v)).collect();
        let mut lookup = HashMap::with_capacity(edges.len());
        let mut neighbors = vec![Vec::new(); node_count];
        for (k, &(u, v)) in edges.iter().enumerate() {
            lookup.insert((u, v), k);
            neighbors[u].push((v, k));
            neighbors[v].push((u, k));
        }
        Self {
            node_count,
            edges,
            lookup,
            neighbors,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&ordered(a, b)).copied()
    }

    /// (neighbor, edge index) pairs of node `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.neighbors[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub attr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: String,
    pub v: String,
    pub attr: Vec<f64>,
}

/// Wire form of one graph line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub id: String,
    pub label: Option<String>,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

/// First line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub node_dim: usize,
    pub edge_dim: usize,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    node_dim: usize,
    edge_dim: usize,
    categories: Vec<String>,
    graphs: Vec<AttributedGraph>,
}

impl GraphDataset {
    /// Validates every graph at the declared dimensions and checks labels
    /// against the category list. Unlabeled graphs are accepted.
    pub fn new(
        node_dim: usize,
        edge_dim: usize,
        categories: Vec<String>,
        graphs: Vec<AttributedGraph>,
    ) -> Result<Self> {
        if node_dim == 0 || edge_dim == 0 {
            return Err(Error::InvalidParameter(
                "attribute dimensions must be positive".into(),
            ));
        }
        let mut unique = HashSet::new();
        for c in &categories {
            if !unique.insert(c) {
                return Err(Error::InvalidParameter(format!("duplicate category `{c}`")));
            }
        }
        for g in &graphs {
            g.validate(node_dim, edge_dim)?;
            if let Some(label) = g.label() {
                if !categories.iter().any(|c| c == label) {
                    return Err(GraphError::UnknownLabel {
                        graph: g.id().to_string(),
                        label: label.to_string(),
                    }
                    .into());
                }
            }
        }
        Ok(Self {
            node_dim,
            edge_dim,
            categories,
            graphs,
        })
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn graphs(&self) -> &[AttributedGraph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            node_dim: self.node_dim,
            edge_dim: self.edge_dim,
            categories: self.categories.clone(),
        }
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    /// Category index of each graph (None for unlabeled graphs).
    pub fn label_indices(&self) -> Vec<Option<usize>> {
        self.graphs
            .iter()
            .map(|g| g.label().and_then(|l| self.category_index(l)))
            .collect()
    }

    /// Graphs of one category, in dataset order.
    pub fn class_slice(&self, category: &str) -> Vec<&AttributedGraph> {
        self.graphs
            .iter()
            .filter(|g| g.label() == Some(category))
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&AttributedGraph> {
        self.graphs.iter().find(|g| g.id() == id)
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut header: Option<DatasetHeader> = None;
        let mut graphs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let format_err = |e: serde_json::Error| Error::Format {
                line: i + 1,
                message: e.to_string(),
            };
            if header.is_none() {
                header = Some(serde_json::from_str(trimmed).map_err(format_err)?);
                continue;
            }
            let record: GraphRecord = serde_json::from_str(trimmed).map_err(format_err)?;
            graphs.push(AttributedGraph::from_record(record)?);
        }
        let header = header.ok_or(Error::Format {
            line: 1,
            message: "missing dataset header".into(),
        })?;
        Self::new(header.node_dim, header.edge_dim, header.categories, graphs)
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer(&mut writer, &self.header())?;
        writer.write_all(b"\n")?;
        for g in &self.graphs {
            writer.write_all(g.to_json_line().as_bytes())?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, attr: Vec<f64>) -> Node {
        Node {
            id: id.into(),
            attr: attr.into(),
        }
    }

    #[test]
    fn minimal_graph_is_valid() {
        let g = AttributedGraph::new("g", None, vec![node("a", vec![0.0])], vec![]);
        assert_eq!(g.validate(1, 1), Ok(()));
    }

    #[test]
    fn dangling_edge_is_rejected() {
        let record = GraphRecord {
            id: "g".into(),
            label: None,
            nodes: vec![NodeRecord {
                id: "a".into(),
                attr: vec![0.0],
            }],
            edges: vec![EdgeRecord {
                u: "a".into(),
                v: "zz".into(),
                attr: vec![1.0],
            }],
        };
        assert_eq!(
            AttributedGraph::from_record(record),
            Err(GraphError::DanglingEdge {
                edge: 0,
                endpoint: "zz".into()
            })
        );

        let g = AttributedGraph::new(
            "g",
            None,
            vec![node("a", vec![0.0])],
            vec![Edge {
                u: 0,
                v: 3,
                attr: vec![1.0].into(),
            }],
        );
        assert!(matches!(g.validate(1, 1), Err(GraphError::DanglingEdge { edge: 0, .. })));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = AttributedGraph::new("g", None, vec![node("a", vec![1.0, 2.0])], vec![]);
        assert_eq!(
            g.validate(1, 1),
            Err(GraphError::DimensionMismatch {
                kind: "node",
                id: "a".into(),
                expected: 1,
                found: 2
            })
        );
    }

    #[test]
    fn structural_violations() {
        let nodes = vec![node("a", vec![0.0]), node("b", vec![0.0])];
        let e = |u, v| Edge {
            u,
            v,
            attr: vec![0.0].into(),
        };
        let looped = AttributedGraph::new("g", None, nodes.clone(), vec![e(1, 1)]);
        assert!(matches!(looped.validate(1, 1), Err(GraphError::SelfLoop { .. })));
        let multi = AttributedGraph::new("g", None, nodes.clone(), vec![e(0, 1), e(1, 0)]);
        assert!(matches!(multi.validate(1, 1), Err(GraphError::DuplicateEdge { edge: 1, .. })));
        let dup = AttributedGraph::new("g", None, vec![node("a", vec![0.0]); 2], vec![]);
        assert_eq!(dup.validate(1, 1), Err(GraphError::DuplicateNode("a".into())));
        let nan = AttributedGraph::new("g", None, vec![node("a", vec![f64::NAN])], vec![]);
        assert!(matches!(nan.validate(1, 1), Err(GraphError::NonFinite { .. })));
    }

    #[test]
    fn canonical_order_sorts_nodes_and_edges() {
        let g = AttributedGraph::new(
            "g",
            None,
            vec![node("b", vec![2.0]), node("a", vec![1.0]), node("c", vec![3.0])],
            vec![
                Edge {
                    u: 2,
                    v: 0,
                    attr: vec![7.0].into(),
                },
                Edge {
                    u: 1,
                    v: 0,
                    attr: vec![5.0].into(),
                },
            ],
        );
        let c = g.canonical_order();
        let ids: Vec<&str> = c.nodes().iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(c.node_attr(0), &[1.0]);
        let keys: Vec<(usize, usize)> = c.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(keys, [(0, 1), (1, 2)]);
        assert_eq!(c.edge_attr(1), &[7.0]);
        assert_eq!(c.canonical_order(), c);
    }

    #[test]
    fn reversed_edge_is_normalized() {
        let g = AttributedGraph::from_parts(
            "g",
            None,
            vec![vec![0.0]; 4],
            vec![(3, 1, vec![0.5])],
        );
        let c = g.canonical_order();
        assert_eq!((c.edges()[0].u, c.edges()[0].v), (1, 3));
    }

    #[test]
    fn dataset_rejects_unknown_label() {
        let g = AttributedGraph::from_parts("g", Some("x".into()), vec![vec![0.0]], vec![]);
        let err = GraphDataset::new(1, 1, vec!["a".into()], vec![g]).unwrap_err();
        assert!(matches!(err, Error::Graph(GraphError::UnknownLabel { .. })));
    }

    #[test]
    fn dataset_jsonl_round_trip() {
        let g = AttributedGraph::from_parts(
            "g1",
            Some("a".into()),
            vec![vec![0.1, -2.5e-300], vec![1.0 / 3.0, 7.0]],
            vec![(1, 0, vec![std::f64::consts::PI])],
        );
        let ds = GraphDataset::new(2, 1, vec!["a".into(), "b".into()], vec![g.clone()]).unwrap();
        let text = ds.to_jsonl_string();
        assert!(text.starts_with(r#"{"node_dim":2,"edge_dim":1,"categories":["a","b"]}"#));
        let back = GraphDataset::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back.graphs()[0], g.canonical_order());
        assert_eq!(back.header(), ds.header());
    }

    #[test]
    fn missing_header_is_a_format_error() {
        let err = GraphDataset::read_jsonl("".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }
}
