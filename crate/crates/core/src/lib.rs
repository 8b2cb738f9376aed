//! Random attributed graph prototypes for graph classification.
//!
//! Each class of a labeled graph dataset is summarized by one random
//! attributed graph: a prototype whose nodes and edges carry occurrence
//! probabilities and Gaussian attribute laws. Graphs are embedded into the
//! space of their log-likelihoods under every class prototype and classified
//! there, or directly by maximum likelihood.
//!
//! Modules:
//! - [`graph`]: attributed graphs, datasets, JSON-Lines I/O
//! - [`matcher`]: graduated-assignment matching and Sinkhorn normalization
//! - [`model`]: prototype estimation and outcome likelihoods
//! - [`embedding`]: log-likelihood feature vectors
//! - [`classify`]: kNN in the graph domain, maximum likelihood, kernel SVM, metrics
//! - [`synth`]: two-class synthetic datasets with controlled distortion

pub mod classify;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod matcher;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{AttrVector, AttributedGraph, DatasetHeader, GraphDataset, GraphError, Topology};
pub use matcher::{AnnealSchedule, Compatibility, MatchMatrix, MatchResult, Matcher, Morphism};
pub use model::{EtaRule, LikelihoodMode, ModelParams, RandomGraphModel};
