//! Fixtures shared by the benchmarks.

use ragkit::matcher::MatchMatrix;
use ragkit::model::{fit, ModelParams};
use ragkit::synth::{make_dataset, DistortionSpec};
use ragkit::{GraphDataset, Matcher, RandomGraphModel};

/// Train/test split at `level` with `per_class` graphs per class.
pub fn dataset(level: f64, per_class: usize) -> (GraphDataset, GraphDataset) {
    let spec = DistortionSpec {
        level,
        ..DistortionSpec::default()
    };
    make_dataset(&spec, per_class).expect("valid default spec")
}

/// One fitted prototype per category of `train`.
pub fn prototypes(train: &GraphDataset) -> Vec<RandomGraphModel> {
    let matcher = Matcher::new(Default::default()).expect("default schedule");
    train
        .categories()
        .iter()
        .map(|c| {
            let graphs = train.class_slice(c);
            fit(c.clone(), train.node_dim(), train.edge_dim(), &graphs, &ModelParams::default(), &matcher)
                .expect("fit")
                .model
        })
        .collect()
}

/// Dense positive matrix with a deterministic, mildly uneven pattern.
pub fn positive_matrix(rows: usize, cols: usize, slack: bool) -> MatchMatrix {
    let full: Vec<Vec<f64>> = (0..rows + slack as usize)
        .map(|i| {
            (0..cols + slack as usize)
                .map(|j| 0.5 + ((i * 31 + j * 17) % 13) as f64 / 13.0)
                .collect()
        })
        .collect();
    MatchMatrix::from_rows(&full, slack).expect("positive entries")
}
