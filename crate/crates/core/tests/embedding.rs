mod common;

use common::{random_graph, rng};
use ragkit::embedding::{align_models, embed, embed_dataset};
use ragkit::model::{fit, ModelParams};
use ragkit::synth::{make_dataset, DistortionSpec};
use ragkit::{AnnealSchedule, AttributedGraph, GraphDataset, Matcher, RandomGraphModel};

fn matcher() -> Matcher {
    Matcher::new(AnnealSchedule::default()).unwrap()
}

fn small_dataset() -> GraphDataset {
    let mut r = rng(11);
    let graphs = (0..3)
        .map(|i| random_graph(&mut r, 4 + i, 0.5, 2, 1, 3.0).with_id(format!("g{i}")))
        .collect();
    GraphDataset::new(2, 1, vec![], graphs).unwrap()
}

fn two_models() -> Vec<RandomGraphModel> {
    let mut r = rng(12);
    (0..2)
        .map(|k| {
            let g = random_graph(&mut r, 5, 0.5, 2, 1, 3.0);
            RandomGraphModel::init_prototype(format!("m{k}"), 2, 1, &[&g], ModelParams::default()).unwrap()
        })
        .collect()
}

#[test]
fn single_prototype_at_its_means() {
    let mut r = rng(3);
    let g = random_graph(&mut r, 5, 0.5, 2, 1, 4.0);
    let model = RandomGraphModel::init_prototype("c", 2, 1, &[&g], ModelParams::default()).unwrap();
    let e = embed(&[model], &g, &matcher()).unwrap();
    let peak = |d: usize| -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
    let clamp = (1.0f64 - 1e-6).ln();
    let expected = g.node_count() as f64 * (peak(2) + clamp) + g.edge_count() as f64 * (peak(1) + clamp);
    assert_eq!(e.features.len(), 1);
    assert!((e.features[0] - expected).abs() < 1e-9);
}

#[test]
fn identical_models_give_identical_features() {
    let models = two_models();
    let twins = vec![models[0].clone(), models[0].clone()];
    for g in small_dataset().graphs() {
        let e = embed(&twins, g, &matcher()).unwrap();
        assert_eq!(e.features[0], e.features[1]);
    }
}

#[test]
fn dataset_embedding_counts_and_determinism() {
    let models = two_models();
    let data = small_dataset();
    let m = matcher();
    let first = embed_dataset(&models, &data, &m).unwrap();
    assert_eq!(first.len(), 3);
    assert_eq!(m.calls(), 6);
    let second = embed_dataset(&models, &data, &m).unwrap();
    assert_eq!(first, second);
    for (e, g) in first.iter().zip(data.graphs()) {
        assert_eq!(e.graph_id, g.id());
        assert_eq!(*e, embed(&models, g, &m).unwrap());
        assert!(e.features.iter().all(|f| f.is_finite()));
    }
    let empty = GraphDataset::new(2, 1, vec![], vec![]).unwrap();
    assert!(embed_dataset(&models, &empty, &m).unwrap().is_empty());
}

#[test]
fn dimension_mismatch_is_rejected() {
    let models = two_models();
    let wide = AttributedGraph::from_parts("w", None, vec![vec![0.0, 0.0, 0.0]], vec![]);
    assert!(embed(&models, &wide, &matcher()).is_err());
    let other = RandomGraphModel::empty("x", 3, 1, ModelParams::default());
    assert!(embed(&[models[0].clone(), other], &small_dataset().graphs()[0], &matcher()).is_err());
}

#[test]
fn models_follow_category_order() {
    let models = two_models();
    let order = vec!["m1".to_string(), "m0".to_string()];
    let aligned = align_models(models.clone(), &order).unwrap();
    assert_eq!(aligned[0].category(), "m1");
    assert!(align_models(models, &["m0".to_string(), "zz".to_string()]).is_err());
}

#[test]
fn own_class_prototype_wins_at_mild_distortion() {
    let spec = DistortionSpec::default();
    let (train, test) = make_dataset(&spec, 50).unwrap();
    let m = matcher();
    let models: Vec<RandomGraphModel> = train
        .categories()
        .iter()
        .map(|c| fit(c.as_str(), 2, 1, &train.class_slice(c), &ModelParams::default(), &m).unwrap().model)
        .collect();
    let embeddings = embed_dataset(&models, &test, &m).unwrap();
    let class0: Vec<_> = embeddings.iter().filter(|e| e.label.as_deref() == Some("class0")).collect();
    let wins = class0.iter().filter(|e| e.features[0] > e.features[1]).count();
    assert!(wins as f64 >= 0.9 * class0.len() as f64, "{wins}/{}", class0.len());
}
