mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use ragkit::model::{fit, Covariance, EtaRule, GaussianLogDensity, LikelihoodMode, ModelParams};
use ragkit::{AnnealSchedule, AttributedGraph, Matcher, Morphism, RandomGraphModel};

fn matcher() -> Matcher {
    Matcher::new(AnnealSchedule::default()).unwrap()
}

/// Outcome graph realizing `present` model nodes and `edges` model edges,
/// plus the morphism sending it back onto the model.
fn realization(model: &RandomGraphModel, present: &[usize], edges: &[usize]) -> (AttributedGraph, Morphism) {
    let pos = |v: usize| present.iter().position(|&x| x == v).unwrap();
    let nodes = present.iter().map(|_| vec![0.0; model.node_dim()]).collect();
    let e = edges
        .iter()
        .map(|&k| {
            let law = &model.edges()[k];
            (pos(law.u), pos(law.v), vec![0.0; model.edge_dim()])
        })
        .collect();
    let g = AttributedGraph::from_parts("o", None, nodes, e);
    let morph = Morphism::from_node_map(&g, &model.topology(), present.iter().map(|&v| Some(v)).collect()).unwrap();
    (g, morph)
}

#[test]
fn structural_probabilities_sum_to_one() {
    let mut r = rng(42);
    for n in 1..=4 {
        for _ in 0..10 {
            let model = random_model(&mut r, n, 6, 1, 1);
            let mut total = 0.0;
            let mut outcomes = 0;
            for mask in 0u32..(1 << n) {
                let present: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
                // admissible edges: both endpoints present
                let admissible: Vec<usize> = (0..model.edges().len())
                    .filter(|&k| {
                        let l = &model.edges()[k];
                        present.contains(&l.u) && present.contains(&l.v)
                    })
                    .collect();
                for emask in 0u32..(1 << admissible.len()) {
                    let chosen: Vec<usize> =
                        admissible.iter().enumerate().filter(|(i, _)| emask >> i & 1 == 1).map(|(_, &k)| k).collect();
                    let (g, morph) = realization(&model, &present, &chosen);
                    let ll = model.log_likelihood_with(&g, &morph, LikelihoodMode::StructureOnly).unwrap();
                    total += ll.exp();
                    outcomes += 1;
                }
            }
            assert!(outcomes >= 1 << n);
            assert!((total - 1.0).abs() < 1e-9, "n={n}: total {total}");
        }
    }
}

fn random_spd(r: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

#[test]
fn mean_update_is_the_natural_gradient_step() {
    let mut r = rng(8);
    for d in 1..=4 {
        for _ in 0..10 {
            let s = random_spd(&mut r, d);
            let cov = Covariance::from_rows(&(0..d).map(|i| s.row(i).iter().copied().collect()).collect::<Vec<_>>()).unwrap();
            let mu: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
            let h = 1e-5;
            let grad = DVector::from_fn(d, |k, _| {
                let mut up = mu.clone();
                let mut down = mu.clone();
                up[k] += h;
                down[k] -= h;
                let f = |m: &[f64]| GaussianLogDensity::new(m, &cov).unwrap().log_density(&x);
                (f(&up) - f(&down)) / (2.0 * h)
            });
            let step = &s * grad;
            for k in 0..d {
                assert!((step[k] - (x[k] - mu[k])).abs() < 1e-8, "d={d} k={k}: {} vs {}", step[k], x[k] - mu[k]);
            }
        }
    }
}

fn single_node_graph(x: Vec<f64>) -> AttributedGraph {
    AttributedGraph::from_parts("s", None, vec![x], vec![])
}

proptest! {
    #[test]
    fn covariance_update_stays_spd(
        d in 1usize..5,
        seed in any::<u64>(),
        eta in 0.001f64..=1.0,
    ) {
        let mut r = rng(seed);
        let s = random_spd(&mut r, d) * r.random_range(1e-6..3.0);
        let cov = Covariance::from_rows(&(0..d).map(|i| s.row(i).iter().copied().collect()).collect::<Vec<_>>()).unwrap();
        let diff: Vec<f64> = (0..d).map(|_| r.random_range(-10.0..10.0)).collect();
        let next = cov.blend_outer(&diff, eta, 1e-4);
        for i in 0..d {
            for j in 0..d {
                prop_assert!((next.get(i, j) - next.get(j, i)).abs() <= 1e-12);
            }
        }
        let min = next.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= 1e-4 - 1e-12, "min eigenvalue {}", min);
    }

    #[test]
    fn inverse_count_rate_gives_running_mean(xs in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 2), 1..40)) {
        let first = single_node_graph(xs[0].clone());
        let mut model = RandomGraphModel::init_prototype("c", 2, 1, &[&first], ModelParams::default()).unwrap();
        for x in &xs[1..] {
            let g = single_node_graph(x.clone());
            let m = Morphism::identity(&g);
            let before = model.clone();
            model.observe(&g, &m, &EtaRule::InverseCount).unwrap();
            prop_assert_eq!(model.sample_count(), before.sample_count() + 1);
            prop_assert!(model.nodes()[0].occur_count >= before.nodes()[0].occur_count);
        }
        for k in 0..2 {
            let batch = xs.iter().map(|x| x[k]).sum::<f64>() / xs.len() as f64;
            prop_assert!((model.nodes()[0].mean[k] - batch).abs() < 1e-10);
        }
    }

    #[test]
    fn likelihood_decreases_with_mahalanobis_distance(
        seed in any::<u64>(),
        a in 0.0f64..5.0,
        b in 0.0f64..5.0,
    ) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 3, 3, 2, 1);
        let g = random_graph(&mut r, 3, 0.6, 2, 1, 1.0);
        let map: Vec<Option<usize>> = vec![Some(0), Some(1), Some(2)];
        let dir = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let mean = model.nodes()[1].mean.clone();
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        let shifted = |t: f64| {
            let mut nodes: Vec<Vec<f64>> = g.nodes().iter().map(|n| n.attr.to_vec()).collect();
            nodes[1] = vec![mean[0] + t * dir[0], mean[1] + t * dir[1]];
            let edges = g.edges().iter().map(|e| (e.u, e.v, e.attr.to_vec())).collect();
            let h = AttributedGraph::from_parts("h", None, nodes, edges);
            let m = Morphism::from_node_map(&h, &model.topology(), map.clone()).unwrap();
            model.log_likelihood(&h, &m).unwrap()
        };
        prop_assert!(shifted(near) >= shifted(far));
    }
}

#[test]
fn fitting_identical_graphs_recovers_them() {
    let mut r = rng(3);
    let g = random_graph(&mut r, 5, 0.5, 2, 1, 4.0);
    let copies: Vec<&AttributedGraph> = std::iter::repeat_n(&g, 6).collect();
    let report = fit("c", 2, 1, &copies, &ModelParams::default(), &matcher()).unwrap();
    assert_eq!(report.match_calls, 5);
    let model = report.model;
    assert_eq!(model.sample_count(), 6);
    for (law, node) in model.nodes().iter().zip(g.nodes()) {
        assert_eq!(law.p_occur, 1.0);
        for (m, x) in law.mean.iter().zip(node.attr.iter()) {
            assert!((m - x).abs() < 1e-9);
        }
    }
    for law in model.edges() {
        assert_eq!(law.p_occur_given_endpoints, 1.0);
    }
}

#[test]
fn fit_on_one_graph_is_the_prototype() {
    let mut r = rng(4);
    let g = random_graph(&mut r, 4, 0.5, 2, 1, 4.0);
    let report = fit("c", 2, 1, &[&g], &ModelParams::default(), &matcher()).unwrap();
    assert_eq!(report.match_calls, 0);
    let proto = RandomGraphModel::init_prototype("c", 2, 1, &[&g], ModelParams::default()).unwrap();
    assert_eq!(report.model, proto);
}

#[test]
fn fit_mean_converges_to_sampling_mean() {
    use rand_distr::{Distribution, Normal};
    let mut r = rng(50);
    let noise = Normal::new(5.0, 1.0).unwrap();
    let draws: Vec<f64> = (0..50).map(|_| noise.sample(&mut r)).collect();
    // node 0 carries the draw; the others are fixed and far apart
    let graphs: Vec<AttributedGraph> = draws
        .iter()
        .map(|&x| {
            AttributedGraph::from_parts(
                "g",
                None,
                vec![vec![x, 0.0], vec![-10.0, 0.0], vec![0.0, 20.0]],
                vec![(0, 1, vec![0.5]), (1, 2, vec![-0.5])],
            )
        })
        .collect();
    let refs: Vec<&AttributedGraph> = graphs.iter().collect();
    let model = fit("c", 2, 1, &refs, &ModelParams::default(), &matcher()).unwrap().model;
    let mean = model.nodes()[0].mean[0];
    let batch = draws.iter().sum::<f64>() / 50.0;
    assert!((mean - batch).abs() < 1e-9, "{mean} vs batch {batch}");
    assert!((mean - 5.0).abs() < 3.0 / 50f64.sqrt());
}

#[test]
fn empty_model_charges_every_element_as_outlier() {
    let mut r = rng(6);
    let g = random_graph(&mut r, 4, 0.7, 2, 1, 1.0);
    let model = RandomGraphModel::empty("c", 2, 1, ModelParams::default());
    let ll = model.best_log_likelihood(&g, &matcher()).unwrap();
    let expected = (g.node_count() + g.edge_count()) as f64 * 1e-6f64.ln();
    assert!((ll - expected).abs() < 1e-9);
}

#[test]
fn matching_at_the_means_gives_the_sum_of_peak_densities() {
    let mut r = rng(7);
    let g = random_graph(&mut r, 4, 0.6, 2, 1, 4.0);
    let model = RandomGraphModel::init_prototype("c", 2, 1, &[&g], ModelParams::default()).unwrap();
    let ll = model.best_log_likelihood(&g, &matcher()).unwrap();
    let peak = |d: usize| -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
    let clamp = (1.0f64 - 1e-6).ln();
    let expected = g.node_count() as f64 * (peak(2) + clamp) + g.edge_count() as f64 * (peak(1) + clamp);
    assert!((ll - expected).abs() < 1e-9);
}

#[test]
fn best_log_likelihood_is_near_exhaustive_optimum() {
    let mut r = rng(9);
    let m = matcher();
    for _ in 0..100 {
        let model = random_model(&mut r, 3, 3, 2, 1);
        let g = random_graph(&mut r, 3, 0.6, 2, 1, 2.0);
        let (_, best) = exhaustive_best(&model, &g);
        let got = model.best_log_likelihood(&g, &m).unwrap();
        assert!(got <= best + 1e-9);
        assert!(got >= best - 0.05 * best.abs(), "matcher {got} vs exhaustive {best}");
    }
}
