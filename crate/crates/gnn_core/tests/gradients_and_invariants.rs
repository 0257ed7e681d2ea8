//! Finite-difference gradient oracle, exact permutation equivariance, and
//! the hand-computed layer fixtures.

use gnn_core::{
    count_parameters, train, Activation, GraphData, LayerSpec, Matrix, Model, ModelSpec,
    PreparedGraph, Readout, Target, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_graph(
    rng: &mut ChaCha12Rng,
    n: usize,
    feat_dim: usize,
    edge_dim: usize,
    node_target_dim: Option<usize>,
) -> GraphData {
    // ring plus a couple of chords, both directions
    let mut edges = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        edges.push((i as u32, j as u32));
        edges.push((j as u32, i as u32));
    }
    if n > 3 {
        edges.push((0, (n / 2) as u32));
        edges.push(((n / 2) as u32, 0));
    }
    let node_features = Matrix::from_vec(
        n,
        feat_dim,
        (0..n * feat_dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
    )
    .unwrap();
    let edge_features = Matrix::from_vec(
        edges.len(),
        edge_dim,
        (0..edges.len() * edge_dim)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect(),
    )
    .unwrap();
    let target = match node_target_dim {
        Some(d) => Target::PerNode(
            Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
                .unwrap(),
        ),
        None => Target::Graph(rng.random::<f64>() * 2.0 - 1.0),
    };
    GraphData {
        node_features,
        edges,
        edge_features,
        target,
    }
}

fn node_regression_spec(feat: usize, edge: usize) -> ModelSpec {
    ModelSpec {
        input_dim: feat,
        edge_dim: edge,
        node_layers: vec![
            LayerSpec::RelGat {
                in_dim: feat,
                out_dim: 3,
                heads: 2,
                edge_dim: edge,
                average_heads: false,
                activation: Activation::Elu,
            },
            LayerSpec::LayerNorm { dim: 6 },
            LayerSpec::Gcn { in_dim: 6, out_dim: 4 },
            LayerSpec::Activation {
                kind: Activation::Relu,
            },
            LayerSpec::Linear { in_dim: 4, out_dim: 1 },
        ],
        readout: Readout::None,
        graph_layers: vec![],
    }
}

/// Central finite differences over every parameter.
fn finite_difference_check(model: &mut Model, graph: &PreparedGraph) -> (f64, usize) {
    let mut grads = model.zeros_like();
    model.accumulate_gradients(graph, &mut grads, 1.0).unwrap();
    let mut analytic = Vec::new();
    for lp in grads.0.iter().chain(grads.1.iter()) {
        for t in &lp.tensors {
            analytic.extend_from_slice(t.data());
        }
    }
    let theta = model.flat_params();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for p in 0..theta.len() {
        let mut tp = theta.clone();
        tp[p] += h;
        model.set_flat_params(&tp).unwrap();
        let lp = Model::loss(&model.predict(graph).unwrap(), &graph.target);
        tp[p] = theta[p] - h;
        model.set_flat_params(&tp).unwrap();
        let lm = Model::loss(&model.predict(graph).unwrap(), &graph.target);
        let fd = (lp - lm) / (2.0 * h);
        let denom = analytic[p].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic[p] - fd).abs() / denom);
        checked += 1;
    }
    model.set_flat_params(&theta).unwrap();
    (worst, checked)
}

#[test]
fn gradients_match_finite_differences_node_regression() {
    let mut rng = ChaCha12Rng::seed_from_u64(100);
    let g = PreparedGraph::new(&random_graph(&mut rng, 6, 5, 3, Some(1))).unwrap();
    let mut model = Model::init(node_regression_spec(5, 3), &mut rng).unwrap();
    let (worst, checked) = finite_difference_check(&mut model, &g);
    assert!(checked > 100);
    assert!(worst < 1e-4, "worst relative gradient error {worst}");
}

#[test]
fn gradients_match_finite_differences_graph_regression() {
    let mut rng = ChaCha12Rng::seed_from_u64(200);
    let g = PreparedGraph::new(&random_graph(&mut rng, 6, 4, 3, None)).unwrap();
    let spec = ModelSpec {
        input_dim: 4,
        edge_dim: 3,
        node_layers: vec![
            LayerSpec::RelGat {
                in_dim: 4,
                out_dim: 4,
                heads: 1,
                edge_dim: 3,
                average_heads: true,
                activation: Activation::Elu,
            },
            LayerSpec::LayerNorm { dim: 4 },
        ],
        readout: Readout::MeanPool,
        graph_layers: vec![
            LayerSpec::Linear { in_dim: 4, out_dim: 3 },
            LayerSpec::Activation {
                kind: Activation::Relu,
            },
            LayerSpec::Linear { in_dim: 3, out_dim: 1 },
        ],
    };
    let mut model = Model::init(spec, &mut rng).unwrap();
    let (worst, _) = finite_difference_check(&mut model, &g);
    assert!(worst < 1e-4, "worst relative gradient error {worst}");
}

#[test]
fn doubling_loss_scale_doubles_gradients() {
    let mut rng = ChaCha12Rng::seed_from_u64(300);
    let g = PreparedGraph::new(&random_graph(&mut rng, 5, 4, 3, Some(1))).unwrap();
    let model = Model::init(node_regression_spec(4, 3), &mut rng).unwrap();
    let mut g1 = model.zeros_like();
    model.accumulate_gradients(&g, &mut g1, 1.0).unwrap();
    let mut g2 = model.zeros_like();
    model.accumulate_gradients(&g, &mut g2, 2.0).unwrap();
    for (a, b) in g1.0.iter().zip(&g2.0) {
        for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
            for (&x, &y) in ta.data().iter().zip(tb.data()) {
                assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-300));
            }
        }
    }
}

#[test]
fn zero_targets_zero_outputs_zero_gradients() {
    let mut rng = ChaCha12Rng::seed_from_u64(400);
    let mut graph = random_graph(&mut rng, 4, 3, 2, Some(1));
    graph.target = Target::PerNode(Matrix::zeros(4, 1));
    let g = PreparedGraph::new(&graph).unwrap();
    let spec = ModelSpec {
        input_dim: 3,
        edge_dim: 2,
        node_layers: vec![
            LayerSpec::Gcn { in_dim: 3, out_dim: 4 },
            LayerSpec::Linear { in_dim: 4, out_dim: 1 },
        ],
        readout: Readout::None,
        graph_layers: vec![],
    };
    let mut model = Model::init(spec, &mut rng).unwrap();
    // zero the final linear layer so predictions are exactly zero
    model.node_params[1].tensors[0] = Matrix::zeros(4, 1);
    model.node_params[1].tensors[1] = Matrix::zeros(1, 1);
    let mut grads = model.zeros_like();
    let loss = model.accumulate_gradients(&g, &mut grads, 1.0).unwrap();
    assert_eq!(loss, 0.0);
    for lp in grads.0.iter().chain(grads.1.iter()) {
        for t in &lp.tensors {
            assert!(t.data().iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn permutation_equivariance_is_exact() {
    let mut rng = ChaCha12Rng::seed_from_u64(500);
    let base = random_graph(&mut rng, 7, 5, 3, Some(1));
    let model = Model::init(node_regression_spec(5, 3), &mut rng).unwrap();
    let out1 = model
        .predict(&PreparedGraph::new(&base).unwrap())
        .unwrap();

    // apply permutation pi to node labels and also reshuffle edge order
    let pi: Vec<usize> = vec![3, 0, 6, 2, 5, 1, 4];
    let n = base.node_features.rows();
    let mut perm_feats = Matrix::zeros(n, base.node_features.cols());
    for i in 0..n {
        for c in 0..base.node_features.cols() {
            perm_feats.set(pi[i], c, base.node_features.get(i, c));
        }
    }
    let mut edge_pairs: Vec<((u32, u32), Vec<f64>)> = base
        .edges
        .iter()
        .enumerate()
        .map(|(k, &(s, d))| {
            (
                (pi[s as usize] as u32, pi[d as usize] as u32),
                base.edge_features.row(k).to_vec(),
            )
        })
        .collect();
    edge_pairs.reverse(); // different edge ordering on top of the relabel
    let edges: Vec<(u32, u32)> = edge_pairs.iter().map(|(e, _)| *e).collect();
    let edge_features =
        Matrix::from_rows(&edge_pairs.iter().map(|(_, f)| f.clone()).collect::<Vec<_>>()).unwrap();
    let mut perm_target = Matrix::zeros(n, 1);
    if let Target::PerNode(t) = &base.target {
        for i in 0..n {
            perm_target.set(pi[i], 0, t.get(i, 0));
        }
    }
    let permuted = GraphData {
        node_features: perm_feats,
        edges,
        edge_features,
        target: Target::PerNode(perm_target),
    };
    let out2 = model
        .predict(&PreparedGraph::new(&permuted).unwrap())
        .unwrap();
    for i in 0..n {
        for c in 0..out1.cols() {
            assert_eq!(
                out1.get(i, c).to_bits(),
                out2.get(pi[i], c).to_bits(),
                "node {i} channel {c} not bit-identical under permutation"
            );
        }
    }
}

#[test]
fn attention_rows_are_distributions() {
    let mut rng = ChaCha12Rng::seed_from_u64(600);
    let g = PreparedGraph::new(&random_graph(&mut rng, 8, 5, 3, Some(1))).unwrap();
    let model = Model::init(node_regression_spec(5, 3), &mut rng).unwrap();
    let layers = model.attention_distributions(&g).unwrap();
    assert_eq!(layers.len(), 1);
    for heads in &layers {
        for nodes in heads {
            for alpha in nodes {
                assert!(alpha.iter().all(|&a| a >= 0.0));
                let sum: f64 = alpha.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "attention row sums to {sum}");
            }
        }
    }
}

#[test]
fn gcn_path_graph_matches_hand_computed_normalization() {
    // path 0-1-2, one-hot features, W = I: output rows are A_hat rows
    let graph = GraphData {
        node_features: Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap(),
        edges: vec![(0, 1), (1, 0), (1, 2), (2, 1)],
        edge_features: Matrix::zeros(4, 1),
        target: Target::PerNode(Matrix::zeros(3, 1)),
    };
    let spec = ModelSpec {
        input_dim: 3,
        edge_dim: 1,
        node_layers: vec![LayerSpec::Gcn { in_dim: 3, out_dim: 3 }],
        readout: Readout::None,
        graph_layers: vec![],
    };
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let mut model = Model::init(spec, &mut rng).unwrap();
    model.node_params[0].tensors[0] = Matrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ])
    .unwrap();
    let out = model.predict(&PreparedGraph::new(&graph).unwrap()).unwrap();
    // degrees with self-loops: 2, 3, 2
    let s6 = 1.0 / 6.0f64.sqrt();
    let expect = [
        [0.5, s6, 0.0],
        [s6, 1.0 / 3.0, s6],
        [0.0, s6, 0.5],
    ];
    for i in 0..3 {
        for j in 0..3 {
            assert!(
                (out.get(i, j) - expect[i][j]).abs() < 1e-12,
                "A_hat[{i}][{j}] = {}, want {}",
                out.get(i, j),
                expect[i][j]
            );
        }
    }
}

#[test]
fn two_isolated_nodes_same_features_same_outputs() {
    let graph = GraphData {
        node_features: Matrix::from_rows(&[vec![0.3, -0.7], vec![0.3, -0.7]]).unwrap(),
        edges: vec![],
        edge_features: Matrix::zeros(0, 1),
        target: Target::PerNode(Matrix::zeros(2, 1)),
    };
    let spec = ModelSpec {
        input_dim: 2,
        edge_dim: 1,
        node_layers: vec![LayerSpec::Gcn { in_dim: 2, out_dim: 3 }],
        readout: Readout::None,
        graph_layers: vec![],
    };
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let model = Model::init(spec, &mut rng).unwrap();
    let out = model.predict(&PreparedGraph::new(&graph).unwrap()).unwrap();
    assert_eq!(out.row(0), out.row(1));
}

#[test]
fn layer_norm_fixture_rows() {
    let spec = ModelSpec {
        input_dim: 2,
        edge_dim: 1,
        node_layers: vec![LayerSpec::LayerNorm { dim: 2 }],
        readout: Readout::None,
        graph_layers: vec![],
    };
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let model = Model::init(spec, &mut rng).unwrap(); // gain=1, shift=0
    let graph = GraphData {
        node_features: Matrix::from_rows(&[vec![1.0, 3.0], vec![5.0, 5.0]]).unwrap(),
        edges: vec![],
        edge_features: Matrix::zeros(0, 1),
        target: Target::PerNode(Matrix::zeros(2, 1)),
    };
    let out = model.predict(&PreparedGraph::new(&graph).unwrap()).unwrap();
    // row [1,3]: mean 2, population std 1 -> [-1, 1] up to the 1e-5 epsilon
    assert!((out.get(0, 0) + 1.0).abs() < 1e-5);
    assert!((out.get(0, 1) - 1.0).abs() < 1e-5);
    // constant row -> zeros
    assert_eq!(out.get(1, 0), 0.0);
    assert_eq!(out.get(1, 1), 0.0);
}

#[test]
fn relgat_single_node_self_loop() {
    let spec = ModelSpec {
        input_dim: 3,
        edge_dim: 2,
        node_layers: vec![LayerSpec::RelGat {
            in_dim: 3,
            out_dim: 4,
            heads: 1,
            edge_dim: 2,
            average_heads: false,
            activation: Activation::Elu,
        }],
        readout: Readout::None,
        graph_layers: vec![],
    };
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    let model = Model::init(spec, &mut rng).unwrap();
    let x = vec![0.4, -1.2, 0.9];
    let graph = GraphData {
        node_features: Matrix::from_rows(&[x.clone()]).unwrap(),
        edges: vec![],
        edge_features: Matrix::zeros(0, 2),
        target: Target::PerNode(Matrix::zeros(1, 1)),
    };
    let prepared = PreparedGraph::new(&graph).unwrap();
    // alpha over a single element must be exactly 1
    let alphas = model.attention_distributions(&prepared).unwrap();
    assert_eq!(alphas[0][0][0], vec![1.0]);
    // out = elu(W x) with zero bias
    let w = &model.node_params[0].tensors[0];
    let out = model.predict(&prepared).unwrap();
    for c in 0..4 {
        let mut z = 0.0;
        for k in 0..3 {
            z += x[k] * w.get(k, c);
        }
        let elu = if z >= 0.0 { z } else { z.exp_m1() };
        assert!((out.get(0, c) - elu).abs() < 1e-15);
    }
}

#[test]
fn training_is_deterministic_and_zero_lr_is_identity() {
    let mut rng = ChaCha12Rng::seed_from_u64(800);
    let graphs: Vec<PreparedGraph> = (0..6)
        .map(|_| PreparedGraph::new(&random_graph(&mut rng, 5, 4, 3, Some(1))).unwrap())
        .collect();
    let spec = node_regression_spec(4, 3);
    let config = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 0,
        epochs: 5,
        seed: 42,
        patience: None,
    };
    let r1 = train(spec.clone(), &graphs, &graphs, &config).unwrap();
    let r2 = train(spec.clone(), &graphs, &graphs, &config).unwrap();
    assert_eq!(r1.history, r2.history, "seeded training must be reproducible");
    assert_eq!(r1.model.flat_params(), r2.model.flat_params());

    let zero_cfg = TrainConfig {
        learning_rate: 0.0,
        ..config
    };
    let r0 = train(spec.clone(), &graphs, &graphs, &zero_cfg).unwrap();
    let mut init_rng = ChaCha12Rng::seed_from_u64(zero_cfg.seed);
    let fresh = Model::init(spec, &mut init_rng).unwrap();
    assert_eq!(r0.model.flat_params(), fresh.flat_params());
}

#[test]
fn overfit_small_dataset() {
    let mut rng = ChaCha12Rng::seed_from_u64(900);
    let graphs: Vec<PreparedGraph> = (0..10)
        .map(|_| PreparedGraph::new(&random_graph(&mut rng, 5, 4, 3, None)).unwrap())
        .collect();
    let spec = ModelSpec {
        input_dim: 4,
        edge_dim: 3,
        node_layers: vec![LayerSpec::RelGat {
            in_dim: 4,
            out_dim: 8,
            heads: 1,
            edge_dim: 3,
            average_heads: false,
            activation: Activation::Elu,
        }],
        readout: Readout::MeanPool,
        graph_layers: vec![
            LayerSpec::Linear { in_dim: 8, out_dim: 16 },
            LayerSpec::Activation {
                kind: Activation::Relu,
            },
            LayerSpec::Linear { in_dim: 16, out_dim: 1 },
        ],
    };
    let config = TrainConfig {
        learning_rate: 5e-3,
        batch_size: 0,
        epochs: 500,
        seed: 1,
        patience: None,
    };
    let result = train(spec, &graphs, &[], &config).unwrap();
    let final_loss = result.history.last().unwrap().0;
    assert!(final_loss < 1e-4, "memorization failed: loss {final_loss}");
}

#[test]
fn paper_scale_style_count() {
    // a 12-layer 2-head stack has the parameter count its shapes imply
    let spec = ModelSpec {
        input_dim: 18,
        edge_dim: 3,
        node_layers: vec![LayerSpec::RelGat {
            in_dim: 18,
            out_dim: 16,
            heads: 2,
            edge_dim: 3,
            average_heads: false,
            activation: Activation::Elu,
        }],
        readout: Readout::None,
        graph_layers: vec![],
    };
    // per head: 18*16 W + 3*16 U + 48 a + 16 bias = 400; two heads = 800
    assert_eq!(count_parameters(&spec), 800);
}
