//! Model assembly: a stack of node layers, an optional mean-pool readout,
//! and a stack of post-readout layers.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{stable_sum, PreparedGraph, Target};
use crate::layers::{self, LayerCache, LayerParams, LayerSpec};
use crate::{GnnError, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Readout {
    /// Node-level output (node regression).
    None,
    /// Arithmetic mean over nodes, then `graph_layers` run on the pooled row.
    MeanPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub edge_dim: usize,
    pub node_layers: Vec<LayerSpec>,
    pub readout: Readout,
    pub graph_layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// Validate width compatibility and return the final output dim.
    pub fn validate(&self) -> Result<usize> {
        let mut dim = self.input_dim;
        for l in &self.node_layers {
            dim = l.output_dim(dim)?;
        }
        if self.readout == Readout::None && !self.graph_layers.is_empty() {
            return Err(GnnError::Spec(
                "graph layers require a pooling readout".into(),
            ));
        }
        for l in &self.graph_layers {
            dim = l.output_dim(dim)?;
        }
        Ok(dim)
    }

    fn all_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.node_layers.iter().chain(self.graph_layers.iter())
    }
}

/// Exact trainable-parameter count of a model spec.
pub fn count_parameters(spec: &ModelSpec) -> usize {
    spec.all_layers().map(|l| l.parameter_count()).sum()
}

/// A model: spec plus parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub spec: ModelSpec,
    pub node_params: Vec<LayerParams>,
    pub graph_params: Vec<LayerParams>,
}

impl Model {
    /// Glorot-uniform weights, zero biases, unit layer-norm gain; draws
    /// are consumed in layer order so a seed pins every parameter.
    pub fn init(spec: ModelSpec, rng: &mut ChaCha12Rng) -> Result<Self> {
        spec.validate()?;
        let node_params = spec
            .node_layers
            .iter()
            .map(|l| init_layer(l, rng))
            .collect();
        let graph_params = spec
            .graph_layers
            .iter()
            .map(|l| init_layer(l, rng))
            .collect();
        Ok(Self {
            spec,
            node_params,
            graph_params,
        })
    }

    pub fn zeros_like(&self) -> (Vec<LayerParams>, Vec<LayerParams>) {
        (
            self.spec
                .node_layers
                .iter()
                .map(LayerParams::zeros_like)
                .collect(),
            self.spec
                .graph_layers
                .iter()
                .map(LayerParams::zeros_like)
                .collect(),
        )
    }

    /// Forward pass; returns the output (per node, or 1 x d after pooling)
    /// and the caches needed for backward.
    pub fn forward(&self, graph: &PreparedGraph) -> Result<(Matrix, ForwardTrace)> {
        let mut x = graph.x.clone();
        let mut node_caches = Vec::with_capacity(self.spec.node_layers.len());
        for (spec, params) in self.spec.node_layers.iter().zip(&self.node_params) {
            let (out, cache) = layers::forward(spec, params, graph, &x)?;
            node_caches.push(cache);
            x = out;
        }
        let mut pooled_from = None;
        if self.spec.readout == Readout::MeanPool {
            if x.rows() == 0 {
                return Err(GnnError::InvalidArgument("cannot pool empty graph".into()));
            }
            pooled_from = Some(x.rows());
            x = mean_pool(&x);
        }
        let mut graph_caches = Vec::with_capacity(self.spec.graph_layers.len());
        for (spec, params) in self.spec.graph_layers.iter().zip(&self.graph_params) {
            let (out, cache) = layers::forward(spec, params, graph, &x)?;
            graph_caches.push(cache);
            x = out;
        }
        Ok((
            x,
            ForwardTrace {
                node_caches,
                graph_caches,
                pooled_from,
            },
        ))
    }

    /// Prediction without keeping caches.
    pub fn predict(&self, graph: &PreparedGraph) -> Result<Matrix> {
        self.forward(graph).map(|(out, _)| out)
    }

    /// Attention distributions of every RelGat layer: per layer, per head,
    /// per node, the weights over [self, in-neighbors...].
    pub fn attention_distributions(
        &self,
        graph: &PreparedGraph,
    ) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
        let (_, trace) = self.forward(graph)?;
        let mut out = Vec::new();
        for cache in trace
            .node_caches
            .iter()
            .chain(trace.graph_caches.iter())
        {
            if let LayerCache::RelGat(c) = cache {
                out.push(c.alpha.clone());
            }
        }
        Ok(out)
    }

    /// Mean-squared-error loss of a prediction against the graph's target.
    pub fn loss(output: &Matrix, target: &Target) -> f64 {
        match target {
            Target::PerNode(t) => {
                let n = (t.rows() * t.cols()) as f64;
                output
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(p, y)| (p - y) * (p - y))
                    .sum::<f64>()
                    / n
            }
            Target::Graph(y) => {
                let p = output.get(0, 0);
                (p - y) * (p - y)
            }
        }
    }

    /// Gradient of [`Model::loss`] with respect to the output.
    fn loss_grad(output: &Matrix, target: &Target) -> Matrix {
        match target {
            Target::PerNode(t) => {
                let n = (t.rows() * t.cols()) as f64;
                let mut g = Matrix::zeros(output.rows(), output.cols());
                for ((g, p), y) in g.data_mut().iter_mut().zip(output.data()).zip(t.data()) {
                    *g = 2.0 * (p - y) / n;
                }
                g
            }
            Target::Graph(y) => {
                let mut g = Matrix::zeros(1, output.cols());
                g.set(0, 0, 2.0 * (output.get(0, 0) - y));
                g
            }
        }
    }

    /// Forward + backward on one graph. Accumulates parameter gradients
    /// (scaled by `scale`) into `grads` and returns the loss.
    pub fn accumulate_gradients(
        &self,
        graph: &PreparedGraph,
        grads: &mut (Vec<LayerParams>, Vec<LayerParams>),
        scale: f64,
    ) -> Result<f64> {
        let (output, trace) = self.forward(graph)?;
        let loss = Self::loss(&output, &graph.target);
        let mut grad = Self::loss_grad(&output, &graph.target);
        grad.scale(scale);

        // layers::backward accumulates into the passed grad tensors, so the
        // batch sum builds up in place, one graph at a time.
        for idx in (0..self.spec.graph_layers.len()).rev() {
            grad = layers::backward(
                &self.spec.graph_layers[idx],
                &self.graph_params[idx],
                graph,
                &trace.graph_caches[idx],
                &grad,
                &mut grads.1[idx],
            );
        }
        if let Some(n) = trace.pooled_from {
            grad = mean_pool_backward(&grad, n);
        }
        for idx in (0..self.spec.node_layers.len()).rev() {
            grad = layers::backward(
                &self.spec.node_layers[idx],
                &self.node_params[idx],
                graph,
                &trace.node_caches[idx],
                &grad,
                &mut grads.0[idx],
            );
        }
        Ok(loss)
    }

    /// All parameters flattened in a fixed order (for checkpoints and
    /// finite-difference checks).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for lp in self.node_params.iter().chain(self.graph_params.iter()) {
            for t in &lp.tensors {
                out.extend_from_slice(t.data());
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let mut offset = 0;
        for lp in self
            .node_params
            .iter_mut()
            .chain(self.graph_params.iter_mut())
        {
            for t in &mut lp.tensors {
                let len = t.data().len();
                if offset + len > flat.len() {
                    return Err(GnnError::Shape("flat parameter vector too short".into()));
                }
                t.data_mut().copy_from_slice(&flat[offset..offset + len]);
                offset += len;
            }
        }
        if offset != flat.len() {
            return Err(GnnError::Shape(format!(
                "flat parameter vector has {} extra values",
                flat.len() - offset
            )));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct ForwardTrace {
    node_caches: Vec<LayerCache>,
    graph_caches: Vec<LayerCache>,
    pooled_from: Option<usize>,
}

/// Arithmetic mean over node rows, summed in canonical order.
pub fn mean_pool(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut out = Matrix::zeros(1, x.cols());
    let mut scratch = Vec::with_capacity(n);
    for c in 0..x.cols() {
        scratch.clear();
        for i in 0..n {
            scratch.push(x.get(i, c));
        }
        out.set(0, c, stable_sum(&mut scratch) / n as f64);
    }
    out
}

fn mean_pool_backward(grad: &Matrix, n: usize) -> Matrix {
    let mut out = Matrix::zeros(n, grad.cols());
    let inv = 1.0 / n as f64;
    for i in 0..n {
        for c in 0..grad.cols() {
            out.set(i, c, grad.get(0, c) * inv);
        }
    }
    out
}

fn init_layer(spec: &LayerSpec, rng: &mut ChaCha12Rng) -> LayerParams {
    let mut params = LayerParams::zeros_like(spec);
    match spec {
        LayerSpec::Linear { in_dim, out_dim } | LayerSpec::Gcn { in_dim, out_dim } => {
            glorot(&mut params.tensors[0], *in_dim, *out_dim, rng);
        }
        LayerSpec::LayerNorm { .. } => {
            for g in params.tensors[0].data_mut() {
                *g = 1.0;
            }
        }
        LayerSpec::Activation { .. } => {}
        LayerSpec::RelGat {
            in_dim,
            out_dim,
            heads,
            edge_dim,
            ..
        } => {
            for h in 0..*heads {
                glorot(&mut params.tensors[4 * h], *in_dim, *out_dim, rng);
                glorot(&mut params.tensors[4 * h + 1], *edge_dim, *out_dim, rng);
                glorot(&mut params.tensors[4 * h + 2], 3 * *out_dim, 1, rng);
                // bias stays zero
            }
        }
    }
    params
}

fn glorot(m: &mut Matrix, fan_in: usize, fan_out: usize, rng: &mut ChaCha12Rng) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in m.data_mut() {
        *v = rng.random::<f64>() * 2.0 * limit - limit;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphData;
    use rand::SeedableRng;

    fn graph_1node() -> PreparedGraph {
        PreparedGraph::new(&GraphData {
            node_features: Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(),
            edges: vec![],
            edge_features: Matrix::zeros(0, 3),
            target: Target::PerNode(Matrix::from_rows(&[vec![0.0]]).unwrap()),
        })
        .unwrap()
    }

    #[test]
    fn count_parameters_linear() {
        let spec = ModelSpec {
            input_dim: 4,
            edge_dim: 0,
            node_layers: vec![LayerSpec::Linear {
                in_dim: 4,
                out_dim: 2,
            }],
            readout: Readout::None,
            graph_layers: vec![],
        };
        assert_eq!(count_parameters(&spec), 10);
    }

    #[test]
    fn single_node_gcn_identity() {
        // single node, no edges, W = I, b = 0 -> H' = H
        let spec = ModelSpec {
            input_dim: 2,
            edge_dim: 3,
            node_layers: vec![LayerSpec::Gcn {
                in_dim: 2,
                out_dim: 2,
            }],
            readout: Readout::None,
            graph_layers: vec![],
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut model = Model::init(spec, &mut rng).unwrap();
        model.node_params[0].tensors[0] =
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = model.predict(&graph_1node()).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn flat_params_round_trip() {
        let spec = ModelSpec {
            input_dim: 3,
            edge_dim: 2,
            node_layers: vec![
                LayerSpec::RelGat {
                    in_dim: 3,
                    out_dim: 4,
                    heads: 2,
                    edge_dim: 2,
                    average_heads: false,
                    activation: crate::Activation::Elu,
                },
                LayerSpec::Linear {
                    in_dim: 8,
                    out_dim: 1,
                },
            ],
            readout: Readout::None,
            graph_layers: vec![],
        };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut model = Model::init(spec, &mut rng).unwrap();
        let flat = model.flat_params();
        assert_eq!(flat.len(), count_parameters(&model.spec));
        let mut flat2 = flat.clone();
        flat2[0] += 1.0;
        model.set_flat_params(&flat2).unwrap();
        assert_eq!(model.flat_params(), flat2);
    }

    #[test]
    fn mean_pool_two_nodes() {
        let x = Matrix::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let p = mean_pool(&x);
        assert_eq!(p.data(), &[1.0, 1.0]);
    }
}
