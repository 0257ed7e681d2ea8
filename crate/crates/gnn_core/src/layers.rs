//! Layer kinds: specs, parameters, forward passes with caches, and exact
//! backward passes.

use serde::{Deserialize, Serialize};

use crate::graph::{stable_sum, PreparedGraph};
use crate::{GnnError, Matrix, Result};

const LEAKY_SLOPE: f64 = 0.2;
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    /// Fixed 0.2 negative slope.
    LeakyRelu,
    Elu,
    Identity,
}

impl Activation {
    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Elu => {
                if x >= 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative given pre-activation input.
    fn grad(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Elu => {
                if x >= 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Linear {
        in_dim: usize,
        out_dim: usize,
    },
    Activation {
        kind: Activation,
    },
    LayerNorm {
        dim: usize,
    },
    Gcn {
        in_dim: usize,
        out_dim: usize,
    },
    /// Graph attention with edge features. `out_dim` is the per-head
    /// width; heads are concatenated unless `average_heads` is set.
    RelGat {
        in_dim: usize,
        out_dim: usize,
        heads: usize,
        edge_dim: usize,
        average_heads: bool,
        activation: Activation,
    },
}

impl LayerSpec {
    pub fn output_dim(&self, input_dim: usize) -> Result<usize> {
        match self {
            LayerSpec::Linear { in_dim, out_dim } | LayerSpec::Gcn { in_dim, out_dim } => {
                if *in_dim != input_dim {
                    return Err(GnnError::Spec(format!(
                        "layer expects input {in_dim}, got {input_dim}"
                    )));
                }
                Ok(*out_dim)
            }
            LayerSpec::Activation { .. } => Ok(input_dim),
            LayerSpec::LayerNorm { dim } => {
                if *dim != input_dim {
                    return Err(GnnError::Spec(format!(
                        "layer norm expects width {dim}, got {input_dim}"
                    )));
                }
                Ok(*dim)
            }
            LayerSpec::RelGat {
                in_dim,
                out_dim,
                heads,
                average_heads,
                ..
            } => {
                if *in_dim != input_dim {
                    return Err(GnnError::Spec(format!(
                        "gat expects input {in_dim}, got {input_dim}"
                    )));
                }
                if *heads == 0 {
                    return Err(GnnError::Spec("heads must be >= 1".into()));
                }
                Ok(if *average_heads {
                    *out_dim
                } else {
                    *out_dim * *heads
                })
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            LayerSpec::Linear { in_dim, out_dim } | LayerSpec::Gcn { in_dim, out_dim } => {
                in_dim * out_dim + out_dim
            }
            LayerSpec::Activation { .. } => 0,
            LayerSpec::LayerNorm { dim } => 2 * dim,
            LayerSpec::RelGat {
                in_dim,
                out_dim,
                heads,
                edge_dim,
                ..
            } => heads * (in_dim * out_dim + edge_dim * out_dim + 3 * out_dim + out_dim),
        }
    }

    /// Shapes of this layer's parameter tensors, in storage order.
    pub fn tensor_shapes(&self) -> Vec<(usize, usize)> {
        match self {
            LayerSpec::Linear { in_dim, out_dim } | LayerSpec::Gcn { in_dim, out_dim } => {
                vec![(*in_dim, *out_dim), (1, *out_dim)]
            }
            LayerSpec::Activation { .. } => vec![],
            LayerSpec::LayerNorm { dim } => vec![(1, *dim), (1, *dim)],
            LayerSpec::RelGat {
                in_dim,
                out_dim,
                heads,
                edge_dim,
                ..
            } => {
                let mut shapes = Vec::with_capacity(heads * 4);
                for _ in 0..*heads {
                    shapes.push((*in_dim, *out_dim)); // W
                    shapes.push((*edge_dim, *out_dim)); // U
                    shapes.push((1, 3 * out_dim)); // a
                    shapes.push((1, *out_dim)); // bias
                }
                shapes
            }
        }
    }
}

/// Parameter tensors of one layer, in the order of `tensor_shapes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub tensors: Vec<Matrix>,
}

impl LayerParams {
    pub fn zeros_like(spec: &LayerSpec) -> Self {
        Self {
            tensors: spec
                .tensor_shapes()
                .iter()
                .map(|&(r, c)| Matrix::zeros(r, c))
                .collect(),
        }
    }
}

/// Intermediate state kept by a forward pass for the matching backward.
#[derive(Debug, Clone)]
pub enum LayerCache {
    Linear {
        input: Matrix,
    },
    Activation {
        input: Matrix,
    },
    LayerNorm {
        input: Matrix,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gcn {
        input: Matrix,
        aggregated: Matrix, // A_hat * X
    },
    RelGat(Box<GatCache>),
}

#[derive(Debug, Clone)]
pub struct GatCache {
    pub input: Matrix,
    /// Per head: projected nodes (n x d).
    pub hw: Vec<Matrix>,
    /// Per head: projected edge features (e x d).
    pub ue: Vec<Matrix>,
    /// Per head, per dst: attention over [self, in-edges...] (same order
    /// as `PreparedGraph::in_edges` with the self-loop first).
    pub alpha: Vec<Vec<Vec<f64>>>,
    /// Per head, per dst: pre-LeakyReLU scores, same layout as alpha.
    pub raw_scores: Vec<Vec<Vec<f64>>>,
    /// Per head: pre-activation aggregated output (n x d).
    pub pre_act: Vec<Matrix>,
    /// Averaged-mode only: mean of per-head pre-activations.
    pub mean_pre_act: Option<Matrix>,
}

pub(crate) fn forward(
    spec: &LayerSpec,
    params: &LayerParams,
    graph: &PreparedGraph,
    input: &Matrix,
) -> Result<(Matrix, LayerCache)> {
    match spec {
        LayerSpec::Linear { .. } => {
            let w = &params.tensors[0];
            let b = &params.tensors[1];
            let mut out = input.matmul(w);
            for i in 0..out.rows() {
                for (o, &bv) in out.row_mut(i).iter_mut().zip(b.row(0)) {
                    *o += bv;
                }
            }
            Ok((
                out,
                LayerCache::Linear {
                    input: input.clone(),
                },
            ))
        }
        LayerSpec::Activation { kind } => {
            let mut out = input.clone();
            for v in out.data_mut() {
                *v = kind.apply(*v);
            }
            Ok((
                out,
                LayerCache::Activation {
                    input: input.clone(),
                },
            ))
        }
        LayerSpec::LayerNorm { dim } => {
            let gain = &params.tensors[0];
            let shift = &params.tensors[1];
            let n = input.rows();
            let d = *dim as f64;
            let mut out = Matrix::zeros(n, *dim);
            let mut means = Vec::with_capacity(n);
            let mut inv_stds = Vec::with_capacity(n);
            for i in 0..n {
                let row = input.row(i);
                let mean = row.iter().sum::<f64>() / d;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
                let inv_std = 1.0 / (var + LN_EPS).sqrt();
                for (j, o) in out.row_mut(i).iter_mut().enumerate() {
                    *o = (row[j] - mean) * inv_std * gain.get(0, j) + shift.get(0, j);
                }
                means.push(mean);
                inv_stds.push(inv_std);
            }
            Ok((
                out,
                LayerCache::LayerNorm {
                    input: input.clone(),
                    mean: means,
                    inv_std: inv_stds,
                },
            ))
        }
        LayerSpec::Gcn { out_dim, .. } => {
            // out = A_hat * X * W + b; aggregate first so the cached
            // A_hat*X feeds the weight gradient directly.
            let n = input.rows();
            let mut aggregated = Matrix::zeros(n, input.cols());
            let mut scratch: Vec<f64> = Vec::new();
            for i in 0..n {
                for c in 0..input.cols() {
                    scratch.clear();
                    for &(src, w) in &graph.gcn_adj[i] {
                        scratch.push(w * input.get(src as usize, c));
                    }
                    let v = stable_sum(&mut scratch);
                    aggregated.set(i, c, v);
                }
            }
            let w = &params.tensors[0];
            let b = &params.tensors[1];
            let mut out = aggregated.matmul(w);
            for i in 0..n {
                for (o, &bv) in out.row_mut(i).iter_mut().zip(b.row(0)) {
                    *o += bv;
                }
            }
            debug_assert_eq!(out.cols(), *out_dim);
            Ok((
                out,
                LayerCache::Gcn {
                    input: input.clone(),
                    aggregated,
                },
            ))
        }
        LayerSpec::RelGat {
            out_dim,
            heads,
            edge_dim,
            average_heads,
            activation,
            ..
        } => {
            if graph.edge_features.cols() != *edge_dim && !graph.in_edges.iter().all(Vec::is_empty)
            {
                return Err(GnnError::InvalidArgument(format!(
                    "edge features have width {}, layer expects {edge_dim}",
                    graph.edge_features.cols()
                )));
            }
            gat_forward(
                params,
                graph,
                input,
                *out_dim,
                *heads,
                *average_heads,
                *activation,
            )
        }
    }
}

fn gat_forward(
    params: &LayerParams,
    graph: &PreparedGraph,
    input: &Matrix,
    d: usize,
    heads: usize,
    average: bool,
    activation: Activation,
) -> Result<(Matrix, LayerCache)> {
    let n = input.rows();
    let mut hw_all = Vec::with_capacity(heads);
    let mut ue_all = Vec::with_capacity(heads);
    let mut alpha_all = Vec::with_capacity(heads);
    let mut raw_all = Vec::with_capacity(heads);
    let mut pre_all = Vec::with_capacity(heads);

    for h in 0..heads {
        let w = &params.tensors[4 * h];
        let u = &params.tensors[4 * h + 1];
        let a = &params.tensors[4 * h + 2];
        let bias = &params.tensors[4 * h + 3];
        let hw = input.matmul(w);
        let ue = graph.edge_features.matmul(u);
        let a_row = a.row(0);
        let (a_dst, rest) = a_row.split_at(d);
        let (a_src, a_edge) = rest.split_at(d);

        let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut raw: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut pre = Matrix::zeros(n, d);
        let mut scratch: Vec<f64> = Vec::new();

        for i in 0..n {
            let hw_i = hw.row(i);
            let dst_term: f64 = a_dst.iter().zip(hw_i).map(|(a, x)| a * x).sum();
            let in_list = &graph.in_edges[i];
            let count = in_list.len() + 1;
            let mut raw_i = Vec::with_capacity(count);
            // self-loop first; its edge feature is the zero vector
            let self_src: f64 = a_src.iter().zip(hw_i).map(|(a, x)| a * x).sum();
            raw_i.push(dst_term + self_src);
            for &(src, edge) in in_list {
                let hw_j = hw.row(src as usize);
                let src_term: f64 = a_src.iter().zip(hw_j).map(|(a, x)| a * x).sum();
                let edge_term: f64 = a_edge
                    .iter()
                    .zip(ue.row(edge as usize))
                    .map(|(a, x)| a * x)
                    .sum();
                raw_i.push(dst_term + src_term + edge_term);
            }
            // softmax over leaky-scored neighborhood, stable under permutation
            let scored: Vec<f64> = raw_i
                .iter()
                .map(|&s| Activation::LeakyRelu.apply(s))
                .collect();
            let max = scored.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scored.iter().map(|&s| (s - max).exp()).collect();
            scratch.clear();
            scratch.extend_from_slice(&exps);
            let denom = stable_sum(&mut scratch);
            let alpha_i: Vec<f64> = exps.iter().map(|&e| e / denom).collect();

            // aggregate alpha-weighted projected sources per channel
            for c in 0..d {
                scratch.clear();
                scratch.push(alpha_i[0] * hw_i[c]);
                for (k, &(src, _)) in in_list.iter().enumerate() {
                    scratch.push(alpha_i[k + 1] * hw.get(src as usize, c));
                }
                let v = stable_sum(&mut scratch) + bias.get(0, c);
                pre.set(i, c, v);
            }
            alpha.push(alpha_i);
            raw.push(raw_i);
        }
        hw_all.push(hw);
        ue_all.push(ue);
        alpha_all.push(alpha);
        raw_all.push(raw);
        pre_all.push(pre);
    }

    let (out, mean_pre) = if average {
        let mut mean = Matrix::zeros(n, d);
        let inv = 1.0 / heads as f64;
        for pre in &pre_all {
            mean.add_assign(pre);
        }
        mean.scale(inv);
        let mut out = mean.clone();
        for v in out.data_mut() {
            *v = activation.apply(*v);
        }
        (out, Some(mean))
    } else {
        let mut out = Matrix::zeros(n, d * heads);
        for i in 0..n {
            for (h, pre) in pre_all.iter().enumerate() {
                for c in 0..d {
                    out.set(i, h * d + c, activation.apply(pre.get(i, c)));
                }
            }
        }
        (out, None)
    };

    Ok((
        out,
        LayerCache::RelGat(Box::new(GatCache {
            input: input.clone(),
            hw: hw_all,
            ue: ue_all,
            alpha: alpha_all,
            raw_scores: raw_all,
            pre_act: pre_all,
            mean_pre_act: mean_pre,
        })),
    ))
}

/// Backward pass: accumulates parameter gradients into `grad_params` and
/// returns the gradient with respect to the layer input.
pub(crate) fn backward(
    spec: &LayerSpec,
    params: &LayerParams,
    graph: &PreparedGraph,
    cache: &LayerCache,
    grad_out: &Matrix,
    grad_params: &mut LayerParams,
) -> Matrix {
    match (spec, cache) {
        (LayerSpec::Linear { .. }, LayerCache::Linear { input }) => {
            let w = &params.tensors[0];
            let gw = input.transpose_matmul(grad_out);
            grad_params.tensors[0].add_assign(&gw);
            for i in 0..grad_out.rows() {
                for (gb, &g) in grad_params.tensors[1].row_mut(0).iter_mut().zip(grad_out.row(i)) {
                    *gb += g;
                }
            }
            grad_out.matmul_transpose(w)
        }
        (LayerSpec::Activation { kind }, LayerCache::Activation { input }) => {
            let mut gin = grad_out.clone();
            for (g, &x) in gin.data_mut().iter_mut().zip(input.data()) {
                *g *= kind.grad(x);
            }
            gin
        }
        (LayerSpec::LayerNorm { dim }, LayerCache::LayerNorm { input, mean, inv_std }) => {
            let gain = &params.tensors[0];
            let d = *dim as f64;
            let n = input.rows();
            let mut gin = Matrix::zeros(n, *dim);
            for i in 0..n {
                let row = input.row(i);
                let go = grad_out.row(i);
                let istd = inv_std[i];
                let mu = mean[i];
                // grads of gain/shift
                for j in 0..*dim {
                    let xhat = (row[j] - mu) * istd;
                    grad_params.tensors[0].data_mut()[j] += go[j] * xhat;
                    grad_params.tensors[1].data_mut()[j] += go[j];
                }
                // grad of input: standard layer-norm backward
                let gxhat: Vec<f64> = (0..*dim).map(|j| go[j] * gain.get(0, j)).collect();
                let sum_g: f64 = gxhat.iter().sum();
                let sum_gx: f64 = (0..*dim)
                    .map(|j| gxhat[j] * (row[j] - mu) * istd)
                    .sum();
                for j in 0..*dim {
                    let xhat = (row[j] - mu) * istd;
                    gin.set(
                        i,
                        j,
                        istd / d * (d * gxhat[j] - sum_g - xhat * sum_gx),
                    );
                }
            }
            gin
        }
        (LayerSpec::Gcn { .. }, LayerCache::Gcn { input, aggregated }) => {
            let w = &params.tensors[0];
            let gw = aggregated.transpose_matmul(grad_out);
            grad_params.tensors[0].add_assign(&gw);
            for i in 0..grad_out.rows() {
                for (gb, &g) in grad_params.tensors[1].row_mut(0).iter_mut().zip(grad_out.row(i)) {
                    *gb += g;
                }
            }
            // grad wrt aggregated, then push through A_hat (symmetric weights)
            let g_agg = grad_out.matmul_transpose(w);
            let n = input.rows();
            let mut gin = Matrix::zeros(n, input.cols());
            for i in 0..n {
                for &(src, wgt) in &graph.gcn_adj[i] {
                    let s = src as usize;
                    for c in 0..input.cols() {
                        gin.data_mut()[s * input.cols() + c] += wgt * g_agg.get(i, c);
                    }
                }
            }
            gin
        }
        (
            LayerSpec::RelGat {
                out_dim,
                heads,
                average_heads,
                activation,
                ..
            },
            LayerCache::RelGat(cache),
        ) => gat_backward(
            params,
            graph,
            cache,
            grad_out,
            *out_dim,
            *heads,
            *average_heads,
            *activation,
            grad_params,
        ),
        _ => unreachable!("cache kind mismatches layer spec"),
    }
}

#[allow(clippy::too_many_arguments)]
fn gat_backward(
    params: &LayerParams,
    graph: &PreparedGraph,
    cache: &GatCache,
    grad_out: &Matrix,
    d: usize,
    heads: usize,
    average: bool,
    activation: Activation,
    grad_params: &mut LayerParams,
) -> Matrix {
    let n = cache.input.rows();
    let mut grad_input = Matrix::zeros(n, cache.input.cols());

    for h in 0..heads {
        let w = &params.tensors[4 * h];
        let u = &params.tensors[4 * h + 1];
        let a = &params.tensors[4 * h + 2];
        let a_row = a.row(0);
        let (a_dst, rest) = a_row.split_at(d);
        let (a_src, a_edge) = rest.split_at(d);
        let hw = &cache.hw[h];
        let ue = &cache.ue[h];
        let pre = &cache.pre_act[h];

        // gradient wrt this head's pre-activation
        let mut g_pre = Matrix::zeros(n, d);
        if average {
            let mean = cache.mean_pre_act.as_ref().expect("averaged cache");
            let inv = 1.0 / heads as f64;
            for i in 0..n {
                for c in 0..d {
                    g_pre.set(
                        i,
                        c,
                        grad_out.get(i, c) * activation.grad(mean.get(i, c)) * inv,
                    );
                }
            }
        } else {
            for i in 0..n {
                for c in 0..d {
                    g_pre.set(
                        i,
                        c,
                        grad_out.get(i, h * d + c) * activation.grad(pre.get(i, c)),
                    );
                }
            }
        }

        let mut g_hw = Matrix::zeros(n, d);
        let mut g_ue = Matrix::zeros(ue.rows(), d);
        let (ga_tensor_offset, gbias_offset) = (4 * h + 2, 4 * h + 3);

        for i in 0..n {
            let in_list = &graph.in_edges[i];
            let alpha_i = &cache.alpha[h][i];
            let raw_i = &cache.raw_scores[h][i];
            let gp = g_pre.row(i);

            // bias gradient
            for c in 0..d {
                grad_params.tensors[gbias_offset].data_mut()[c] += gp[c];
            }

            // g_alpha_k = gp . hw_src(k); also g_hw_src += alpha_k * gp
            let count = in_list.len() + 1;
            let mut g_alpha = vec![0.0; count];
            for k in 0..count {
                let src = if k == 0 {
                    i
                } else {
                    in_list[k - 1].0 as usize
                };
                let hw_src = hw.row(src);
                let mut dot = 0.0;
                for c in 0..d {
                    dot += gp[c] * hw_src[c];
                    g_hw.data_mut()[src * d + c] += alpha_i[k] * gp[c];
                }
                g_alpha[k] = dot;
            }

            // softmax backward
            let weighted: f64 = (0..count).map(|k| alpha_i[k] * g_alpha[k]).sum();
            for k in 0..count {
                let g_scored = alpha_i[k] * (g_alpha[k] - weighted);
                // LeakyReLU on the raw score
                let g_raw = g_scored * Activation::LeakyRelu.grad(raw_i[k]);
                if g_raw == 0.0 {
                    continue;
                }
                let src = if k == 0 {
                    i
                } else {
                    in_list[k - 1].0 as usize
                };
                let hw_i = hw.row(i);
                let hw_j = hw.row(src);
                let ga = grad_params.tensors[ga_tensor_offset].data_mut();
                for c in 0..d {
                    ga[c] += g_raw * hw_i[c];
                    ga[d + c] += g_raw * hw_j[c];
                    g_hw.data_mut()[i * d + c] += g_raw * a_dst[c];
                    g_hw.data_mut()[src * d + c] += g_raw * a_src[c];
                }
                if k > 0 {
                    let e = in_list[k - 1].1 as usize;
                    let ue_row = ue.row(e);
                    let ga = grad_params.tensors[ga_tensor_offset].data_mut();
                    for c in 0..d {
                        ga[2 * d + c] += g_raw * ue_row[c];
                        g_ue.data_mut()[e * d + c] += g_raw * a_edge[c];
                    }
                }
            }
        }

        // project back: gW += X^T g_hw, gU += E^T g_ue, g_input += g_hw W^T
        let gw = cache.input.transpose_matmul(&g_hw);
        grad_params.tensors[4 * h].add_assign(&gw);
        let gu = graph.edge_features.transpose_matmul(&g_ue);
        grad_params.tensors[4 * h + 1].add_assign(&gu);
        grad_input.add_assign(&g_hw.matmul_transpose(w));
        let _ = u;
    }
    grad_input
}
