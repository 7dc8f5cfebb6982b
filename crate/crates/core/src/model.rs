//! GNN architectures (GCN, GAT, GIN), jumping knowledge, masked cross-entropy,
//! and the over-smoothing score. Forward passes are pure functions of
//! (config, graph, params).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph, PropagationOperator};
use crate::mat::Mat;
use crate::params::{FlatParams, ParamLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Gcn,
    Gat,
    Gin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpingKnowledge {
    None,
    Concat,
    Sum,
}

fn default_gat_slope() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub num_layers: usize,
    pub hidden_dim: usize,
    #[serde(default = "JumpingKnowledge::none")]
    pub jumping_knowledge: JumpingKnowledge,
    #[serde(default)]
    pub gin_epsilon_init: f64,
    #[serde(default = "default_gat_slope")]
    pub gat_leaky_slope: f64,
    pub seed: u64,
}

impl JumpingKnowledge {
    fn none() -> Self {
        JumpingKnowledge::None
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers < 1 {
            return Err(Error::InvalidArgument("num_layers must be >= 1".into()));
        }
        if self.hidden_dim < 1 {
            return Err(Error::InvalidArgument("hidden_dim must be >= 1".into()));
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical JSON encoding, used in provenance fields.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    fn uses_head(&self) -> bool {
        self.jumping_knowledge != JumpingKnowledge::None
    }

    fn layer_dims(&self, in_dim: usize, num_classes: usize, layer: usize) -> (usize, usize) {
        let f_in = if layer == 0 { in_dim } else { self.hidden_dim };
        let last = layer + 1 == self.num_layers;
        let f_out = if last && !self.uses_head() {
            num_classes
        } else {
            self.hidden_dim
        };
        (f_in, f_out)
    }

    /// Whether layer `layer` applies a trailing ReLU. The final mapping to
    /// logits is always linear so cross-entropy can reach 0.
    fn layer_relu(&self, layer: usize) -> bool {
        self.uses_head() || layer + 1 != self.num_layers
    }

    /// Deterministic segment order: layer order, weights before biases.
    pub fn build_layout(&self, in_dim: usize, num_classes: usize) -> ParamLayout {
        let mut shapes: Vec<(String, usize, usize)> = Vec::new();
        for l in 0..self.num_layers {
            let (f_in, f_out) = self.layer_dims(in_dim, num_classes, l);
            match self.architecture {
                Architecture::Gcn => {
                    shapes.push((format!("layer{l}.weight"), f_in, f_out));
                }
                Architecture::Gat => {
                    shapes.push((format!("layer{l}.weight"), f_in, f_out));
                    shapes.push((format!("layer{l}.att"), 2 * f_out, 0));
                }
                Architecture::Gin => {
                    shapes.push((format!("layer{l}.mlp1.weight"), f_in, self.hidden_dim));
                    shapes.push((format!("layer{l}.mlp1.bias"), self.hidden_dim, 0));
                    shapes.push((format!("layer{l}.mlp2.weight"), self.hidden_dim, f_out));
                    shapes.push((format!("layer{l}.mlp2.bias"), f_out, 0));
                    shapes.push((format!("layer{l}.eps"), 1, 0));
                }
            }
        }
        if self.uses_head() {
            let width = match self.jumping_knowledge {
                JumpingKnowledge::Concat => self.hidden_dim * self.num_layers,
                JumpingKnowledge::Sum => self.hidden_dim,
                JumpingKnowledge::None => unreachable!(),
            };
            shapes.push(("head.weight".into(), width, num_classes));
        }
        ParamLayout::from_shapes(&shapes)
    }

    /// Glorot-uniform weights from a seeded generator; biases zero; GIN
    /// epsilon from `gin_epsilon_init`.
    pub fn init_params(&self, in_dim: usize, num_classes: usize) -> FlatParams {
        let layout = Arc::new(self.build_layout(in_dim, num_classes));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut values = vec![0.0; layout.total_dim];
        for seg in &layout.segments {
            let range = layout.range(seg);
            if seg.name.ends_with(".bias") {
                // zeros
            } else if seg.name.ends_with(".eps") {
                values[range.start] = self.gin_epsilon_init;
            } else if seg.name.ends_with(".att") {
                let bound = (6.0 / (seg.rows as f64 + 1.0)).sqrt();
                for v in &mut values[range] {
                    *v = rng.gen_range(-bound..bound);
                }
            } else {
                let bound = (6.0 / (seg.rows as f64 + seg.cols as f64)).sqrt();
                for v in &mut values[range] {
                    *v = rng.gen_range(-bound..bound);
                }
            }
        }
        FlatParams { values, layout }
    }
}

/// Neighborhoods N(i) ∪ {i} in CSR form, used by GAT attention.
#[derive(Debug, Clone)]
pub struct SelfLoopAdjacency {
    pub offsets: Vec<usize>,
    pub cols: Vec<usize>,
}

impl SelfLoopAdjacency {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.num_nodes;
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + g.neighbors(i).len() + 1;
        }
        let mut cols = Vec::with_capacity(offsets[n]);
        for i in 0..n {
            let mut inserted = false;
            for &j in g.neighbors(i) {
                if !inserted && j > i {
                    cols.push(i);
                    inserted = true;
                }
                cols.push(j);
            }
            if !inserted {
                cols.push(i);
            }
        }
        SelfLoopAdjacency { offsets, cols }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.cols[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn num_entries(&self) -> usize {
        self.cols.len()
    }
}

/// Σ_{j∈N(i)} x_j without self-loops (GIN aggregation). The raw adjacency is
/// symmetric, so this also serves as its own transpose in backward passes.
pub fn raw_adjacency_matmul(g: &Graph, x: &Mat) -> Mat {
    assert_eq!(x.rows(), g.num_nodes);
    let mut out = Mat::zeros(x.rows(), x.cols());
    for i in 0..g.num_nodes {
        for &j in g.neighbors(i) {
            let xrow = x.row(j);
            let orow = out.row_mut(i);
            for (o, v) in orow.iter_mut().zip(xrow) {
                *o += v;
            }
        }
    }
    out
}

fn leaky_relu(v: f64, slope: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        slope * v
    }
}

/// ReLU(Â X θ); ReLU skipped when `apply_relu` is false.
pub fn gcn_layer_forward(
    op: &PropagationOperator,
    x: &Mat,
    theta: &Mat,
    apply_relu: bool,
) -> Result<Mat> {
    if x.cols() != theta.rows() {
        return Err(Error::DimensionMismatch(format!(
            "gcn: x cols {} != theta rows {}",
            x.cols(),
            theta.rows()
        )));
    }
    let pre = op.matmul(x).matmul(theta);
    Ok(if apply_relu { pre.relu() } else { pre })
}

/// Per-entry attention coefficients α aligned with `adj`'s CSR entries.
/// Scores are exp(LeakyReLU(a_l·θx_i + a_r·θx_j)) normalized per node with
/// max subtraction for stability.
pub fn gat_attention_coefficients(
    x: &Mat,
    theta: &Mat,
    a: &[f64],
    adj: &SelfLoopAdjacency,
    slope: f64,
) -> Result<Vec<f64>> {
    if x.cols() != theta.rows() {
        return Err(Error::DimensionMismatch(format!(
            "gat: x cols {} != theta rows {}",
            x.cols(),
            theta.rows()
        )));
    }
    let h = theta.cols();
    if a.len() != 2 * h {
        return Err(Error::DimensionMismatch(format!(
            "gat: attention vector length {} != 2*{h}",
            a.len()
        )));
    }
    let u = x.matmul(theta);
    let (a_left, a_right) = a.split_at(h);
    let self_score: Vec<f64> = (0..x.rows()).map(|i| crate::mat::dot(u.row(i), a_left)).collect();
    let nbr_score: Vec<f64> = (0..x.rows()).map(|i| crate::mat::dot(u.row(i), a_right)).collect();
    let mut alpha = vec![0.0; adj.num_entries()];
    for i in 0..x.rows() {
        let (s, e) = (adj.offsets[i], adj.offsets[i + 1]);
        let mut max_s = f64::NEG_INFINITY;
        for k in s..e {
            let t = leaky_relu(self_score[i] + nbr_score[adj.cols[k]], slope);
            alpha[k] = t;
            max_s = max_s.max(t);
        }
        let mut total = 0.0;
        for v in &mut alpha[s..e] {
            *v = (*v - max_s).exp();
            total += *v;
        }
        for v in &mut alpha[s..e] {
            *v /= total;
        }
    }
    Ok(alpha)
}

/// ReLU((A_α X) θ) with α from [`gat_attention_coefficients`]; single head.
pub fn gat_layer_forward(
    g: &Graph,
    x: &Mat,
    theta: &Mat,
    a: &[f64],
    slope: f64,
    apply_relu: bool,
) -> Result<Mat> {
    let adj = SelfLoopAdjacency::from_graph(g);
    let alpha = gat_attention_coefficients(x, theta, a, &adj, slope)?;
    let h = attention_aggregate(&adj, &alpha, x);
    let pre = h.matmul(theta);
    Ok(if apply_relu { pre.relu() } else { pre })
}

/// H_i = Σ_j α_ij x_j over the self-loop-augmented neighborhoods.
pub fn attention_aggregate(adj: &SelfLoopAdjacency, alpha: &[f64], x: &Mat) -> Mat {
    let mut out = Mat::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        for k in adj.offsets[i]..adj.offsets[i + 1] {
            let j = adj.cols[k];
            let w = alpha[k];
            let xrow = x.row(j);
            let orow = out.row_mut(i);
            for (o, v) in orow.iter_mut().zip(xrow) {
                *o += w * v;
            }
        }
    }
    out
}

/// MLP((1+ε) x_i + Σ_{j∈N(i)} x_j) with a two-layer ReLU MLP; neighborhood
/// excludes self.
#[allow(clippy::too_many_arguments)]
pub fn gin_layer_forward(
    g: &Graph,
    x: &Mat,
    epsilon: f64,
    w1: &Mat,
    b1: &[f64],
    w2: &Mat,
    b2: &[f64],
    apply_relu: bool,
) -> Result<Mat> {
    if x.cols() != w1.rows() || w1.cols() != w2.rows() {
        return Err(Error::DimensionMismatch("gin: mlp shape mismatch".into()));
    }
    if b1.len() != w1.cols() || b2.len() != w2.cols() {
        return Err(Error::DimensionMismatch("gin: bias shape mismatch".into()));
    }
    let mut h = raw_adjacency_matmul(g, x);
    for i in 0..x.rows() {
        let xrow = x.row(i);
        let hrow = h.row_mut(i);
        for (hv, xv) in hrow.iter_mut().zip(xrow) {
            *hv += (1.0 + epsilon) * xv;
        }
    }
    let mut pre1 = h.matmul(w1);
    add_bias(&mut pre1, b1);
    let m1 = pre1.relu();
    let mut pre2 = m1.matmul(w2);
    add_bias(&mut pre2, b2);
    Ok(if apply_relu { pre2.relu() } else { pre2 })
}

pub(crate) fn add_bias(m: &mut Mat, b: &[f64]) {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        for (v, bv) in row.iter_mut().zip(b) {
            *v += bv;
        }
    }
}

/// Combine per-layer outputs: concat along columns or elementwise sum.
pub fn jk_combine(layer_outputs: &[Mat], mode: JumpingKnowledge) -> Result<Mat> {
    if layer_outputs.is_empty() {
        return Err(Error::InvalidArgument("jk_combine on empty list".into()));
    }
    match mode {
        JumpingKnowledge::None | JumpingKnowledge::Concat => {
            let rows = layer_outputs[0].rows();
            let width: usize = layer_outputs.iter().map(|m| m.cols()).sum();
            let mut out = Mat::zeros(rows, width);
            for i in 0..rows {
                let orow = out.row_mut(i);
                let mut at = 0;
                for m in layer_outputs {
                    orow[at..at + m.cols()].copy_from_slice(m.row(i));
                    at += m.cols();
                }
            }
            Ok(out)
        }
        JumpingKnowledge::Sum => {
            let w = layer_outputs[0].cols();
            if layer_outputs.iter().any(|m| m.cols() != w) {
                return Err(Error::DimensionMismatch(
                    "jk sum requires equal layer widths".into(),
                ));
            }
            let mut out = layer_outputs[0].clone();
            for m in &layer_outputs[1..] {
                out.add_assign(m);
            }
            Ok(out)
        }
    }
}

/// Mean over masked nodes of −log softmax(logits)[label], with max
/// subtraction inside the log-sum-exp.
pub fn cross_entropy_loss(logits: &Mat, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if logits.rows() != labels.len() || logits.rows() != mask.len() {
        return Err(Error::DimensionMismatch(
            "loss: logits/labels/mask row mismatch".into(),
        ));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..logits.rows() {
        if !mask[i] {
            continue;
        }
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[labels[i]];
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(total / count as f64)
}

/// Fraction of masked nodes whose argmax logit equals the label.
pub fn accuracy(logits: &Mat, labels: &[usize], mask: &[bool]) -> f64 {
    let mut hit = 0usize;
    let mut count = 0usize;
    for i in 0..logits.rows() {
        if !mask[i] {
            continue;
        }
        let row = logits.row(i);
        let pred = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(j, _)| j)
            .unwrap();
        if pred == labels[i] {
            hit += 1;
        }
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        hit as f64 / count as f64
    }
}

pub(crate) enum LayerCache {
    Gcn {
        agg: Mat,
        pre: Mat,
    },
    Gat {
        u: Mat,
        scores: Vec<f64>,
        alpha: Vec<f64>,
        h: Mat,
        pre: Mat,
    },
    Gin {
        h: Mat,
        pre1: Mat,
        m1: Mat,
        pre2: Mat,
    },
}

pub(crate) struct ForwardCache {
    pub layer_inputs: Vec<Mat>,
    pub layer_outputs: Vec<Mat>,
    pub layers: Vec<LayerCache>,
    pub jk_input: Option<Mat>,
    pub logits: Mat,
}

/// Per-graph structures shared across many forward passes (landscape grids).
pub(crate) struct Precomp {
    pub prop: Option<PropagationOperator>,
    pub self_loop: Option<SelfLoopAdjacency>,
}

impl Precomp {
    pub fn new(config: &ModelConfig, g: &Graph) -> Self {
        match config.architecture {
            Architecture::Gcn => Precomp {
                prop: Some(normalize_adjacency(g)),
                self_loop: None,
            },
            Architecture::Gat => Precomp {
                prop: None,
                self_loop: Some(SelfLoopAdjacency::from_graph(g)),
            },
            Architecture::Gin => Precomp {
                prop: None,
                self_loop: None,
            },
        }
    }
}

pub(crate) fn forward_cached(
    config: &ModelConfig,
    g: &Graph,
    params: &FlatParams,
    pre: &Precomp,
) -> Result<ForwardCache> {
    let expected = config.build_layout(g.features.cols(), g.num_classes);
    if *params.layout != expected {
        return Err(Error::LayoutMismatch(
            "params layout does not match config/graph".into(),
        ));
    }
    let k = config.num_layers;
    let mut layer_inputs = Vec::with_capacity(k);
    let mut layer_outputs = Vec::with_capacity(k);
    let mut layers = Vec::with_capacity(k);
    let mut x = g.features.clone();
    for l in 0..k {
        let relu = config.layer_relu(l);
        let input = x;
        let (out, cache) = match config.architecture {
            Architecture::Gcn => {
                let theta = params.segment_mat(&format!("layer{l}.weight"));
                let op = pre.prop.as_ref().unwrap();
                let agg = op.matmul(&input);
                let pre_act = agg.matmul(&theta);
                let out = if relu { pre_act.relu() } else { pre_act.clone() };
                (out, LayerCache::Gcn { agg, pre: pre_act })
            }
            Architecture::Gat => {
                let theta = params.segment_mat(&format!("layer{l}.weight"));
                let a = params.segment_slice(&format!("layer{l}.att")).to_vec();
                let adj = pre.self_loop.as_ref().unwrap();
                let u = input.matmul(&theta);
                let hdim = theta.cols();
                let (a_left, a_right) = a.split_at(hdim);
                let self_score: Vec<f64> =
                    (0..input.rows()).map(|i| crate::mat::dot(u.row(i), a_left)).collect();
                let nbr_score: Vec<f64> =
                    (0..input.rows()).map(|i| crate::mat::dot(u.row(i), a_right)).collect();
                let mut scores = vec![0.0; adj.num_entries()];
                let mut alpha = vec![0.0; adj.num_entries()];
                for i in 0..input.rows() {
                    let (s, e) = (adj.offsets[i], adj.offsets[i + 1]);
                    let mut max_t = f64::NEG_INFINITY;
                    for kk in s..e {
                        let raw = self_score[i] + nbr_score[adj.cols[kk]];
                        scores[kk] = raw;
                        let t = leaky_relu(raw, config.gat_leaky_slope);
                        alpha[kk] = t;
                        max_t = max_t.max(t);
                    }
                    let mut total = 0.0;
                    for v in &mut alpha[s..e] {
                        *v = (*v - max_t).exp();
                        total += *v;
                    }
                    for v in &mut alpha[s..e] {
                        *v /= total;
                    }
                }
                let h = attention_aggregate(adj, &alpha, &input);
                let pre_act = h.matmul(&theta);
                let out = if relu { pre_act.relu() } else { pre_act.clone() };
                (
                    out,
                    LayerCache::Gat {
                        u,
                        scores,
                        alpha,
                        h,
                        pre: pre_act,
                    },
                )
            }
            Architecture::Gin => {
                let eps = params.segment_scalar(&format!("layer{l}.eps"));
                let w1 = params.segment_mat(&format!("layer{l}.mlp1.weight"));
                let b1 = params.segment_slice(&format!("layer{l}.mlp1.bias")).to_vec();
                let w2 = params.segment_mat(&format!("layer{l}.mlp2.weight"));
                let b2 = params.segment_slice(&format!("layer{l}.mlp2.bias")).to_vec();
                let mut h = raw_adjacency_matmul(g, &input);
                for i in 0..input.rows() {
                    let xrow = input.row(i);
                    let hrow = h.row_mut(i);
                    for (hv, xv) in hrow.iter_mut().zip(xrow) {
                        *hv += (1.0 + eps) * xv;
                    }
                }
                let mut pre1 = h.matmul(&w1);
                add_bias(&mut pre1, &b1);
                let m1 = pre1.relu();
                let mut pre2 = m1.matmul(&w2);
                add_bias(&mut pre2, &b2);
                let out = if relu { pre2.relu() } else { pre2.clone() };
                (
                    out,
                    LayerCache::Gin {
                        h,
                        pre1,
                        m1,
                        pre2,
                    },
                )
            }
        };
        layer_inputs.push(input);
        layer_outputs.push(out.clone());
        layers.push(cache);
        x = out;
    }

    let (logits, jk_input) = if config.uses_head() {
        let z = jk_combine(&layer_outputs, config.jumping_knowledge)?;
        let w = params.segment_mat("head.weight");
        (z.matmul(&w), Some(z))
    } else {
        (layer_outputs.last().unwrap().clone(), None)
    };

    Ok(ForwardCache {
        layer_inputs,
        layer_outputs,
        layers,
        jk_input,
        logits,
    })
}

/// Full forward pass: logits plus every intermediate layer output X^(l).
pub fn model_forward(
    config: &ModelConfig,
    g: &Graph,
    params: &FlatParams,
) -> Result<(Mat, Vec<Mat>)> {
    let pre = Precomp::new(config, g);
    let cache = forward_cached(config, g, params, &pre)?;
    Ok((cache.logits, cache.layer_outputs))
}

/// Mean pairwise Euclidean distance between rows, normalized by the mean row
/// norm; 0 when all rows are equal.
pub fn oversmoothing_score(x: &Mat) -> Result<f64> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "oversmoothing_score needs >= 2 nodes".into(),
        ));
    }
    let mut dist_sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist_sum += d;
        }
    }
    let mean_dist = dist_sum / (n * (n - 1) / 2) as f64;
    let mean_norm: f64 = (0..n).map(|i| crate::mat::norm2(x.row(i))).sum::<f64>() / n as f64;
    if mean_norm == 0.0 {
        return Ok(0.0);
    }
    Ok(mean_dist / mean_norm)
}
