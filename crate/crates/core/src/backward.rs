//! Hand-written reverse-mode gradients of the masked cross-entropy with
//! respect to every parameter, flattened in layout order. Validated against
//! central finite differences in the test suites.

use crate::error::Result;
use crate::graph::Graph;
use crate::mat::Mat;
use crate::model::{
    forward_cached, raw_adjacency_matmul, Architecture, ForwardCache, JumpingKnowledge,
    LayerCache, ModelConfig, Precomp,
};
use crate::params::FlatParams;

/// dL/dlogits for the masked mean cross-entropy: (softmax − onehot)/m on
/// masked rows, zero elsewhere.
fn loss_grad_logits(logits: &Mat, labels: &[usize], mask: &[bool]) -> Mat {
    let m = mask.iter().filter(|&&b| b).count() as f64;
    let mut grad = Mat::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        if !mask[i] {
            continue;
        }
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let grow = grad.row_mut(i);
        for (g, e) in grow.iter_mut().zip(&exps) {
            *g = e / total / m;
        }
        grow[labels[i]] -= 1.0 / m;
    }
    grad
}

fn relu_backward(upstream: &Mat, pre: &Mat) -> Mat {
    let mut out = upstream.clone();
    for (o, p) in out.data_mut().iter_mut().zip(pre.data()) {
        if *p <= 0.0 {
            *o = 0.0;
        }
    }
    out
}

struct GradSink<'a> {
    params: &'a FlatParams,
    grad: Vec<f64>,
}

impl<'a> GradSink<'a> {
    fn new(params: &'a FlatParams) -> Self {
        GradSink {
            params,
            grad: vec![0.0; params.dim()],
        }
    }

    fn add(&mut self, name: &str, values: &[f64]) {
        let seg = self.params.layout.segment(name).expect("segment exists");
        let range = self.params.layout.range(seg);
        debug_assert_eq!(range.len(), values.len());
        for (g, v) in self.grad[range].iter_mut().zip(values) {
            *g += v;
        }
    }
}

/// Exact gradient of `cross_entropy_loss(model_forward(...), labels, mask)`
/// with respect to `params`, in layout order.
pub fn backward_gradients(
    config: &ModelConfig,
    g: &Graph,
    params: &FlatParams,
    mask: &[bool],
) -> Result<Vec<f64>> {
    let pre = Precomp::new(config, g);
    backward_gradients_with(config, g, params, mask, &pre)
}

pub(crate) fn backward_gradients_with(
    config: &ModelConfig,
    g: &Graph,
    params: &FlatParams,
    mask: &[bool],
    pre: &Precomp,
) -> Result<Vec<f64>> {
    let cache = forward_cached(config, g, params, pre)?;
    let k = config.num_layers;
    let dlogits = loss_grad_logits(&cache.logits, &g.labels, mask);

    let mut sink = GradSink::new(params);

    // upstream gradient w.r.t. each layer's post-activation output
    let mut grad_out: Vec<Mat> = cache
        .layer_outputs
        .iter()
        .map(|m| Mat::zeros(m.rows(), m.cols()))
        .collect();

    match config.jumping_knowledge {
        JumpingKnowledge::None => {
            grad_out[k - 1] = dlogits;
        }
        JumpingKnowledge::Concat => {
            let z = cache.jk_input.as_ref().unwrap();
            let w = params.segment_mat("head.weight");
            let dw = z.t_matmul(&dlogits);
            sink.add("head.weight", dw.data());
            let dz = dlogits.matmul_t(&w);
            let mut at = 0;
            for (l, go) in grad_out.iter_mut().enumerate() {
                let width = cache.layer_outputs[l].cols();
                for i in 0..dz.rows() {
                    go.row_mut(i).copy_from_slice(&dz.row(i)[at..at + width]);
                }
                at += width;
            }
        }
        JumpingKnowledge::Sum => {
            let z = cache.jk_input.as_ref().unwrap();
            let w = params.segment_mat("head.weight");
            let dw = z.t_matmul(&dlogits);
            sink.add("head.weight", dw.data());
            let dz = dlogits.matmul_t(&w);
            for go in grad_out.iter_mut() {
                *go = dz.clone();
            }
        }
    }

    for l in (0..k).rev() {
        let upstream = std::mem::replace(&mut grad_out[l], Mat::zeros(0, 0));
        let d_input = backward_layer(config, g, params, &cache, l, &upstream, pre, &mut sink);
        if l > 0 {
            grad_out[l - 1].add_assign(&d_input);
        }
    }

    Ok(sink.grad)
}

#[allow(clippy::too_many_arguments)]
fn backward_layer(
    config: &ModelConfig,
    g: &Graph,
    params: &FlatParams,
    cache: &ForwardCache,
    l: usize,
    upstream: &Mat,
    pre: &Precomp,
    sink: &mut GradSink,
) -> Mat {
    let relu = config.jumping_knowledge != JumpingKnowledge::None || l + 1 != config.num_layers;
    let input = &cache.layer_inputs[l];
    match (&cache.layers[l], config.architecture) {
        (LayerCache::Gcn { agg, pre: pre_act }, Architecture::Gcn) => {
            let dpre = if relu {
                relu_backward(upstream, pre_act)
            } else {
                upstream.clone()
            };
            let theta = params.segment_mat(&format!("layer{l}.weight"));
            let dtheta = agg.t_matmul(&dpre);
            sink.add(&format!("layer{l}.weight"), dtheta.data());
            let dagg = dpre.matmul_t(&theta);
            // Â is symmetric, so Âᵀ dagg = Â dagg
            pre.prop.as_ref().unwrap().matmul(&dagg)
        }
        (
            LayerCache::Gat {
                u,
                scores,
                alpha,
                h,
                pre: pre_act,
            },
            Architecture::Gat,
        ) => {
            let adj = pre.self_loop.as_ref().unwrap();
            let slope = config.gat_leaky_slope;
            let theta = params.segment_mat(&format!("layer{l}.weight"));
            let hdim = theta.cols();
            let a = params.segment_slice(&format!("layer{l}.att"));
            let (a_left, a_right) = a.split_at(hdim);

            let dpre = if relu {
                relu_backward(upstream, pre_act)
            } else {
                upstream.clone()
            };
            // pre = H θ
            let mut dtheta = h.t_matmul(&dpre);
            let dh = dpre.matmul_t(&theta);

            // H_i = Σ_j α_ij x_j
            let n = input.rows();
            let mut dx = Mat::zeros(n, input.cols());
            let mut dalpha = vec![0.0; alpha.len()];
            for i in 0..n {
                let dh_row = dh.row(i);
                for kk in adj.offsets[i]..adj.offsets[i + 1] {
                    let j = adj.cols[kk];
                    dalpha[kk] = crate::mat::dot(dh_row, input.row(j));
                    let w = alpha[kk];
                    let drow = dx.row_mut(j);
                    for (d, up) in drow.iter_mut().zip(dh_row) {
                        *d += w * up;
                    }
                }
            }

            // softmax backward per node, then leaky-relu backward
            let mut ds = vec![0.0; alpha.len()];
            for i in 0..n {
                let (s, e) = (adj.offsets[i], adj.offsets[i + 1]);
                let inner: f64 = (s..e).map(|kk| alpha[kk] * dalpha[kk]).sum();
                for kk in s..e {
                    let dt = alpha[kk] * (dalpha[kk] - inner);
                    ds[kk] = if scores[kk] >= 0.0 { dt } else { slope * dt };
                }
            }

            // s_ij = a_l·u_i + a_r·u_j
            let mut da = vec![0.0; a.len()];
            let mut du = Mat::zeros(n, hdim);
            for i in 0..n {
                for kk in adj.offsets[i]..adj.offsets[i + 1] {
                    let j = adj.cols[kk];
                    let w = ds[kk];
                    if w == 0.0 {
                        continue;
                    }
                    for (dal, ui) in da[..hdim].iter_mut().zip(u.row(i)) {
                        *dal += w * ui;
                    }
                    for (dar, uj) in da[hdim..].iter_mut().zip(u.row(j)) {
                        *dar += w * uj;
                    }
                    let durow_i = du.row_mut(i);
                    for (d, al) in durow_i.iter_mut().zip(a_left) {
                        *d += w * al;
                    }
                    let durow_j = du.row_mut(j);
                    for (d, ar) in durow_j.iter_mut().zip(a_right) {
                        *d += w * ar;
                    }
                }
            }
            sink.add(&format!("layer{l}.att"), &da);

            // u = X θ: second θ contribution and the input gradient
            dtheta.add_assign(&input.t_matmul(&du));
            sink.add(&format!("layer{l}.weight"), dtheta.data());
            dx.add_assign(&du.matmul_t(&theta));
            dx
        }
        (
            LayerCache::Gin {
                h,
                pre1,
                m1,
                pre2,
            },
            Architecture::Gin,
        ) => {
            let eps = params.segment_scalar(&format!("layer{l}.eps"));
            let w1 = params.segment_mat(&format!("layer{l}.mlp1.weight"));
            let w2 = params.segment_mat(&format!("layer{l}.mlp2.weight"));

            let dpre2 = if relu {
                relu_backward(upstream, pre2)
            } else {
                upstream.clone()
            };
            let dw2 = m1.t_matmul(&dpre2);
            sink.add(&format!("layer{l}.mlp2.weight"), dw2.data());
            sink.add(&format!("layer{l}.mlp2.bias"), &column_sums(&dpre2));
            let dm1 = dpre2.matmul_t(&w2);
            let dpre1 = relu_backward(&dm1, pre1);
            let dw1 = h.t_matmul(&dpre1);
            sink.add(&format!("layer{l}.mlp1.weight"), dw1.data());
            sink.add(&format!("layer{l}.mlp1.bias"), &column_sums(&dpre1));
            let dh = dpre1.matmul_t(&w1);

            // H = (1+ε) X + A X with symmetric A
            let deps: f64 = dh
                .data()
                .iter()
                .zip(input.data())
                .map(|(d, x)| d * x)
                .sum();
            sink.add(&format!("layer{l}.eps"), &[deps]);
            let mut dx = raw_adjacency_matmul(g, &dh);
            for (d, up) in dx.data_mut().iter_mut().zip(dh.data()) {
                *d += (1.0 + eps) * up;
            }
            dx
        }
        _ => unreachable!("cache/architecture mismatch"),
    }
}

fn column_sums(m: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}
