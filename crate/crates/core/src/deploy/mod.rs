//! Post-training dynamic quantization and on-device style benchmarking.
//!
//! Every linear weight matrix (mapping, attention projections, feed-forward,
//! pooler, classifier) is stored as int8 with one symmetric per-tensor scale.
//! Biases, norms, embeddings and batch-norm statistics stay f32, and so do
//! all activations: [`qforward`] multiplies f32 inputs by int8 weights with
//! f32 accumulation and applies the scale once per output.

mod bench;
mod format;

use rayon::prelude::*;

use crate::model::forward::{batch_norm, batch_size};
use crate::model::ops;
use crate::model::{Input, InputParams, ModelConfig, ModelParams, Tensor};
use crate::{Error, Result};

pub use bench::{bench, BenchConfig, BenchModel, BenchReport};
pub use format::{
    decode_quantized, encode_quantized, load_quantized, save_quantized, QuantizedModel, QUANTIZED_MAGIC,
    QUANTIZED_VERSION,
};

/// Largest int8 magnitude used; -128 is never produced.
pub const QMAX: i8 = 127;

/// An int8 tensor with a symmetric scale: `value = q * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensor {
    pub shape: Vec<usize>,
    pub data: Vec<i8>,
    pub scale: f32,
}

impl QTensor {
    /// `scale = max|W| / 127`, `q = round(W / scale)` with ties away from
    /// zero. An all-zero tensor gets scale 1.
    pub fn quantize(t: &Tensor<f32>) -> Self {
        let max = t.max_abs();
        let scale = max / QMAX as f32;
        if !(scale > 0.0) || !scale.is_finite() {
            return QTensor {
                shape: t.shape.clone(),
                data: vec![0; t.numel()],
                scale: 1.0,
            };
        }
        let s = scale as f64;
        let data = t
            .data
            .iter()
            .map(|&w| (w as f64 / s).round().clamp(-(QMAX as f64), QMAX as f64) as i8)
            .collect();
        QTensor {
            shape: t.shape.clone(),
            data,
            scale,
        }
    }

    pub fn dequantize(&self) -> Tensor<f32> {
        Tensor::from_vec(&self.shape, self.data.iter().map(|&q| q as f32 * self.scale).collect())
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// A model whose linear weights are int8.
///
/// `float` holds every f32 tensor; its linear weight tensors keep their
/// shapes but carry no data. `weights` lists the quantized tensors by name in
/// canonical parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedParams {
    pub float: ModelParams<f32>,
    pub weights: Vec<(String, QTensor)>,
}

fn is_linear_weight(name: &str) -> bool {
    name.ends_with(".weight")
}

pub fn quantize_dynamic(params: &ModelParams<f32>) -> Result<QuantizedParams> {
    if !params.all_finite() {
        return Err(Error::data("cannot quantize a model with non-finite weights"));
    }
    let mut float = params.clone();
    let mut weights = Vec::new();
    for (name, t) in float.learnable_mut() {
        if is_linear_weight(&name) {
            weights.push((name, QTensor::quantize(t)));
            t.data = Vec::new();
        }
    }
    Ok(QuantizedParams { float, weights })
}

impl QuantizedParams {
    pub fn config(&self) -> &ModelConfig {
        &self.float.config
    }

    /// f32 model with the int8 weights expanded.
    pub fn dequantize(&self) -> ModelParams<f32> {
        let mut p = self.float.clone();
        let mut it = self.weights.iter();
        for (name, t) in p.learnable_mut() {
            if is_linear_weight(&name) {
                let (_, q) = it.next().expect("one quantized tensor per linear weight");
                *t = q.dequantize();
            }
        }
        p
    }

    /// `(int8 bytes + 4 bytes per scale, f32 bytes)` for the quantized
    /// weights.
    pub fn weight_payload(&self) -> (usize, usize) {
        let n: usize = self.weights.iter().map(|(_, q)| q.numel()).sum();
        (n + 4 * self.weights.len(), 4 * n)
    }

    fn slot(&self, i: usize) -> QLinear<'_> {
        let (name, w) = &self.weights[i];
        let bias_name = name.replace(".weight", ".bias");
        let bias = self
            .float
            .learnable()
            .into_iter()
            .find(|(n, _)| *n == bias_name)
            .map(|(_, t)| t.data.as_slice())
            .expect("every linear weight has a bias");
        QLinear { w, bias }
    }

    fn layout(&self) -> Layout<'_> {
        let base = usize::from(matches!(self.float.input, InputParams::Continuous { .. }));
        let blocks = self.float.layers.len();
        Layout {
            mapping: (base == 1).then(|| self.slot(0)),
            layers: (0..blocks)
                .map(|b| std::array::from_fn(|k| self.slot(base + 6 * b + k)))
                .collect(),
            pooler: self.slot(base + 6 * blocks),
            classifier: self.slot(base + 6 * blocks + 1),
        }
    }
}

#[derive(Clone, Copy)]
struct QLinear<'a> {
    w: &'a QTensor,
    bias: &'a [f32],
}

/// Quantized linear layers resolved once per forward call. Each layer holds
/// query, key, value, attn_out, ffn_in, ffn_out.
struct Layout<'a> {
    mapping: Option<QLinear<'a>>,
    layers: Vec<[QLinear<'a>; 6]>,
    pooler: QLinear<'a>,
    classifier: QLinear<'a>,
}

/// `y = scale * (x Q^T) + b` for `n` rows. The int8 weights are widened
/// once per call; products accumulate in f32 and the scale is applied to
/// each finished sum.
fn qlinear(x: &[f32], n: usize, lin: QLinear) -> Vec<f32> {
    let (out, inp) = (lin.w.shape[0], lin.w.shape[1]);
    let scale = lin.w.scale;
    let w: Vec<f32> = lin.w.data.iter().map(|&v| v as f32).collect();
    let mut y = vec![0f32; n * out];
    for r in 0..n {
        let xr = &x[r * inp..(r + 1) * inp];
        for o in 0..out {
            y[r * out + o] = ops::dot(&w[o * inp..(o + 1) * inp], xr) * scale + lin.bias[o];
        }
    }
    y
}

fn qexample(q: &QuantizedParams, lay: &Layout, mut x: Vec<f32>) -> Vec<f32> {
    let cfg = q.config();
    let (l, h) = (cfg.seq_len, cfg.hidden);
    let p = &q.float;
    let seg = &p.segment.data[..h];
    for row in x.chunks_mut(h) {
        ops::axpy(1.0, seg, row);
    }
    let (mut x, _) = ops::layer_norm(&x, h, &p.embed_norm);
    for i in 0..cfg.layers {
        let b = if cfg.share_layers { 0 } else { i };
        let [wq, wk, wv, wo, wi, wf] = lay.layers[b];
        let lp = &p.layers[b];
        let qm = qlinear(&x, l, wq);
        let km = qlinear(&x, l, wk);
        let vm = qlinear(&x, l, wv);
        let (ctx, _) = ops::attention(&qm, &km, &vm, l, h, cfg.heads);
        let mut o = qlinear(&ctx, l, wo);
        for (oi, &xi) in o.iter_mut().zip(&x) {
            *oi += xi;
        }
        let (x1, _) = ops::layer_norm(&o, h, &lp.attn_norm);
        let g: Vec<f32> = qlinear(&x1, l, wi).into_iter().map(ops::gelu).collect();
        let mut f = qlinear(&g, l, wf);
        for (fi, &xi) in f.iter_mut().zip(&x1) {
            *fi += xi;
        }
        x = ops::layer_norm(&f, h, &lp.ffn_norm).0;
    }
    let pooled: Vec<f32> = qlinear(&x[..h], 1, lay.pooler).into_iter().map(f32::tanh).collect();
    qlinear(&pooled, 1, lay.classifier)
}

/// Eval-mode forward with int8 linear weights; `B x classes` logits.
pub fn qforward(q: &QuantizedParams, input: &Input<f32>) -> Result<Vec<f32>> {
    let p = &q.float;
    let cfg = q.config();
    let b = batch_size(p, input)?;
    let lay = q.layout();
    let (l, h) = (cfg.seq_len, cfg.hidden);
    let normed = match input {
        Input::Features(x) => Some(batch_norm(p, x, b, false).0),
        Input::Tokens(_) => None,
    };
    let per: Vec<Vec<f32>> = (0..b)
        .into_par_iter()
        .map(|e| {
            let embedded = match (input, &p.input) {
                (Input::Features(_), _) => {
                    let f = cfg.input_dim;
                    let x = &normed.as_ref().expect("features")[e * l * f..(e + 1) * l * f];
                    qlinear(x, l, lay.mapping.expect("continuous model"))
                }
                (
                    Input::Tokens(ids),
                    InputParams::Tokens {
                        token_embedding,
                        position_embedding,
                    },
                ) => {
                    let mut out = vec![0f32; l * h];
                    for (pos, &id) in ids[e * l..(e + 1) * l].iter().enumerate() {
                        let row = &mut out[pos * h..(pos + 1) * h];
                        row.copy_from_slice(&token_embedding.data[id as usize * h..(id as usize + 1) * h]);
                        if let Some(pe) = position_embedding {
                            ops::axpy(1.0, &pe.data[pos * h..(pos + 1) * h], row);
                        }
                    }
                    out
                }
                _ => unreachable!("input mode checked by batch_size"),
            };
            qexample(q, &lay, embedded)
        })
        .collect();
    Ok(per.concat())
}
