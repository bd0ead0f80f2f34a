use rand::Rng as _;
use rayon::prelude::*;

use super::config::InputMode;
use super::ops::{self, NormCache, BN_EPS, BN_MOMENTUM};
use super::params::{InputParams, LayerParams, ModelParams};
use super::tensor::Real;
use crate::{rng, Error, Result};

/// A batch of model inputs, laid out `B x L x F` or `B x L`.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a, T> {
    Features(&'a [T]),
    Tokens(&'a [u32]),
}

/// Training-mode switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainMode {
    /// Base seed for dropout masks; example `i` uses its own stream.
    pub dropout_seed: u64,
    /// Normalise with batch statistics (true) or the running estimates.
    pub batch_stats: bool,
}

impl TrainMode {
    pub fn new(dropout_seed: u64) -> Self {
        TrainMode {
            dropout_seed,
            batch_stats: true,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerTrace<T> {
    pub x: Vec<T>,
    pub q: Vec<T>,
    pub k: Vec<T>,
    pub v: Vec<T>,
    pub probs: Vec<T>,
    pub ctx: Vec<T>,
    pub attn_mask: Vec<T>,
    pub ln1: NormCache<T>,
    pub x1: Vec<T>,
    pub f1: Vec<T>,
    pub g: Vec<T>,
    pub ffn_mask: Vec<T>,
    pub ln2: NormCache<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct ExampleTrace<T> {
    pub embed_ln: NormCache<T>,
    pub embed_mask: Vec<T>,
    pub layers: Vec<LayerTrace<T>>,
    pub h0: Vec<T>,
    pub pooled: Vec<T>,
    pub pool_mask: Vec<T>,
}

#[derive(Debug, Clone)]
pub(crate) enum InputTrace<T> {
    Continuous {
        /// Normalised input before the batch-norm affine, `B x L x F`.
        xhat: Vec<T>,
        /// Batch-norm output fed to the mapping layer.
        normed: Vec<T>,
        /// Per-position batch mean and unbiased variance (batch-stat mode).
        batch_mean: Vec<T>,
        batch_var: Vec<T>,
    },
    Tokens {
        ids: Vec<u32>,
    },
}

/// Activations cached by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub(crate) batch: usize,
    pub(crate) input: InputTrace<T>,
    pub(crate) examples: Vec<ExampleTrace<T>>,
    pub(crate) mode: TrainMode,
}

impl<T> ForwardTrace<T> {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Attention probabilities of example `b`, layer `layer`: `heads x L x L`.
    pub fn attention_probs(&self, b: usize, layer: usize) -> &[T] {
        &self.examples[b].layers[layer].probs
    }
}

pub(crate) fn batch_size<T: Real>(p: &ModelParams<T>, input: &Input<T>) -> Result<usize> {
    let cfg = &p.config;
    let (dim, per, len) = match (input, cfg.input_mode) {
        (Input::Features(x), InputMode::Continuous) => ("features", cfg.seq_len * cfg.input_dim, x.len()),
        (Input::Tokens(ids), InputMode::Tokens) => ("tokens", cfg.seq_len, ids.len()),
        (Input::Features(_), InputMode::Tokens) => {
            return Err(Error::data("model expects token ids, got feature matrices"))
        }
        (Input::Tokens(_), InputMode::Continuous) => {
            return Err(Error::data("model expects feature matrices, got token ids"))
        }
    };
    if len == 0 || len % per != 0 {
        return Err(Error::Shape {
            dim,
            expected: per,
            actual: if len == 0 { 0 } else { len % per },
        });
    }
    if let Input::Tokens(ids) = input {
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= cfg.input_dim) {
            return Err(Error::Shape {
                dim: "token id",
                expected: cfg.input_dim,
                actual: bad as usize,
            });
        }
    }
    Ok(len / per)
}

/// Batch norm over sequence positions. Returns (normed, xhat, mean, var).
pub(crate) fn batch_norm<T: Real>(
    p: &ModelParams<T>,
    x: &[T],
    b: usize,
    batch_stats: bool,
) -> (Vec<T>, Vec<T>, Vec<T>, Vec<T>) {
    let InputParams::Continuous {
        batch_norm,
        running_mean,
        running_var,
        ..
    } = &p.input
    else {
        unreachable!("continuous input checked by caller")
    };
    let (l, f) = (p.config.seq_len, p.config.input_dim);
    let n = b * f;
    let eps = T::lit(BN_EPS);
    let mut xhat = vec![T::zero(); x.len()];
    let mut normed = vec![T::zero(); x.len()];
    let mut means = vec![T::zero(); l];
    let mut vars = vec![T::zero(); l];
    for pos in 0..l {
        let rows = || (0..b).map(move |e| (e * l + pos) * f);
        let (mean, inv) = if batch_stats {
            let nf = T::lit(n as f64);
            let mean = rows().map(|s| x[s..s + f].iter().copied().sum::<T>()).sum::<T>() / nf;
            let ss = rows()
                .map(|s| x[s..s + f].iter().map(|&v| (v - mean) * (v - mean)).sum::<T>())
                .sum::<T>();
            let biased = ss / nf;
            means[pos] = mean;
            vars[pos] = if n > 1 { ss / T::lit((n - 1) as f64) } else { biased };
            (mean, T::one() / (biased + eps).sqrt())
        } else {
            let (m, v) = (running_mean.data[pos], running_var.data[pos]);
            (m, T::one() / (v + eps).sqrt())
        };
        let (g, be) = (batch_norm.gamma.data[pos], batch_norm.beta.data[pos]);
        for s in rows() {
            for i in s..s + f {
                let xh = (x[i] - mean) * inv;
                xhat[i] = xh;
                normed[i] = g * xh + be;
            }
        }
    }
    (normed, xhat, means, vars)
}

fn dropout_mask<T: Real>(n: usize, rate: f64, rng: Option<&mut rng::Rng>) -> Vec<T> {
    match rng {
        Some(r) if rate > 0.0 => {
            let keep = T::lit(1.0 / (1.0 - rate));
            (0..n)
                .map(|_| if r.random::<f64>() < rate { T::zero() } else { keep })
                .collect()
        }
        _ => Vec::new(),
    }
}

fn apply_mask<T: Real>(x: &mut [T], mask: &[T]) {
    if !mask.is_empty() {
        for (v, &m) in x.iter_mut().zip(mask) {
            *v *= m;
        }
    }
}

fn layer_forward<T: Real>(
    lp: &LayerParams<T>,
    x: Vec<T>,
    l: usize,
    h: usize,
    heads: usize,
    rate: f64,
    mut rng: Option<&mut rng::Rng>,
) -> (Vec<T>, LayerTrace<T>) {
    let q = ops::linear(&x, l, &lp.query);
    let k = ops::linear(&x, l, &lp.key);
    let v = ops::linear(&x, l, &lp.value);
    let (ctx, probs) = ops::attention(&q, &k, &v, l, h, heads);
    let mut o = ops::linear(&ctx, l, &lp.attn_out);
    let attn_mask = dropout_mask(o.len(), rate, rng.as_deref_mut());
    apply_mask(&mut o, &attn_mask);
    for (oi, &xi) in o.iter_mut().zip(&x) {
        *oi += xi;
    }
    let (x1, ln1) = ops::layer_norm(&o, h, &lp.attn_norm);
    let f1 = ops::linear(&x1, l, &lp.ffn_in);
    let g: Vec<T> = f1.iter().map(|&v| ops::gelu(v)).collect();
    let mut f2 = ops::linear(&g, l, &lp.ffn_out);
    let ffn_mask = dropout_mask(f2.len(), rate, rng.as_deref_mut());
    apply_mask(&mut f2, &ffn_mask);
    for (fi, &xi) in f2.iter_mut().zip(&x1) {
        *fi += xi;
    }
    let (x2, ln2) = ops::layer_norm(&f2, h, &lp.ffn_norm);
    let trace = LayerTrace {
        x,
        q,
        k,
        v,
        probs,
        ctx,
        attn_mask,
        ln1,
        x1,
        f1,
        g,
        ffn_mask,
        ln2,
    };
    (x2, trace)
}

/// Everything after the input stage for one example. `embedded` is the
/// `L x H` sum of input projection and segment bias.
fn example_forward<T: Real>(
    p: &ModelParams<T>,
    embedded: Vec<T>,
    mut rng: Option<rng::Rng>,
) -> (Vec<T>, ExampleTrace<T>) {
    let cfg = &p.config;
    let (l, h) = (cfg.seq_len, cfg.hidden);
    let rate = cfg.dropout;
    let (mut x, embed_ln) = ops::layer_norm(&embedded, h, &p.embed_norm);
    let embed_mask = dropout_mask(x.len(), rate, rng.as_mut());
    apply_mask(&mut x, &embed_mask);
    let mut layers = Vec::with_capacity(cfg.layers);
    for i in 0..cfg.layers {
        let (next, t) = layer_forward(p.layer(i), x, l, h, cfg.heads, rate, rng.as_mut());
        layers.push(t);
        x = next;
    }
    let h0 = x[..h].to_vec();
    let pooled: Vec<T> = ops::linear(&h0, 1, &p.pooler).into_iter().map(|v| v.tanh()).collect();
    let pool_mask = dropout_mask(h, rate, rng.as_mut());
    let mut dropped = pooled.clone();
    apply_mask(&mut dropped, &pool_mask);
    let logits = ops::linear(&dropped, 1, &p.classifier);
    let trace = ExampleTrace {
        embed_ln,
        embed_mask,
        layers,
        h0,
        pooled,
        pool_mask,
    };
    (logits, trace)
}

/// Input projection plus segment row 0, `L x H`, for example `e`.
fn embed<T: Real>(p: &ModelParams<T>, normed: Option<&[T]>, ids: Option<&[u32]>, e: usize) -> Vec<T> {
    let cfg = &p.config;
    let (l, h) = (cfg.seq_len, cfg.hidden);
    let mut out = match &p.input {
        InputParams::Continuous { mapping, .. } => {
            let f = cfg.input_dim;
            let x = &normed.expect("features")[e * l * f..(e + 1) * l * f];
            ops::linear(x, l, mapping)
        }
        InputParams::Tokens {
            token_embedding,
            position_embedding,
        } => {
            let ids = &ids.expect("tokens")[e * l..(e + 1) * l];
            let mut out = vec![T::zero(); l * h];
            for (pos, &id) in ids.iter().enumerate() {
                let row = &mut out[pos * h..(pos + 1) * h];
                row.copy_from_slice(&token_embedding.data[id as usize * h..(id as usize + 1) * h]);
                if let Some(pe) = position_embedding {
                    ops::axpy(T::one(), &pe.data[pos * h..(pos + 1) * h], row);
                }
            }
            out
        }
    };
    let seg = &p.segment.data[..h];
    for row in out.chunks_mut(h) {
        ops::axpy(T::one(), seg, row);
    }
    out
}

fn run<T: Real>(
    p: &ModelParams<T>,
    input: &Input<T>,
    mode: Option<TrainMode>,
) -> Result<(Vec<T>, ForwardTrace<T>)> {
    let b = batch_size(p, input)?;
    let input_trace = match input {
        Input::Features(x) => {
            let batch_stats = mode.is_some_and(|m| m.batch_stats);
            let (normed, xhat, batch_mean, batch_var) = batch_norm(p, x, b, batch_stats);
            InputTrace::Continuous {
                xhat,
                normed,
                batch_mean,
                batch_var,
            }
        }
        Input::Tokens(ids) => InputTrace::Tokens { ids: ids.to_vec() },
    };
    let (normed, ids) = match &input_trace {
        InputTrace::Continuous { normed, .. } => (Some(normed.as_slice()), None),
        InputTrace::Tokens { ids } => (None, Some(ids.as_slice())),
    };
    let results: Vec<(Vec<T>, ExampleTrace<T>)> = (0..b)
        .into_par_iter()
        .map(|e| {
            let rng = mode.map(|m| rng::stream(m.dropout_seed, &[e as u64]));
            example_forward(p, embed(p, normed, ids, e), rng)
        })
        .collect();
    let mut logits = Vec::with_capacity(b * p.config.classes);
    let mut examples = Vec::with_capacity(b);
    for (lg, tr) in results {
        logits.extend(lg);
        examples.push(tr);
    }
    let trace = ForwardTrace {
        batch: b,
        input: input_trace,
        examples,
        mode: mode.unwrap_or(TrainMode {
            dropout_seed: 0,
            batch_stats: false,
        }),
    };
    Ok((logits, trace))
}

/// Eval-mode forward: running batch-norm statistics, no dropout.
/// Returns `B x classes` logits.
pub fn forward<T: Real>(p: &ModelParams<T>, input: &Input<T>) -> Result<Vec<T>> {
    run(p, input, None).map(|(logits, _)| logits)
}

/// Training-mode forward. Running statistics are left untouched; apply them
/// with [`update_running_stats`] once the step is committed.
pub fn forward_train<T: Real>(
    p: &ModelParams<T>,
    input: &Input<T>,
    mode: TrainMode,
) -> Result<(Vec<T>, ForwardTrace<T>)> {
    run(p, input, Some(mode))
}

/// Exponential moving update of the batch-norm running statistics from a
/// batch-stat training pass.
pub fn update_running_stats<T: Real>(p: &mut ModelParams<T>, trace: &ForwardTrace<T>) {
    if !trace.mode.batch_stats {
        return;
    }
    if let (
        InputParams::Continuous {
            running_mean,
            running_var,
            ..
        },
        InputTrace::Continuous {
            batch_mean,
            batch_var,
            ..
        },
    ) = (&mut p.input, &trace.input)
    {
        let m = T::lit(BN_MOMENTUM);
        let keep = T::one() - m;
        for (r, &bm) in running_mean.data.iter_mut().zip(batch_mean) {
            *r = keep * *r + m * bm;
        }
        for (r, &bv) in running_var.data.iter_mut().zip(batch_var) {
            *r = keep * *r + m * bv;
        }
    }
}
