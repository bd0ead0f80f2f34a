use rayon::prelude::*;

use super::forward::{ExampleTrace, ForwardTrace, InputTrace};
use super::ops;
use super::params::{InputParams, LayerParams, ModelParams};
use super::tensor::Real;

/// Examples handled per gradient partial. Fixed so the summation order, and
/// hence the result, does not depend on the thread count.
const CHUNK: usize = 4;

fn masked<T: Real>(dy: &[T], mask: &[T]) -> Vec<T> {
    if mask.is_empty() {
        dy.to_vec()
    } else {
        dy.iter().zip(mask).map(|(&a, &m)| a * m).collect()
    }
}

fn layer_mut<T: Real>(g: &mut ModelParams<T>, i: usize) -> &mut LayerParams<T> {
    if g.config.share_layers {
        &mut g.layers[0]
    } else {
        &mut g.layers[i]
    }
}

/// Backpropagates one example; returns the gradient w.r.t. the `L x H`
/// embedding sum (before the embedding norm).
fn example_backward<T: Real>(p: &ModelParams<T>, tr: &ExampleTrace<T>, dlogits: &[T], g: &mut ModelParams<T>) -> Vec<T> {
    let cfg = &p.config;
    let (l, h, heads) = (cfg.seq_len, cfg.hidden, cfg.heads);

    let dropped = masked(&tr.pooled, &tr.pool_mask);
    let dpd = ops::linear_backward(&dropped, 1, &p.classifier, dlogits, &mut g.classifier, true).unwrap();
    let dpooled = masked(&dpd, &tr.pool_mask);
    let dz: Vec<T> = dpooled
        .iter()
        .zip(&tr.pooled)
        .map(|(&d, &t)| d * (T::one() - t * t))
        .collect();
    let dh0 = ops::linear_backward(&tr.h0, 1, &p.pooler, &dz, &mut g.pooler, true).unwrap();

    let mut dx = vec![T::zero(); l * h];
    dx[..h].copy_from_slice(&dh0);
    for i in (0..cfg.layers).rev() {
        let lp = p.layer(i);
        let lt = &tr.layers[i];
        let gl = layer_mut(g, i);
        // feed-forward sublayer
        let dr2 = ops::layer_norm_backward(&dx, h, &lt.ln2, &lp.ffn_norm, &mut gl.ffn_norm);
        let df2 = masked(&dr2, &lt.ffn_mask);
        let mut dgel = ops::linear_backward(&lt.g, l, &lp.ffn_out, &df2, &mut gl.ffn_out, true).unwrap();
        for (d, &f) in dgel.iter_mut().zip(&lt.f1) {
            *d *= ops::gelu_grad(f);
        }
        let dx1_ffn = ops::linear_backward(&lt.x1, l, &lp.ffn_in, &dgel, &mut gl.ffn_in, true).unwrap();
        let dx1: Vec<T> = dr2.iter().zip(&dx1_ffn).map(|(&a, &b)| a + b).collect();
        // attention sublayer
        let dr1 = ops::layer_norm_backward(&dx1, h, &lt.ln1, &lp.attn_norm, &mut gl.attn_norm);
        let dout = masked(&dr1, &lt.attn_mask);
        let dctx = ops::linear_backward(&lt.ctx, l, &lp.attn_out, &dout, &mut gl.attn_out, true).unwrap();
        let (dq, dk, dv) = ops::attention_backward(&lt.q, &lt.k, &lt.v, &lt.probs, &dctx, l, h, heads);
        let mut dxin = dr1;
        for (lin, glin, d) in [
            (&lp.query, &mut gl.query, &dq),
            (&lp.key, &mut gl.key, &dk),
            (&lp.value, &mut gl.value, &dv),
        ] {
            let part = ops::linear_backward(&lt.x, l, lin, d, glin, true).unwrap();
            ops::axpy(T::one(), &part, &mut dxin);
        }
        dx = dxin;
    }
    let dln = masked(&dx, &tr.embed_mask);
    let de = ops::layer_norm_backward(&dln, h, &tr.embed_ln, &p.embed_norm, &mut g.embed_norm);
    for row in de.chunks(h) {
        ops::axpy(T::one(), row, &mut g.segment.data[..h]);
    }
    de
}

fn input_backward<T: Real>(
    p: &ModelParams<T>,
    input: &InputTrace<T>,
    e: usize,
    de: &[T],
    g: &mut ModelParams<T>,
) -> Option<Vec<T>> {
    let (l, h) = (p.config.seq_len, p.config.hidden);
    match (&p.input, input, &mut g.input) {
        (
            InputParams::Continuous { mapping, .. },
            InputTrace::Continuous { normed, .. },
            InputParams::Continuous { mapping: gm, .. },
        ) => {
            let f = p.config.input_dim;
            let x = &normed[e * l * f..(e + 1) * l * f];
            ops::linear_backward(x, l, mapping, de, gm, true)
        }
        (
            InputParams::Tokens { .. },
            InputTrace::Tokens { ids },
            InputParams::Tokens {
                token_embedding,
                position_embedding,
            },
        ) => {
            for (pos, &id) in ids[e * l..(e + 1) * l].iter().enumerate() {
                let d = &de[pos * h..(pos + 1) * h];
                ops::axpy(T::one(), d, &mut token_embedding.data[id as usize * h..(id as usize + 1) * h]);
                if let Some(pe) = position_embedding {
                    ops::axpy(T::one(), d, &mut pe.data[pos * h..(pos + 1) * h]);
                }
            }
            None
        }
        _ => unreachable!("trace does not match model input mode"),
    }
}

/// Reverse-mode gradients of every learnable tensor given `dlogits`
/// (`B x classes`). The result mirrors `params`; its buffers are copies and
/// carry no meaning.
pub fn backward<T: Real>(p: &ModelParams<T>, trace: &ForwardTrace<T>, dlogits: &[T]) -> ModelParams<T> {
    let c = p.config.classes;
    let b = trace.batch;
    assert_eq!(dlogits.len(), b * c, "dlogits must be batch x classes");
    let (l, f) = (p.config.seq_len, p.config.input_dim);

    let partials: Vec<(ModelParams<T>, Vec<Option<Vec<T>>>)> = (0..b)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = p.zero_grads();
            let mut dins = Vec::with_capacity(chunk.len());
            for &e in chunk {
                let de = example_backward(p, &trace.examples[e], &dlogits[e * c..(e + 1) * c], &mut g);
                dins.push(input_backward(p, &trace.input, e, &de, &mut g));
            }
            (g, dins)
        })
        .collect();

    let mut grads = p.zero_grads();
    let mut dnormed: Vec<T> = Vec::new();
    for (part, dins) in partials {
        for ((_, dst), (_, src)) in grads.learnable_mut().into_iter().zip(part.learnable()) {
            dst.add_assign(src);
        }
        for d in dins.into_iter().flatten() {
            dnormed.extend(d);
        }
    }

    // Batch norm: the input is data, so only the affine parameters need
    // gradients; xhat already reflects whichever statistics were used.
    if let (InputTrace::Continuous { xhat, .. }, InputParams::Continuous { batch_norm, .. }) =
        (&trace.input, &mut grads.input)
    {
        for e in 0..b {
            for pos in 0..l {
                let base = (e * l + pos) * f;
                let mut dg = T::zero();
                let mut db = T::zero();
                for i in base..base + f {
                    let dy = dnormed[i];
                    dg += dy * xhat[i];
                    db += dy;
                }
                batch_norm.gamma.data[pos] += dg;
                batch_norm.beta.data[pos] += db;
            }
        }
    }
    grads
}
