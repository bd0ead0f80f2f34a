use rand_distr::{Distribution, Normal};

use super::config::{InputMode, ModelConfig};
use super::tensor::{Real, Tensor};
use crate::rng::Rng;
use crate::Result;

pub const INIT_STD: f64 = 0.02;

/// Affine layer, weight stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[out, inp]),
            bias: Tensor::zeros(&[out]),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape[1]
    }
}

/// Scale and shift of a layer or batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Real> Affine<T> {
    pub fn identity(n: usize) -> Self {
        Affine {
            gamma: Tensor::filled(&[n], T::one()),
            beta: Tensor::zeros(&[n]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputParams<T> {
    Continuous {
        /// One channel per sequence position.
        batch_norm: Affine<T>,
        running_mean: Tensor<T>,
        running_var: Tensor<T>,
        mapping: Linear<T>,
    },
    Tokens {
        token_embedding: Tensor<T>,
        /// Absent when `use_positional` is false.
        position_embedding: Option<Tensor<T>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub attn_out: Linear<T>,
    pub attn_norm: Affine<T>,
    pub ffn_in: Linear<T>,
    pub ffn_out: Linear<T>,
    pub ffn_norm: Affine<T>,
}

impl<T: Real> LayerParams<T> {
    fn zeros(h: usize) -> Self {
        LayerParams {
            query: Linear::zeros(h, h),
            key: Linear::zeros(h, h),
            value: Linear::zeros(h, h),
            attn_out: Linear::zeros(h, h),
            attn_norm: Affine::identity(h),
            ffn_in: Linear::zeros(4 * h, h),
            ffn_out: Linear::zeros(h, 4 * h),
            ffn_norm: Affine::identity(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub input: InputParams<T>,
    /// 2 x H; only row 0 takes part in the forward pass.
    pub segment: Tensor<T>,
    pub embed_norm: Affine<T>,
    /// One entry per block; a single entry when layers are shared.
    pub layers: Vec<LayerParams<T>>,
    pub pooler: Linear<T>,
    pub classifier: Linear<T>,
}

impl<T: Real> ModelParams<T> {
    /// Parameters with every weight zero, norms at identity and running
    /// variance 1.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let h = cfg.hidden;
        let input = match cfg.input_mode {
            InputMode::Continuous => InputParams::Continuous {
                batch_norm: Affine::identity(cfg.seq_len),
                running_mean: Tensor::zeros(&[cfg.seq_len]),
                running_var: Tensor::filled(&[cfg.seq_len], T::one()),
                mapping: Linear::zeros(h, cfg.input_dim),
            },
            InputMode::Tokens => InputParams::Tokens {
                token_embedding: Tensor::zeros(&[cfg.input_dim, h]),
                position_embedding: cfg.use_positional.then(|| Tensor::zeros(&[cfg.seq_len, h])),
            },
        };
        Ok(ModelParams {
            config: cfg.clone(),
            input,
            segment: Tensor::zeros(&[2, h]),
            embed_norm: Affine::identity(h),
            layers: (0..cfg.layer_blocks()).map(|_| LayerParams::zeros(h)).collect(),
            pooler: Linear::zeros(h, h),
            classifier: Linear::zeros(cfg.classes, h),
        })
    }

    /// Gradient accumulator matching this model: every learnable tensor zero.
    pub fn zero_grads(&self) -> Self {
        let mut g = self.clone();
        for (_, t) in g.learnable_mut() {
            t.fill_zero();
        }
        g
    }

    /// Learnable tensors with stable names, in canonical order.
    pub fn learnable(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<(String, &Tensor<T>)> = Vec::new();
        match &self.input {
            InputParams::Continuous {
                batch_norm, mapping, ..
            } => {
                out.push(("batch_norm.gamma".into(), &batch_norm.gamma));
                out.push(("batch_norm.beta".into(), &batch_norm.beta));
                out.push(("mapping.weight".into(), &mapping.weight));
                out.push(("mapping.bias".into(), &mapping.bias));
            }
            InputParams::Tokens {
                token_embedding,
                position_embedding,
            } => {
                out.push(("token_embedding".into(), token_embedding));
                if let Some(p) = position_embedding {
                    out.push(("position_embedding".into(), p));
                }
            }
        }
        out.push(("segment".into(), &self.segment));
        out.push(("embed_norm.gamma".into(), &self.embed_norm.gamma));
        out.push(("embed_norm.beta".into(), &self.embed_norm.beta));
        for (i, l) in self.layers.iter().enumerate() {
            let p = format!("layers.{i}");
            for (n, lin) in [
                ("query", &l.query),
                ("key", &l.key),
                ("value", &l.value),
                ("attn_out", &l.attn_out),
            ] {
                out.push((format!("{p}.{n}.weight"), &lin.weight));
                out.push((format!("{p}.{n}.bias"), &lin.bias));
            }
            out.push((format!("{p}.attn_norm.gamma"), &l.attn_norm.gamma));
            out.push((format!("{p}.attn_norm.beta"), &l.attn_norm.beta));
            out.push((format!("{p}.ffn_in.weight"), &l.ffn_in.weight));
            out.push((format!("{p}.ffn_in.bias"), &l.ffn_in.bias));
            out.push((format!("{p}.ffn_out.weight"), &l.ffn_out.weight));
            out.push((format!("{p}.ffn_out.bias"), &l.ffn_out.bias));
            out.push((format!("{p}.ffn_norm.gamma"), &l.ffn_norm.gamma));
            out.push((format!("{p}.ffn_norm.beta"), &l.ffn_norm.beta));
        }
        out.push(("pooler.weight".into(), &self.pooler.weight));
        out.push(("pooler.bias".into(), &self.pooler.bias));
        out.push(("classifier.weight".into(), &self.classifier.weight));
        out.push(("classifier.bias".into(), &self.classifier.bias));
        out
    }

    /// Mutable view of [`learnable`](Self::learnable), same order.
    pub fn learnable_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let names: Vec<String> = self.learnable().into_iter().map(|(n, _)| n).collect();
        let mut refs: Vec<&mut Tensor<T>> = Vec::new();
        match &mut self.input {
            InputParams::Continuous {
                batch_norm, mapping, ..
            } => {
                refs.push(&mut batch_norm.gamma);
                refs.push(&mut batch_norm.beta);
                refs.push(&mut mapping.weight);
                refs.push(&mut mapping.bias);
            }
            InputParams::Tokens {
                token_embedding,
                position_embedding,
            } => {
                refs.push(token_embedding);
                if let Some(p) = position_embedding {
                    refs.push(p);
                }
            }
        }
        refs.push(&mut self.segment);
        refs.push(&mut self.embed_norm.gamma);
        refs.push(&mut self.embed_norm.beta);
        for l in &mut self.layers {
            for lin in [&mut l.query, &mut l.key, &mut l.value, &mut l.attn_out] {
                refs.push(&mut lin.weight);
                refs.push(&mut lin.bias);
            }
            refs.push(&mut l.attn_norm.gamma);
            refs.push(&mut l.attn_norm.beta);
            refs.push(&mut l.ffn_in.weight);
            refs.push(&mut l.ffn_in.bias);
            refs.push(&mut l.ffn_out.weight);
            refs.push(&mut l.ffn_out.bias);
            refs.push(&mut l.ffn_norm.gamma);
            refs.push(&mut l.ffn_norm.beta);
        }
        refs.push(&mut self.pooler.weight);
        refs.push(&mut self.pooler.bias);
        refs.push(&mut self.classifier.weight);
        refs.push(&mut self.classifier.bias);
        names.into_iter().zip(refs).collect()
    }

    /// Non-learnable state (batch-norm running statistics).
    pub fn buffers(&self) -> Vec<(String, &Tensor<T>)> {
        match &self.input {
            InputParams::Continuous {
                running_mean,
                running_var,
                ..
            } => vec![
                ("batch_norm.running_mean".into(), running_mean),
                ("batch_norm.running_var".into(), running_var),
            ],
            InputParams::Tokens { .. } => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        match &mut self.input {
            InputParams::Continuous {
                running_mean,
                running_var,
                ..
            } => vec![
                ("batch_norm.running_mean".into(), running_mean),
                ("batch_norm.running_var".into(), running_var),
            ],
            InputParams::Tokens { .. } => Vec::new(),
        }
    }

    /// Scalars actually allocated for learnable tensors.
    pub fn num_learnable(&self) -> usize {
        self.learnable().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(&self.config).expect("config already validated");
        for ((_, dst), (_, src)) in out.learnable_mut().into_iter().zip(self.learnable()) {
            *dst = src.cast();
        }
        for ((_, dst), (_, src)) in out.buffers_mut().into_iter().zip(self.buffers()) {
            *dst = src.cast();
        }
        out
    }

    /// Layer block used at depth `i` (the single block when shared).
    pub fn layer(&self, i: usize) -> &LayerParams<T> {
        if self.config.share_layers {
            &self.layers[0]
        } else {
            &self.layers[i]
        }
    }

    pub fn all_finite(&self) -> bool {
        self.learnable()
            .iter()
            .chain(self.buffers().iter())
            .all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }
}

/// Draw from N(0, std^2), redrawing anything beyond two standard deviations.
pub fn truncated_normal<T: Real>(rng: &mut Rng, std: f64) -> T {
    let normal = Normal::new(0.0, std).expect("positive std");
    loop {
        let v: f64 = normal.sample(rng);
        if v.abs() <= 2.0 * std {
            return T::lit(v);
        }
    }
}

fn fill_normal<T: Real>(t: &mut Tensor<T>, rng: &mut Rng) {
    for v in &mut t.data {
        *v = truncated_normal(rng, INIT_STD);
    }
}

/// Random initialisation: weights and embeddings from a truncated normal,
/// biases zero, norm scales one.
pub fn init_model<T: Real>(cfg: &ModelConfig, rng: &mut Rng) -> Result<ModelParams<T>> {
    let mut p = ModelParams::<T>::zeros(cfg)?;
    for (name, t) in p.learnable_mut() {
        let is_weight = name.ends_with(".weight") || name.ends_with("embedding") || name == "segment";
        if is_weight {
            fill_normal(t, rng);
        }
    }
    Ok(p)
}

/// Re-initialise only the classifier head for a new class count.
pub fn reset_classifier<T: Real>(p: &mut ModelParams<T>, classes: usize, rng: &mut Rng) -> Result<()> {
    let mut cfg = p.config.clone();
    cfg.classes = classes;
    cfg.validate()?;
    let mut head = Linear::zeros(classes, cfg.hidden);
    fill_normal(&mut head.weight, rng);
    p.classifier = head;
    p.config = cfg;
    Ok(())
}
