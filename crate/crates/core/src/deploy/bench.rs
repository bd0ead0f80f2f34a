//! Latency harness: feature extraction and model time for one clip, measured
//! on a single worker thread.

use std::time::Instant;

use rand::Rng as _;
use serde::Serialize;

use super::{encode_quantized, qforward, QuantizedModel};
use crate::model::{count_params, encode_checkpoint, forward, Checkpoint};
use crate::train::{Encoded, FeatureSource};
use crate::{rng, AudioClip, Error, Result};

const TAG_BENCH: u64 = 0x4245_4e43;

#[derive(Debug, Clone, Copy)]
pub enum BenchModel<'a> {
    Float(&'a Checkpoint),
    Quantized(&'a QuantizedModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub runs: usize,
    /// Untimed runs before measuring.
    pub warmup: usize,
    pub window_samples: usize,
    /// Seed of the synthetic input clip.
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            runs: 10,
            warmup: 3,
            window_samples: 220_500,
            seed: 0,
        }
    }
}

/// Timings in milliseconds. `*_ms` latencies cover feature extraction plus
/// the forward pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub quantized: bool,
    pub runs: usize,
    pub warmup: usize,
    pub params: u64,
    pub size_bytes: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub feature_mean_ms: f64,
    pub model_mean_ms: f64,
}

impl BenchReport {
    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report fields serialize")
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn measure(model: BenchModel, source: &FeatureSource, clip: &AudioClip, cfg: &BenchConfig) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(cfg.runs);
    for i in 0..cfg.warmup + cfg.runs {
        let t = Instant::now();
        let enc = source.encode(clip)?;
        let feat = ms(t);
        let t = Instant::now();
        let input = match &enc {
            Encoded::Features(v) => crate::model::Input::Features(v),
            Encoded::Tokens(v) => crate::model::Input::Tokens(v),
        };
        let logits = match model {
            BenchModel::Float(ck) => forward(&ck.params, &input)?,
            BenchModel::Quantized(q) => qforward(&q.params, &input)?,
        };
        std::hint::black_box(logits);
        let fwd = ms(t);
        if i >= cfg.warmup {
            out.push((feat, fwd));
        }
    }
    Ok(out)
}

/// Times `cfg.runs` single-clip inferences after `cfg.warmup` untimed ones.
/// The input is seeded noise, so repeated calls see the same data.
pub fn bench(model: BenchModel, source: &FeatureSource, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.runs == 0 {
        return Err(Error::config("bench needs at least one run"));
    }
    let mcfg = match model {
        BenchModel::Float(ck) => ck.config(),
        BenchModel::Quantized(q) => q.params.config(),
    };
    let (l, f) = source.input_shape(cfg.window_samples);
    if l != mcfg.seq_len || f != mcfg.input_dim || source.input_mode() != mcfg.input_mode {
        return Err(Error::Shape {
            dim: "seq_len",
            expected: mcfg.seq_len,
            actual: l,
        });
    }
    let mut r = rng::stream(cfg.seed, &[TAG_BENCH]);
    let samples = (0..cfg.window_samples).map(|_| r.random_range(-0.5f32..0.5)).collect();
    let clip = AudioClip::new(samples, source.sample_rate());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::config(format!("cannot build bench thread pool: {e}")))?;
    let times = pool.install(|| measure(model, source, &clip, cfg))?;
    let totals: Vec<f64> = times.iter().map(|(a, b)| a + b).collect();
    let n = times.len() as f64;
    let (params, size_bytes, quantized) = match model {
        BenchModel::Float(ck) => {
            let mut ck = ck.clone();
            ck.opt = None;
            (count_params(ck.config()), encode_checkpoint(&ck).len(), false)
        }
        BenchModel::Quantized(q) => (count_params(q.params.config()), encode_quantized(q).len(), true),
    };
    Ok(BenchReport {
        quantized,
        runs: times.len(),
        warmup: cfg.warmup,
        params,
        size_bytes,
        mean_ms: totals.iter().sum::<f64>() / n,
        min_ms: totals.iter().copied().fold(f64::INFINITY, f64::min),
        max_ms: totals.iter().copied().fold(0.0, f64::max),
        feature_mean_ms: times.iter().map(|t| t.0).sum::<f64>() / n,
        model_mean_ms: times.iter().map(|t| t.1).sum::<f64>() / n,
    })
}
