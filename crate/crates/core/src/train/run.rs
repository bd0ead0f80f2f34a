use std::io::Write;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::data::{split_indices, Batch, Dataset, Encoded, FeatureSource, ValSplit};
use super::optim::{adam_step, cross_entropy, lr_at, OptState};
use crate::audio_io::{center_slice, random_slice, DatasetManifest};
use crate::augment::{apply_pipeline, AugmentSpec};
use crate::model::{
    backward, forward, forward_train, init_model, load_checkpoint, reset_classifier, save_checkpoint,
    update_running_stats, Checkpoint, ModelConfig, ModelParams, TrainMode,
};
use crate::{rng, AudioClip, Error, Result};

const TAG_INIT: u64 = 0x494e_4954;
const TAG_SHUFFLE: u64 = 0x5348_5546;
const TAG_DATA: u64 = 0x4441_5441;
const TAG_DROPOUT: u64 = 0x4452_4f50;

pub const METRICS_HEADER: &str = "epoch,train_loss,val_acc";

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr_peak: f64,
    pub warmup_steps: u64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub augment: Vec<AugmentSpec>,
    pub window_samples: usize,
    pub features: FeatureSource,
    pub val_split: ValSplit,
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_peak: 1e-4,
            warmup_steps: 10_000,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            augment: Vec::new(),
            window_samples: 5 * crate::SAMPLE_RATE as usize,
            features: FeatureSource::default(),
            val_split: ValSplit::Auto,
            eval_batch_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.window_samples == 0 {
            return Err(Error::config("window_samples must be positive"));
        }
        if !(self.lr_peak >= 0.0 && self.lr_peak.is_finite()) {
            return Err(Error::config(format!("learning rate {} is invalid", self.lr_peak)));
        }
        Ok(())
    }

    /// Fills `seq_len`, `input_dim` and `input_mode` of `base` from the
    /// feature source and window.
    pub fn shape_model(&self, base: &ModelConfig) -> ModelConfig {
        let (l, f) = self.features.input_shape(self.window_samples);
        let mode = self.features.input_mode();
        ModelConfig {
            input_mode: mode,
            input_dim: f,
            seq_len: l,
            use_positional: base.use_positional && mode == crate::model::InputMode::Tokens,
            ..base.clone()
        }
    }

    fn check_model(&self, cfg: &ModelConfig) -> Result<()> {
        let (l, f) = self.features.input_shape(self.window_samples);
        if cfg.input_mode != self.features.input_mode() {
            return Err(Error::config(format!(
                "model input mode {} does not match the feature source",
                cfg.input_mode.name()
            )));
        }
        if cfg.seq_len != l {
            return Err(Error::Shape {
                dim: "seq_len",
                expected: l,
                actual: cfg.seq_len,
            });
        }
        if cfg.input_dim != f {
            return Err(Error::Shape {
                dim: "input_dim",
                expected: f,
                actual: cfg.input_dim,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the highest validation accuracy.
    pub best: Checkpoint,
    /// State after the final epoch, including optimizer moments.
    pub last: Checkpoint,
    pub metrics: Vec<EpochMetrics>,
}

impl TrainOutcome {
    pub fn best_val_acc(&self) -> f64 {
        self.metrics.iter().map(|m| m.val_acc).fold(0.0, f64::max)
    }
}

pub fn format_metrics_row(m: &EpochMetrics) -> String {
    format!("{},{},{}", m.epoch, m.train_loss, m.val_acc)
}

pub fn write_metrics_csv(path: impl AsRef<Path>, metrics: &[EpochMetrics]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{METRICS_HEADER}")?;
    for m in metrics {
        writeln!(f, "{}", format_metrics_row(m))?;
    }
    f.flush()?;
    Ok(())
}

/// Freshly initialised checkpoint for `model_cfg`, seeded from `cfg.seed`.
pub fn initial_checkpoint(model_cfg: &ModelConfig, class_names: Vec<String>, cfg: &TrainConfig) -> Result<Checkpoint> {
    cfg.check_model(model_cfg)?;
    if model_cfg.classes != class_names.len() {
        return Err(Error::Shape {
            dim: "classes",
            expected: class_names.len(),
            actual: model_cfg.classes,
        });
    }
    let params = init_model::<f32>(model_cfg, &mut rng::stream(cfg.seed, &[TAG_INIT]))?;
    Ok(Checkpoint::new(params, class_names))
}

fn encode_clip(source: &FeatureSource, clip: &AudioClip) -> Result<Encoded> {
    source.encode(clip)
}

/// Training example `i` for `epoch`: random slice, augmentation, features.
fn training_example(data: &Dataset, cfg: &TrainConfig, epoch: u64, i: usize) -> Result<(Encoded, usize)> {
    let mut r = rng::stream(cfg.seed, &[TAG_DATA, epoch, i as u64]);
    let slice = random_slice(&data.clips[i], cfg.window_samples, &mut r);
    let slice = if cfg.augment.is_empty() {
        slice
    } else {
        let samples = apply_pipeline(&slice.samples, &cfg.augment, &mut r);
        slice.with_samples(samples)
    };
    Ok((encode_clip(&cfg.features, &slice)?, data.label(i)))
}

fn prepare_batch(data: &Dataset, cfg: &TrainConfig, epoch: u64, idx: &[usize]) -> Result<Batch> {
    let items = idx
        .par_iter()
        .map(|&i| training_example(data, cfg, epoch, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Batch::stack(items))
}

/// One optimizer step; returns the batch loss.
pub fn train_step(
    params: &mut ModelParams<f32>,
    opt: &mut OptState,
    batch: &Batch,
    lr: f64,
    dropout_seed: u64,
) -> Result<f64> {
    let (logits, trace) = forward_train(params, &batch.input(), TrainMode::new(dropout_seed))?;
    let (loss, dlogits) = cross_entropy(&logits, &batch.labels, params.config.classes)?;
    let grads = backward(params, &trace, &dlogits);
    adam_step(params, &grads, opt, lr);
    update_running_stats(params, &trace);
    Ok(loss)
}

/// Eval-mode logits of `clips` (center window), `eval_batch` at a time.
pub fn predict_logits(
    params: &ModelParams<f32>,
    clips: &[&AudioClip],
    source: &FeatureSource,
    window: usize,
    eval_batch: usize,
) -> Result<Vec<Vec<f32>>> {
    let c = params.config.classes;
    let mut out = Vec::with_capacity(clips.len());
    for chunk in clips.chunks(eval_batch.max(1)) {
        let items = chunk
            .par_iter()
            .map(|clip| Ok((encode_clip(source, &center_slice(clip, window))?, 0)))
            .collect::<Result<Vec<_>>>()?;
        let batch = Batch::stack(items);
        let logits = forward(params, &batch.input())?;
        out.extend(logits.chunks(c).map(|r| r.to_vec()));
    }
    Ok(out)
}

pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Top-1 accuracy over `indices` of `data`, using centered windows.
pub fn evaluate(
    params: &ModelParams<f32>,
    data: &Dataset,
    indices: &[usize],
    source: &FeatureSource,
    window: usize,
    eval_batch: usize,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::data("cannot evaluate an empty split"));
    }
    let clips: Vec<&AudioClip> = indices.iter().map(|&i| &data.clips[i]).collect();
    let logits = predict_logits(params, &clips, source, window, eval_batch)?;
    let correct = logits
        .iter()
        .zip(indices)
        .filter(|(row, &i)| argmax(row) == data.label(i))
        .count();
    Ok(correct as f64 / indices.len() as f64)
}

/// Runs epochs `start.epoch .. cfg.epochs` from `start`. When `out_dir` is
/// given, `metrics.csv`, `best.tsck` and `last.tsck` are written there after
/// every epoch.
pub fn fit(data: &Dataset, start: Checkpoint, cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    cfg.check_model(start.config())?;
    if data.is_empty() {
        return Err(Error::data("dataset is empty"));
    }
    let (train_idx, val_idx) = split_indices(data, cfg.val_split, cfg.seed)?;
    info!(
        "training on {} clips, validating on {} ({} classes)",
        train_idx.len(),
        val_idx.len(),
        data.class_names.len()
    );

    let mut params = start.params.clone();
    let mut opt = match start.opt.clone() {
        Some(o) if o.matches(&params) => o,
        Some(_) => return Err(Error::Checkpoint("optimizer state does not match the model".into())),
        None => OptState::new(&params),
    };
    let mut step = start.step;
    let mut metadata = start.metadata.clone();
    let mut metrics: Vec<EpochMetrics> = Vec::new();
    let mut best: Option<(f64, Checkpoint)> = None;

    if start.epoch > 0 {
        if let Some(dir) = out_dir {
            let prior = dir.join("metrics.csv");
            if prior.exists() {
                metrics = read_metrics_csv(&prior)?
                    .into_iter()
                    .filter(|m| (m.epoch as u64) <= start.epoch)
                    .collect();
            }
            let best_path = dir.join("best.tsck");
            if best_path.exists() {
                let acc = metrics.iter().map(|m| m.val_acc).fold(0.0, f64::max);
                best = Some((acc, load_checkpoint(best_path)?));
            }
        }
    }

    let snapshot = |params: &ModelParams<f32>, opt: Option<OptState>, step: u64, epoch: u64, meta| Checkpoint {
        params: params.clone(),
        opt,
        step,
        epoch,
        class_names: data.class_names.clone(),
        metadata: meta,
    };

    for epoch in start.epoch..cfg.epochs as u64 {
        let mut order = train_idx.clone();
        order.shuffle(&mut rng::stream(cfg.seed, &[TAG_SHUFFLE, epoch]));
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();

        let mut loss_sum = 0.0;
        let mut next = Some(prepare_batch(data, cfg, epoch, batches[0])?);
        for k in 0..batches.len() {
            let batch = next.take().expect("prefetched batch");
            let lr = lr_at(step + 1, cfg.lr_peak, cfg.warmup_steps);
            let dropout_seed = rng::derive_seed(cfg.seed, &[TAG_DROPOUT, step]);
            let (loss, prefetched) = rayon::join(
                || train_step(&mut params, &mut opt, &batch, lr, dropout_seed),
                || batches.get(k + 1).map(|idx| prepare_batch(data, cfg, epoch, idx)),
            );
            loss_sum += loss? * batch.labels.len() as f64;
            next = prefetched.transpose()?;
            step += 1;
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let val_acc = evaluate(&params, data, &val_idx, &cfg.features, cfg.window_samples, cfg.eval_batch_size)?;
        let m = EpochMetrics {
            epoch: epoch as usize + 1,
            train_loss,
            val_acc,
        };
        info!(
            "epoch {}/{} train_loss {:.4} val_acc {:.4} lr {:.2e}",
            m.epoch,
            cfg.epochs,
            train_loss,
            val_acc,
            lr_at(step, cfg.lr_peak, cfg.warmup_steps)
        );
        metrics.push(m);
        metadata.insert("best_val_acc".into(), format!("{:.6}", best.as_ref().map_or(val_acc, |b| b.0.max(val_acc))));

        let improved = best.as_ref().is_none_or(|(acc, _)| val_acc > *acc);
        if improved {
            best = Some((val_acc, snapshot(&params, None, step, epoch + 1, metadata.clone())));
        }
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
            write_metrics_csv(dir.join("metrics.csv"), &metrics)?;
            if improved {
                save_checkpoint(&best.as_ref().unwrap().1, dir.join("best.tsck"))?;
            }
            save_checkpoint(
                &snapshot(&params, Some(opt.clone()), step, epoch + 1, metadata.clone()),
                dir.join("last.tsck"),
            )?;
        }
    }

    let last = snapshot(&params, Some(opt), step, cfg.epochs.max(start.epoch as usize) as u64, metadata);
    let best = best.map(|(_, ck)| ck).unwrap_or_else(|| last.clone());
    Ok(TrainOutcome { best, last, metrics })
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<EpochMetrics>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let bad = || Error::data(format!("metrics line {}: `{line}`", n + 1));
        let mut parts = line.split(',');
        let mut next = || parts.next().ok_or_else(bad);
        let epoch = next()?.parse().map_err(|_| bad())?;
        let train_loss = next()?.parse().map_err(|_| bad())?;
        let val_acc = next()?.parse().map_err(|_| bad())?;
        out.push(EpochMetrics {
            epoch,
            train_loss,
            val_acc,
        });
    }
    Ok(out)
}

/// Loads the manifest, initialises a model and trains it.
pub fn train_loop(manifest: &DatasetManifest, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_loop_to(manifest, model_cfg, cfg, None)
}

pub fn train_loop_to(
    manifest: &DatasetManifest,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    if manifest.is_empty() {
        return Err(Error::data("manifest has no entries"));
    }
    let data = Dataset::load(manifest, cfg.features.sample_rate())?;
    let start = initial_checkpoint(model_cfg, data.class_names.clone(), cfg)?;
    fit(&data, start, cfg, out_dir)
}

/// Continues training `base` on new data. The classifier is re-initialised
/// for the new class count; no layer is frozen and the optimizer restarts.
pub fn finetune(base: &Checkpoint, data: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    let old = base.config();
    let checks = [
        ("hidden", old.hidden, model_cfg.hidden),
        ("layers", old.layers, model_cfg.layers),
        ("heads", old.heads, model_cfg.heads),
        ("seq_len", old.seq_len, model_cfg.seq_len),
        ("input_dim", old.input_dim, model_cfg.input_dim),
    ];
    for (dim, expected, actual) in checks {
        if expected != actual {
            return Err(Error::Shape { dim, expected, actual });
        }
    }
    if old.input_mode != model_cfg.input_mode || old.share_layers != model_cfg.share_layers {
        return Err(Error::config("finetune config differs from the base model's architecture"));
    }
    let mut params = base.params.clone();
    params.config.dropout = model_cfg.dropout;
    reset_classifier(&mut params, data.class_names.len(), &mut rng::stream(cfg.seed, &[TAG_INIT, 1]))?;
    let mut start = Checkpoint::new(params, data.class_names.clone());
    start.metadata = base.metadata.clone();
    fit(data, start, cfg, out_dir)
}
