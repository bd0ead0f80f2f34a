//! Flat `key = value` configuration shared by every command.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected so a
//! typo never silently falls back to a default. Keys prefixed with `sweep.`
//! hold comma-separated value lists for the grid search.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `dataset` | | dataset root (or CSV file) |
//! | `layout` | `folder` | `folder` or `csv` |
//! | `features` | `mel` | `mel`, `mfcc`, `amplitude_reshape` or `curves` |
//! | `sample_rate` | 44100 | |
//! | `n_fft`, `win_length`, `hop_length` | 1024, 1024, 512 | |
//! | `n_mels`, `n_mfcc` | 128, 128 | |
//! | `downsample` | 1 | keep every Nth frame |
//! | `normalize` | false | min-max scale features |
//! | `reshape_rows` | 256 | rows of the amplitude reshape |
//! | `vocab` | | curve vocabulary file (`features = curves`) |
//! | `curve_len`, `resolution`, `top_k`, `curve_mode` | 8, 64, 50000, `absolute` | vocabulary building |
//! | `hidden`, `layers`, `heads` | 16, 1, 2 | |
//! | `classes` | 50 | overridden by the dataset's class count when training |
//! | `dropout` | 0.1 | |
//! | `share_layers`, `use_positional` | false, false | |
//! | `lr`, `warmup_steps` | 1e-4, 10000 | |
//! | `batch_size`, `eval_batch_size`, `epochs` | 32, 64, 100 | |
//! | `seed` | 0 | |
//! | `window_samples` | 220500 | |
//! | `val_split` | `auto` | `auto`, `fold:N`, `fraction:F` |
//! | `augment` | `none` | `all`, `none` or a comma list of kinds |
//! | `augment_prob` | 0.3 | per-augmentation probability |
//! | `checkpoint`, `base`, `resume` | | model files for eval/predict, finetune, resume |
//! | `runs`, `warmup_runs` | 10, 3 | benchmark repetitions |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::augment::{AugmentKind, AugmentSpec};
use crate::dsp::{FeatureKind, FeaturePipeline, SpectrogramConfig};
use crate::model::{InputMode, ModelConfig};
use crate::tokenizer::{load_vocab, CurveMode, CurveSpec};
use crate::train::{FeatureSource, TrainConfig, ValSplit};
use crate::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "layout",
    "features",
    "sample_rate",
    "n_fft",
    "win_length",
    "hop_length",
    "n_mels",
    "n_mfcc",
    "downsample",
    "normalize",
    "reshape_rows",
    "vocab",
    "curve_len",
    "resolution",
    "top_k",
    "curve_mode",
    "hidden",
    "layers",
    "heads",
    "classes",
    "dropout",
    "share_layers",
    "use_positional",
    "lr",
    "warmup_steps",
    "batch_size",
    "eval_batch_size",
    "epochs",
    "seed",
    "window_samples",
    "val_split",
    "augment",
    "augment_prob",
    "checkpoint",
    "base",
    "resume",
    "runs",
    "warmup_runs",
];

/// Keys describing how audio becomes model input; stored in checkpoints.
pub const FEATURE_KEYS: &[&str] = &[
    "features",
    "sample_rate",
    "n_fft",
    "win_length",
    "hop_length",
    "n_mels",
    "n_mfcc",
    "downsample",
    "normalize",
    "reshape_rows",
    "vocab",
    "window_samples",
];

/// Grid dimensions accepted under the `sweep.` prefix.
pub const SWEEP_KEYS: &[&str] = &["n_mels", "hop_length", "layers", "heads", "window_samples", "augment"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Grid values per `sweep.` dimension, in file order.
    pub sweep: Vec<(String, Vec<String>)>,
    /// Directory relative paths resolve against.
    pub base_dir: Option<PathBuf>,
}

fn check_key(key: &str) -> Result<()> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::config(format!("unknown config key `{key}`")))
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let at = |e: Error| Error::config(format!("line {}: {e}", n + 1));
            if let Some(dim) = k.strip_prefix("sweep.") {
                if !SWEEP_KEYS.contains(&dim) {
                    return Err(at(Error::config(format!("`{dim}` is not a sweep dimension"))));
                }
                let list: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                cfg.sweep.push((dim.to_string(), list));
                continue;
            }
            check_key(k).map_err(at)?;
            if cfg.values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(at(Error::config(format!("duplicate key `{k}`"))));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingPath(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a String, &'a String)>) -> Self {
        Config {
            values: pairs
                .into_iter()
                .filter(|(k, _)| KNOWN_KEYS.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            ..Config::default()
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Values of `other` override this config's.
    pub fn merged(&self, other: &Config) -> Config {
        let mut out = self.clone();
        for (k, v) in &other.values {
            out.values.insert(k.clone(), v.clone());
        }
        out
    }

    pub fn value<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::config(format!("invalid value `{s}` for `{key}`"))),
        }
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(s) => Err(Error::config(format!("invalid boolean `{s}` for `{key}`"))),
        }
    }

    /// Path-valued key resolved against the config file's directory.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|p| {
            let p = PathBuf::from(p);
            match &self.base_dir {
                Some(base) if p.is_relative() => base.join(p),
                _ => p,
            }
        })
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| Error::config(format!("config key `{key}` is required for this command")))
    }

    pub fn pipeline(&self) -> Result<FeaturePipeline> {
        let kind = match self.get("features").unwrap_or("mel") {
            "curves" => FeatureKind::Mel,
            other => other.parse()?,
        };
        let d = FeaturePipeline::default();
        let s = SpectrogramConfig::default();
        let spectrogram = SpectrogramConfig {
            n_fft: self.value("n_fft", s.n_fft)?,
            hop_length: self.value("hop_length", s.hop_length)?,
            win_length: self.value("win_length", s.win_length)?,
            n_mels: self.value("n_mels", s.n_mels)?,
            sample_rate: self.value("sample_rate", s.sample_rate)?,
            log_scale: true,
        };
        spectrogram.validate()?;
        Ok(FeaturePipeline {
            kind,
            spectrogram,
            n_coeffs: self.value("n_mfcc", d.n_coeffs)?,
            downsample: self.value("downsample", d.downsample)?,
            normalize: self.flag("normalize", d.normalize)?,
            reshape_rows: self.value("reshape_rows", d.reshape_rows)?,
        })
    }

    pub fn feature_source(&self) -> Result<FeatureSource> {
        if self.get("features") == Some("curves") {
            let path = self.require_path("vocab")?;
            Ok(FeatureSource::Curves(Arc::new(load_vocab(path)?)))
        } else {
            Ok(FeatureSource::Spectral(self.pipeline()?))
        }
    }

    pub fn curve_spec(&self) -> Result<CurveSpec> {
        let d = CurveSpec::default();
        let spec = CurveSpec {
            curve_len: self.value("curve_len", d.curve_len)?,
            resolution: self.value("resolution", d.resolution)?,
            top_k: self.value("top_k", d.top_k)?,
            mode: self.value::<CurveMode>("curve_mode", d.mode)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn augment_specs(&self, seed: u64) -> Result<Vec<AugmentSpec>> {
        let p = self.value("augment_prob", AugmentSpec::DEFAULT_PROBABILITY)?;
        let kinds: Vec<AugmentKind> = match self.get("augment").unwrap_or("none") {
            "none" | "off" | "" => Vec::new(),
            "all" | "on" => AugmentKind::ALL.to_vec(),
            list => list
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<_>>()?,
        };
        kinds
            .into_iter()
            .enumerate()
            .map(|(i, k)| Ok(AugmentSpec::new(k, p)?.with_seed(crate::rng::derive_seed(seed, &[i as u64]))))
            .collect()
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let seed = self.value("seed", d.seed)?;
        let cfg = TrainConfig {
            lr_peak: self.value("lr", d.lr_peak)?,
            warmup_steps: self.value("warmup_steps", d.warmup_steps)?,
            batch_size: self.value("batch_size", d.batch_size)?,
            epochs: self.value("epochs", d.epochs)?,
            seed,
            augment: self.augment_specs(seed)?,
            window_samples: self.value("window_samples", d.window_samples)?,
            features: self.feature_source()?,
            val_split: self.value::<ValSplit>("val_split", d.val_split)?,
            eval_batch_size: self.value("eval_batch_size", d.eval_batch_size)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Architecture keys, with input shape derived from the feature source.
    pub fn model_config(&self, train: &TrainConfig) -> Result<ModelConfig> {
        let d = ModelConfig::default();
        let tokens = train.features.input_mode() == InputMode::Tokens;
        let base = ModelConfig {
            hidden: self.value("hidden", d.hidden)?,
            layers: self.value("layers", d.layers)?,
            heads: self.value("heads", d.heads)?,
            classes: self.value("classes", 50)?,
            dropout: self.value("dropout", d.dropout)?,
            share_layers: self.flag("share_layers", d.share_layers)?,
            use_positional: self.flag("use_positional", tokens)?,
            ..d
        };
        let cfg = train.shape_model(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// The subset of settings a checkpoint needs to rebuild its inputs.
    pub fn feature_metadata(&self) -> BTreeMap<String, String> {
        FEATURE_KEYS
            .iter()
            .filter_map(|&k| {
                let v = if k == "vocab" {
                    self.path(k).map(|p| p.to_string_lossy().into_owned())
                } else {
                    self.get(k).map(str::to_string)
                };
                v.map(|v| (k.to_string(), v))
            })
            .collect()
    }

    /// Cartesian expansion of the `sweep.` grid applied over this config.
    pub fn sweep_points(&self) -> Result<Vec<Config>> {
        if self.sweep.is_empty() || self.sweep.iter().any(|(_, v)| v.is_empty()) {
            return Err(Error::config("sweep grid is empty"));
        }
        let mut points = vec![self.clone()];
        for (key, values) in &self.sweep {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for p in &points {
                for v in values {
                    let mut q = p.clone();
                    q.values.insert(key.clone(), v.clone());
                    next.push(q);
                }
            }
            points = next;
        }
        for p in &mut points {
            p.sweep.clear();
        }
        Ok(points)
    }

    /// `key=value` pairs of the swept dimensions, for result tables.
    pub fn describe(&self, keys: &[String]) -> String {
        keys.iter()
            .map(|k| format!("{k}={}", self.get(k).unwrap_or("")))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        for (k, vs) in &self.sweep {
            s.push_str(&format!("sweep.{k} = {}\n", vs.join(", ")));
        }
        s
    }
}
