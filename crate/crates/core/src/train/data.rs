use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::audio_io::{read_wav, resample, DatasetManifest};
use crate::dsp::FeaturePipeline;
use crate::model::{Input, InputMode};
use crate::tokenizer::{tokenize, CurveVocab};
use crate::{rng, AudioClip, Error, Result};

/// Clips decoded at the training sample rate, with labels and folds.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub clips: Vec<AudioClip>,
    pub class_names: Vec<String>,
    /// -1 where the source carries no fold.
    pub folds: Vec<i32>,
}

impl Dataset {
    /// Decodes every manifest entry (in parallel), resampling to `sample_rate`.
    pub fn load(manifest: &DatasetManifest, sample_rate: u32) -> Result<Self> {
        let clips = manifest
            .entries
            .par_iter()
            .map(|e| {
                let clip = read_wav(&e.path)?;
                let clip = if clip.sample_rate != sample_rate {
                    resample(&clip, sample_rate)?
                } else {
                    clip
                };
                Ok(clip
                    .with_label(e.class_index)
                    .with_source(e.path.to_string_lossy()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            clips,
            class_names: manifest.class_names.clone(),
            folds: manifest.entries.iter().map(|e| e.fold).collect(),
        })
    }

    /// Wraps labelled in-memory clips (no folds).
    pub fn from_clips(clips: Vec<AudioClip>, class_names: Vec<String>) -> Result<Self> {
        for (i, c) in clips.iter().enumerate() {
            match c.label {
                Some(l) if l < class_names.len() => {}
                _ => return Err(Error::data(format!("clip {i} has no valid label"))),
            }
        }
        let folds = vec![-1; clips.len()];
        Ok(Dataset {
            clips,
            class_names,
            folds,
        })
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn label(&self, i: usize) -> usize {
        self.clips[i].label.expect("dataset clips are labelled")
    }

    pub fn has_folds(&self) -> bool {
        self.folds.iter().any(|&f| f >= 0)
    }
}

/// How validation entries are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValSplit {
    /// Fold 5 when folds exist, otherwise a stratified 20% split.
    Auto,
    Fold(i32),
    /// Seeded per-class fraction held out.
    Stratified(f64),
}

impl std::str::FromStr for ValSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("bad val_split `{s}` (auto, fold:N or fraction:F)"));
        if s == "auto" {
            return Ok(ValSplit::Auto);
        }
        let (k, v) = s.split_once(':').ok_or_else(bad)?;
        match k {
            "fold" => v.parse().map(ValSplit::Fold).map_err(|_| bad()),
            "fraction" => match v.parse::<f64>() {
                Ok(f) if f > 0.0 && f < 1.0 => Ok(ValSplit::Stratified(f)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for ValSplit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValSplit::Auto => write!(f, "auto"),
            ValSplit::Fold(k) => write!(f, "fold:{k}"),
            ValSplit::Stratified(x) => write!(f, "fraction:{x}"),
        }
    }
}

pub(crate) const TAG_SPLIT: u64 = 0x5350_4c49;

/// Disjoint, sorted (train, val) index sets.
pub fn split_indices(data: &Dataset, split: ValSplit, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let split = match split {
        ValSplit::Auto if data.has_folds() => ValSplit::Fold(5),
        ValSplit::Auto => ValSplit::Stratified(0.2),
        s => s,
    };
    let mut is_val = vec![false; data.len()];
    match split {
        ValSplit::Fold(k) => {
            for (i, &f) in data.folds.iter().enumerate() {
                is_val[i] = f == k;
            }
        }
        ValSplit::Stratified(frac) => {
            for class in 0..data.class_names.len() {
                let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.label(i) == class).collect();
                members.shuffle(&mut rng::stream(seed, &[TAG_SPLIT, class as u64]));
                let n_val = (frac * members.len() as f64).round() as usize;
                for &i in &members[..n_val] {
                    is_val[i] = true;
                }
            }
        }
        ValSplit::Auto => unreachable!(),
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| is_val[i]);
    if train.is_empty() {
        return Err(Error::data(format!("split {split} leaves no training entries")));
    }
    if val.is_empty() {
        return Err(Error::data(format!("split {split} leaves no validation entries")));
    }
    Ok((train, val))
}

/// Turns a waveform window into model input.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    Spectral(FeaturePipeline),
    Curves(Arc<CurveVocab>),
}

impl Default for FeatureSource {
    fn default() -> Self {
        FeatureSource::Spectral(FeaturePipeline::default())
    }
}

impl FeatureSource {
    pub fn input_mode(&self) -> InputMode {
        match self {
            FeatureSource::Spectral(_) => InputMode::Continuous,
            FeatureSource::Curves(_) => InputMode::Tokens,
        }
    }

    pub fn sample_rate(&self) -> u32 {
        match self {
            FeatureSource::Spectral(p) => p.spectrogram.sample_rate,
            FeatureSource::Curves(_) => crate::SAMPLE_RATE,
        }
    }

    /// `(seq_len, input_dim)` implied for a window of `n` samples.
    pub fn input_shape(&self, n: usize) -> (usize, usize) {
        match self {
            FeatureSource::Spectral(p) => p.output_shape(n),
            FeatureSource::Curves(v) => (v.sequence_len(n), v.vocab_size()),
        }
    }

    pub fn encode(&self, clip: &AudioClip) -> Result<Encoded> {
        Ok(match self {
            FeatureSource::Spectral(p) => Encoded::Features(p.extract(clip)?.data),
            FeatureSource::Curves(v) => Encoded::Tokens(tokenize(&clip.samples, v)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    Features(Vec<f32>),
    Tokens(Vec<u32>),
}

/// A stacked batch ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub data: Encoded,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn stack(items: Vec<(Encoded, usize)>) -> Self {
        let mut labels = Vec::with_capacity(items.len());
        let mut data: Option<Encoded> = None;
        for (enc, label) in items {
            labels.push(label);
            match (&mut data, enc) {
                (None, e) => data = Some(e),
                (Some(Encoded::Features(acc)), Encoded::Features(v)) => acc.extend(v),
                (Some(Encoded::Tokens(acc)), Encoded::Tokens(v)) => acc.extend(v),
                _ => unreachable!("one feature source per batch"),
            }
        }
        Batch {
            data: data.unwrap_or(Encoded::Features(Vec::new())),
            labels,
        }
    }

    pub fn input(&self) -> Input<'_, f32> {
        match &self.data {
            Encoded::Features(v) => Input::Features(v),
            Encoded::Tokens(v) => Input::Tokens(v),
        }
    }
}
