//! Curve tokenization.
//!
//! A waveform is quantized to `R` levels and cut into windows of `L`
//! samples; each window (a "curve") is looked up in a ranked vocabulary of
//! the most frequent curves in a corpus. In relative mode every window is
//! first shifted so its minimum level is zero, which merges curves that only
//! differ by a DC offset.

mod vocab_file;

pub use vocab_file::{load_vocab, read_vocab, save_vocab, write_vocab};

use std::collections::HashMap;

use rayon::prelude::*;

use crate::{AudioClip, Error, Result};

pub const UNK: u32 = 0;
pub const PAD: u32 = 1;
pub const CLS: u32 = 2;
/// First id assigned to a curve.
pub const FIRST_CURVE_ID: u32 = 3;

/// ESC-50 reference figures at L = 8, R = 64, top 50,000: distinct stride-1
/// curves and occurrence coverage of the absolute / relative vocabularies.
/// Reproducible only with the dataset present.
pub const ESC50_DISTINCT_CURVES: f64 = 3.87e7;
pub const ESC50_ABSOLUTE_COVERAGE: f64 = 0.7649;
pub const ESC50_RELATIVE_COVERAGE: f64 = 0.8544;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMode {
    Absolute,
    Relative,
}

impl CurveMode {
    fn code(self) -> u8 {
        match self {
            CurveMode::Absolute => 0,
            CurveMode::Relative => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(CurveMode::Absolute),
            1 => Ok(CurveMode::Relative),
            _ => Err(Error::data(format!("unknown curve mode code {c}"))),
        }
    }
}

impl std::str::FromStr for CurveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(CurveMode::Absolute),
            "relative" => Ok(CurveMode::Relative),
            other => Err(Error::config(format!("unknown curve mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurveSpec {
    pub curve_len: usize,
    pub resolution: u32,
    pub top_k: usize,
    pub mode: CurveMode,
}

impl Default for CurveSpec {
    fn default() -> Self {
        CurveSpec {
            curve_len: 8,
            resolution: 64,
            top_k: 50_000,
            mode: CurveMode::Absolute,
        }
    }
}

impl CurveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.curve_len == 0 {
            return Err(Error::config("curve length must be at least 1"));
        }
        // levels are stored as single bytes
        if !(2..=256).contains(&self.resolution) {
            return Err(Error::config(format!(
                "resolution {} must be in 2..=256",
                self.resolution
            )));
        }
        if self.top_k == 0 {
            return Err(Error::config("top_k must be at least 1"));
        }
        Ok(())
    }
}

/// `min(floor((x + 1) / 2 * R), R - 1)` after clamping `x` to [-1, 1].
pub fn quantize_signal(samples: &[f32], resolution: u32) -> Vec<u16> {
    let r = resolution as f64;
    samples
        .iter()
        .map(|&x| {
            let x = (x as f64).clamp(-1.0, 1.0);
            (((x + 1.0) / 2.0 * r).floor() as u32).min(resolution - 1) as u16
        })
        .collect()
}

/// Subtracts the span minimum from every element.
pub fn relative_shift(span: &[u16]) -> Vec<u16> {
    let min = span.iter().copied().min().unwrap_or(0);
    span.iter().map(|&v| v - min).collect()
}

fn curve_key(window: &[u16], mode: CurveMode) -> Box<[u8]> {
    let min = match mode {
        CurveMode::Absolute => 0,
        CurveMode::Relative => window.iter().copied().min().unwrap_or(0),
    };
    window.iter().map(|&v| (v - min) as u8).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveVocab {
    pub spec: CurveSpec,
    /// Curves in rank order; curve `i` has id `FIRST_CURVE_ID + i`.
    pub curves: Vec<Box<[u8]>>,
    ids: HashMap<Box<[u8]>, u32>,
}

impl CurveVocab {
    pub fn from_ranked(spec: CurveSpec, curves: Vec<Box<[u8]>>) -> Result<Self> {
        spec.validate()?;
        if curves.len() > spec.top_k {
            return Err(Error::data(format!(
                "{} curves exceed top_k {}",
                curves.len(),
                spec.top_k
            )));
        }
        let mut ids = HashMap::with_capacity(curves.len());
        for (i, c) in curves.iter().enumerate() {
            if c.len() != spec.curve_len {
                return Err(Error::data(format!("curve {i} has length {}", c.len())));
            }
            if c.iter().any(|&v| v as u32 >= spec.resolution) {
                return Err(Error::data(format!("curve {i} has a level >= {}", spec.resolution)));
            }
            if ids.insert(c.clone(), FIRST_CURVE_ID + i as u32).is_some() {
                return Err(Error::data(format!("curve {i} is duplicated")));
            }
        }
        Ok(CurveVocab { spec, curves, ids })
    }

    /// Number of ids including the special tokens.
    pub fn vocab_size(&self) -> usize {
        self.curves.len() + FIRST_CURVE_ID as usize
    }

    pub fn id_of(&self, curve: &[u8]) -> Option<u32> {
        self.ids.get(curve).copied()
    }

    pub fn curve_of(&self, id: u32) -> Option<&[u8]> {
        id.checked_sub(FIRST_CURVE_ID)
            .and_then(|i| self.curves.get(i as usize))
            .map(|c| &c[..])
    }

    /// Sequence length produced by [`tokenize`] for `n` samples.
    pub fn sequence_len(&self, n_samples: usize) -> usize {
        1 + n_samples / self.spec.curve_len
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageStats {
    /// Fraction of stride-1 windows whose curve is in the vocabulary.
    pub vocab_coverage: f64,
    /// Fraction of tokens emitted by [`tokenize`] (stride L, CLS excluded)
    /// that are not UNK.
    pub token_coverage: f64,
    /// Number of distinct stride-1 curves.
    pub distinct_curves: usize,
    /// Fraction of the distinct curves present in the vocabulary.
    pub distinct_coverage: f64,
}

/// Stride-1 curve counts of one clip.
fn count_clip(samples: &[f32], spec: &CurveSpec) -> HashMap<Box<[u8]>, u64> {
    let levels = quantize_signal(samples, spec.resolution);
    let mut counts = HashMap::new();
    for w in levels.windows(spec.curve_len) {
        *counts.entry(curve_key(w, spec.mode)).or_insert(0) += 1;
    }
    counts
}

fn count_corpus(corpus: &[AudioClip], spec: &CurveSpec) -> HashMap<Box<[u8]>, u64> {
    corpus
        .par_iter()
        .map(|clip| count_clip(&clip.samples, spec))
        .reduce(HashMap::new, |a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
            for (k, v) in small {
                *big.entry(k).or_insert(0) += v;
            }
            big
        })
}

/// Counts every stride-1 curve in `corpus`, keeps the `top_k` most frequent
/// (ties broken by lexicographic curve order) and reports coverage on the
/// same corpus.
pub fn build_curve_vocab(corpus: &[AudioClip], spec: CurveSpec) -> Result<(CurveVocab, CoverageStats)> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::data("cannot build a vocabulary from an empty corpus"));
    }
    let counts = count_corpus(corpus, &spec);
    let mut ranked: Vec<(Box<[u8]>, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(spec.top_k);
    let vocab = CurveVocab::from_ranked(spec, ranked.into_iter().map(|(c, _)| c).collect())?;
    let stats = coverage(&vocab, corpus);
    Ok((vocab, stats))
}

/// Maps quantized levels to token ids: CLS, then one id per non-overlapping
/// window of `L` levels (UNK when absent). A trailing partial window is dropped.
pub fn tokenize_levels(levels: &[u16], vocab: &CurveVocab) -> Vec<u32> {
    let l = vocab.spec.curve_len;
    let mut out = Vec::with_capacity(1 + levels.len() / l);
    out.push(CLS);
    out.extend(
        levels
            .chunks_exact(l)
            .map(|w| vocab.id_of(&curve_key(w, vocab.spec.mode)).unwrap_or(UNK)),
    );
    out
}

pub fn tokenize(samples: &[f32], vocab: &CurveVocab) -> Vec<u32> {
    tokenize_levels(&quantize_signal(samples, vocab.spec.resolution), vocab)
}

/// Coverage of `vocab` on an arbitrary corpus.
pub fn coverage(vocab: &CurveVocab, corpus: &[AudioClip]) -> CoverageStats {
    let counts = count_corpus(corpus, &vocab.spec);
    let total: u64 = counts.values().sum();
    let (covered, distinct_in) = counts
        .iter()
        .filter(|(c, _)| vocab.id_of(c).is_some())
        .fold((0u64, 0usize), |(n, d), (_, &v)| (n + v, d + 1));

    let (known, emitted) = corpus
        .par_iter()
        .map(|clip| {
            let toks = tokenize(&clip.samples, vocab);
            let known = toks[1..].iter().filter(|&&t| t != UNK).count();
            (known, toks.len() - 1)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let frac = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    CoverageStats {
        vocab_coverage: frac(covered as f64, total as f64),
        token_coverage: frac(known as f64, emitted as f64),
        distinct_curves: counts.len(),
        distinct_coverage: frac(distinct_in as f64, counts.len() as f64),
    }
}
