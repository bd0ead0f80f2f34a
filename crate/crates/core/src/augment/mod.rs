//! Randomized waveform augmentations.
//!
//! Every transform keeps the sample count, is deterministic for a given
//! generator state, and maps finite input to finite output. Each kind draws
//! one primary parameter from a default range (overridable per
//! [`AugmentSpec`]); the `*_with` functions take that parameter directly.

mod filter;
mod hpss;
mod vocoder;

pub use filter::{butterworth_lowpass, filter, Section};
pub use hpss::{hpss_masks, hpss_split};
pub use vocoder::{phase_vocoder, pitch_shift_semitones, time_stretch};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentKind {
    AmplitudeClip,
    Amplify,
    Echo,
    Lowpass,
    PitchShift,
    PartialErase,
    SpeedAdjust,
    AddNoise,
    Hpss,
    BitwiseDownsample,
    SamplerateDownsample,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 11] = [
        AugmentKind::AmplitudeClip,
        AugmentKind::Amplify,
        AugmentKind::Echo,
        AugmentKind::Lowpass,
        AugmentKind::PitchShift,
        AugmentKind::PartialErase,
        AugmentKind::SpeedAdjust,
        AugmentKind::AddNoise,
        AugmentKind::Hpss,
        AugmentKind::BitwiseDownsample,
        AugmentKind::SamplerateDownsample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentKind::AmplitudeClip => "amplitude_clip",
            AugmentKind::Amplify => "amplify",
            AugmentKind::Echo => "echo",
            AugmentKind::Lowpass => "lowpass",
            AugmentKind::PitchShift => "pitch_shift",
            AugmentKind::PartialErase => "partial_erase",
            AugmentKind::SpeedAdjust => "speed_adjust",
            AugmentKind::AddNoise => "add_noise",
            AugmentKind::Hpss => "hpss",
            AugmentKind::BitwiseDownsample => "bitwise_downsample",
            AugmentKind::SamplerateDownsample => "samplerate_downsample",
        }
    }

    /// Range of the primary random parameter. Integer kinds are inclusive.
    pub fn default_range(self) -> (f64, f64) {
        match self {
            AugmentKind::AmplitudeClip => (0.75, 1.0),
            AugmentKind::Amplify => (0.5, 1.5),
            // 2% to 40% of one second at 44.1 kHz
            AugmentKind::Echo => (882.0, 17_640.0),
            AugmentKind::Lowpass => (0.05, 0.20),
            AugmentKind::PitchShift => (0.0, 4.0),
            AugmentKind::PartialErase => (0.0, 0.30),
            AugmentKind::SpeedAdjust => (0.5, 1.5),
            AugmentKind::AddNoise => (0.0, 0.05),
            // coin: < 0.5 harmonic, otherwise percussive
            AugmentKind::Hpss => (0.0, 1.0),
            AugmentKind::BitwiseDownsample => (40.0, 100.0),
            AugmentKind::SamplerateDownsample => (2.0, 9.0),
        }
    }

    fn integer_param(self) -> bool {
        matches!(
            self,
            AugmentKind::Echo | AugmentKind::BitwiseDownsample | AugmentKind::SamplerateDownsample
        )
    }

    /// Draws the primary parameter from `range`.
    pub fn draw<R: Rng + ?Sized>(self, range: (f64, f64), rng: &mut R) -> f64 {
        let (lo, hi) = range;
        if lo >= hi {
            return lo;
        }
        if self.integer_param() {
            rng.random_range(lo.round() as i64..=hi.round() as i64) as f64
        } else {
            rng.random_range(lo..hi)
        }
    }

    /// Applies this kind with an already drawn parameter. `rng` feeds any
    /// remaining randomness (noise samples, erase offset).
    pub fn apply_with<R: Rng + ?Sized>(self, x: &[f32], param: f64, rng: &mut R) -> Vec<f32> {
        match self {
            AugmentKind::AmplitudeClip => amplitude_clip_with(x, param),
            AugmentKind::Amplify => amplify_with(x, param),
            AugmentKind::Echo => echo_with(x, param as usize),
            AugmentKind::Lowpass => lowpass_with(x, param),
            AugmentKind::PitchShift => pitch_shift_with(x, param),
            AugmentKind::PartialErase => {
                let len = (param * x.len() as f64).round() as usize;
                let start = rng.random_range(0..=x.len() - len);
                partial_erase_with(x, start, len, rng)
            }
            AugmentKind::SpeedAdjust => speed_adjust_with(x, param),
            AugmentKind::AddNoise => {
                let peak = x.iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
                add_noise_with(x, param * peak, rng)
            }
            AugmentKind::Hpss => hpss_with(x, param < 0.5),
            AugmentKind::BitwiseDownsample => bitwise_downsample_with(x, param),
            AugmentKind::SamplerateDownsample => samplerate_downsample_with(x, param as usize),
        }
    }

    pub fn apply<R: Rng + ?Sized>(self, x: &[f32], rng: &mut R) -> Vec<f32> {
        let p = self.draw(self.default_range(), rng);
        self.apply_with(x, p, rng)
    }
}

impl std::str::FromStr for AugmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AugmentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown augmentation `{s}`")))
    }
}

fn peak(x: &[f32]) -> f32 {
    x.iter().fold(0.0f32, |m, v| m.max(v.abs()))
}

/// Clamps to `+-t` with `t = fraction * max|x|`.
pub fn amplitude_clip_with(x: &[f32], fraction: f64) -> Vec<f32> {
    clip_at(x, (fraction * peak(x) as f64) as f32)
}

/// Clamps every sample to `[-t, t]`.
pub fn clip_at(x: &[f32], t: f32) -> Vec<f32> {
    x.iter().map(|v| v.clamp(-t, t)).collect()
}

pub fn amplify_with(x: &[f32], gain: f64) -> Vec<f32> {
    x.iter().map(|&v| (v as f64 * gain) as f32).collect()
}

/// `x'[i] = x[i] + x[i - d]` for `i >= d`; earlier samples unchanged.
pub fn echo_with(x: &[f32], delay: usize) -> Vec<f32> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| if i >= delay { v + x[i - delay] } else { v })
        .collect()
}

/// 5th-order Butterworth lowpass at `cutoff` (fraction of Nyquist).
pub fn lowpass_with(x: &[f32], cutoff: f64) -> Vec<f32> {
    filter(&butterworth_lowpass(5, cutoff), x)
}

pub fn pitch_shift_with(x: &[f32], semitones: f64) -> Vec<f32> {
    pitch_shift_semitones(x, semitones)
}

/// Replaces `len` samples from `start` with N(0, std(x)^2) noise.
pub fn partial_erase_with<R: Rng + ?Sized>(
    x: &[f32],
    start: usize,
    len: usize,
    rng: &mut R,
) -> Vec<f32> {
    let mut out = x.to_vec();
    if len == 0 || x.is_empty() {
        return out;
    }
    let n = x.len() as f64;
    let mean = x.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = x.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for v in &mut out[start..start + len] {
            *v = normal.sample(rng) as f32;
        }
    } else {
        out[start..start + len].fill(0.0);
    }
    out
}

/// Phase-vocoder stretch by `rate`, trimmed or zero-padded to the input length.
pub fn speed_adjust_with(x: &[f32], rate: f64) -> Vec<f32> {
    crate::audio_io::pad_to(&time_stretch(x, rate), x.len())
}

pub fn add_noise_with<R: Rng + ?Sized>(x: &[f32], sigma: f64, rng: &mut R) -> Vec<f32> {
    if sigma <= 0.0 {
        return x.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    x.iter().map(|&v| (v as f64 + normal.sample(rng)) as f32).collect()
}

pub fn hpss_with(x: &[f32], harmonic: bool) -> Vec<f32> {
    let (h, p) = hpss_split(x);
    if harmonic {
        h
    } else {
        p
    }
}

/// `floor(x * R) / R`. Products within 1e-4 of an integer snap to it so
/// grid points survive float round-off and re-application is idempotent.
pub fn bitwise_downsample_with(x: &[f32], resolution: f64) -> Vec<f32> {
    x.iter()
        .map(|&v| {
            let scaled = v as f64 * resolution;
            let nearest = scaled.round();
            let level = if (scaled - nearest).abs() < 1e-4 {
                nearest
            } else {
                scaled.floor()
            };
            (level / resolution) as f32
        })
        .collect()
}

/// Holds `x[i]` over positions `i..i+k` for `i = 0, k, 2k, ...`.
pub fn samplerate_downsample_with(x: &[f32], k: usize) -> Vec<f32> {
    let k = k.max(1);
    x.iter().enumerate().map(|(i, _)| x[i - i % k]).collect()
}

macro_rules! random_op {
    ($(#[$doc:meta])* $name:ident, $kind:expr) => {
        $(#[$doc])*
        pub fn $name<R: Rng + ?Sized>(x: &[f32], rng: &mut R) -> Vec<f32> {
            $kind.apply(x, rng)
        }
    };
}

random_op!(
    /// Clips at `u * max|x|`, `u ~ U(0.75, 1)`.
    amplitude_clip, AugmentKind::AmplitudeClip);
random_op!(
    /// Scales by `g ~ U(0.5, 1.5)`; the result may leave [-1, 1].
    amplify, AugmentKind::Amplify);
random_op!(
    /// Adds a copy delayed by 882..=17640 samples.
    echo, AugmentKind::Echo);
random_op!(
    /// 5th-order Butterworth lowpass, cutoff `U(0.05, 0.2)` of Nyquist.
    lowpass, AugmentKind::Lowpass);
random_op!(
    /// Pitch shift by `U(0, 4)` semitones.
    pitch_shift, AugmentKind::PitchShift);
random_op!(
    /// Replaces a contiguous `U(0, 0.3)` fraction with Gaussian noise.
    partial_erase, AugmentKind::PartialErase);
random_op!(
    /// Time stretch at rate `U(0.5, 1.5)`, fitted back to the input length.
    speed_adjust, AugmentKind::SpeedAdjust);
random_op!(
    /// Adds Gaussian noise with `sigma ~ U(0, 0.05) * max|x|`.
    add_noise, AugmentKind::AddNoise);
random_op!(
    /// Keeps either the harmonic or the percussive part (fair coin).
    hpss, AugmentKind::Hpss);
random_op!(
    /// Quantizes onto a grid of `1/R`, `R` in 40..=100.
    bitwise_downsample, AugmentKind::BitwiseDownsample);
random_op!(
    /// Sample-and-hold every `k` in 2..=9 samples.
    samplerate_downsample, AugmentKind::SamplerateDownsample);

/// One configured augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    pub kind: AugmentKind,
    pub probability: f64,
    pub rng_seed: u64,
    /// Overrides [`AugmentKind::default_range`].
    pub range: Option<(f64, f64)>,
}

impl AugmentSpec {
    pub const DEFAULT_PROBABILITY: f64 = 0.3;

    pub fn new(kind: AugmentKind, probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::config(format!(
                "probability {probability} for {} is outside [0, 1]",
                kind.name()
            )));
        }
        Ok(AugmentSpec {
            kind,
            probability,
            rng_seed: 0,
            range: None,
        })
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    /// All eleven kinds at the default probability.
    pub fn all_default() -> Vec<AugmentSpec> {
        AugmentKind::ALL
            .into_iter()
            .map(|k| AugmentSpec::new(k, Self::DEFAULT_PROBABILITY).expect("valid default"))
            .collect()
    }
}

/// Applies `specs` in order, each independently with its probability.
pub fn apply_pipeline<R: Rng + ?Sized>(x: &[f32], specs: &[AugmentSpec], rng: &mut R) -> Vec<f32> {
    let mut out = x.to_vec();
    for spec in specs {
        let coin: f64 = rng.random();
        let stream: u64 = rng.random();
        if coin >= spec.probability {
            continue;
        }
        let mut sub = rng::stream(spec.rng_seed, &[stream]);
        let range = spec.range.unwrap_or(spec.kind.default_range());
        let param = spec.kind.draw(range, &mut sub);
        out = spec.kind.apply_with(&out, param, &mut sub);
    }
    out
}

#[cfg(test)]
mod tests;
