//! Kaiser-windowed sinc resampling.

use super::AudioClip;
use crate::{Error, Result};

/// Taps per output sample.
const TAPS: usize = 32;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser(t: f64, half_width: f64) -> f64 {
    let r = t / half_width;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Band-limited resampling of `clip` to `target_rate`.
///
/// Output length is `round(len * target / source)`.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    clip.validate()?;
    if target_rate == 0 {
        return Err(Error::config("target sample rate must be positive"));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let out_len =
        (clip.samples.len() as f64 * target_rate as f64 / clip.sample_rate as f64).round() as usize;
    let mut out = clip.with_samples(resample_to_len(&clip.samples, out_len));
    out.sample_rate = target_rate;
    Ok(out)
}

/// Resamples `samples` so that the same duration spans exactly `out_len`
/// samples. The kernel is renormalized per output sample so DC passes exactly.
pub fn resample_to_len(samples: &[f32], out_len: usize) -> Vec<f32> {
    let n = samples.len();
    if n == 0 || out_len == 0 {
        return vec![0.0; out_len];
    }
    if out_len == n {
        return samples.to_vec();
    }
    // input samples per output sample
    let step = n as f64 / out_len as f64;
    let cutoff = (1.0 / step).min(1.0);
    let half = TAPS as f64 / 2.0;
    // Widen the support when decimating so the kernel keeps TAPS zero crossings.
    let support = half / cutoff;
    (0..out_len)
        .map(|t| {
            let x = t as f64 * step;
            let lo = (x - support).ceil().max(0.0) as usize;
            let hi = ((x + support).floor() as usize).min(n - 1);
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (k, &s) in samples.iter().enumerate().take(hi + 1).skip(lo) {
                let d = x - k as f64;
                let w = cutoff * sinc(cutoff * d) * kaiser(d, support);
                acc += w * s as f64;
                wsum += w;
            }
            if wsum.abs() > 1e-12 {
                (acc / wsum) as f32
            } else {
                0.0
            }
        })
        .collect()
}
