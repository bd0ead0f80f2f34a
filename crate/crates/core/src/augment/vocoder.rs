//! Phase-vocoder time stretching and pitch shifting.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::audio_io::resample_to_len;
use crate::dsp::{istft, stft_full, ComplexSpectrogram, SpectrogramConfig};

const N_FFT: usize = 2048;
const HOP: usize = 512;

fn vocoder_config() -> SpectrogramConfig {
    SpectrogramConfig {
        n_fft: N_FFT,
        hop_length: HOP,
        win_length: N_FFT,
        n_mels: 1,
        sample_rate: crate::SAMPLE_RATE,
        log_scale: false,
    }
}

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * (p / (2.0 * PI)).round()
}

/// Resynthesizes `spec` at `rate` frames per input frame: rate > 1 is
/// faster (fewer frames), rate < 1 slower. Magnitudes are interpolated
/// between neighbouring frames and phases accumulate the per-bin advance.
pub fn phase_vocoder(spec: &ComplexSpectrogram, rate: f64) -> ComplexSpectrogram {
    assert!(rate > 0.0);
    let bins = spec.bins;
    let n_fft = spec.config.n_fft as f64;
    let hop = spec.config.hop_length as f64;
    let advance: Vec<f64> = (0..bins).map(|k| 2.0 * PI * hop * k as f64 / n_fft).collect();
    let steps: Vec<f64> = (0..)
        .map(|i| i as f64 * rate)
        .take_while(|&s| s < spec.frames as f64)
        .collect();

    let zero = Complex64::new(0.0, 0.0);
    let at = |t: usize, k: usize| {
        if t < spec.frames {
            spec.data[t * bins + k]
        } else {
            zero
        }
    };
    let mut phase: Vec<f64> = (0..bins).map(|k| at(0, k).arg()).collect();
    let mut data = Vec::with_capacity(steps.len() * bins);
    for &step in &steps {
        let t = step.floor() as usize;
        let alpha = step - t as f64;
        for k in 0..bins {
            let (c0, c1) = (at(t, k), at(t + 1, k));
            let mag = (1.0 - alpha) * c0.norm() + alpha * c1.norm();
            data.push(Complex64::from_polar(mag, phase[k]));
            let dphase = wrap_phase(c1.arg() - c0.arg() - advance[k]);
            phase[k] += advance[k] + dphase;
        }
    }
    ComplexSpectrogram {
        frames: steps.len(),
        bins,
        data,
        config: spec.config,
    }
}

/// Time-stretches by `rate` (> 1 faster) keeping pitch; output length is
/// `round(len / rate)`.
pub fn time_stretch(x: &[f32], rate: f64) -> Vec<f32> {
    if x.is_empty() {
        return Vec::new();
    }
    let spec = stft_full(x, &vocoder_config()).expect("static vocoder config is valid");
    let stretched = phase_vocoder(&spec, rate);
    let len = (x.len() as f64 / rate).round() as usize;
    istft(&stretched, Some(len))
}

/// Shifts pitch by `semitones` keeping the length: stretch to
/// `2^(s/12)` times the duration, then resample back to `len` samples.
pub fn pitch_shift_semitones(x: &[f32], semitones: f64) -> Vec<f32> {
    let factor = 2f64.powf(semitones / 12.0);
    let stretched = time_stretch(x, 1.0 / factor);
    resample_to_len(&stretched, x.len())
}
