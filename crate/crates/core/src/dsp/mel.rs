//! Slaney-style mel filterbank and log-mel spectrograms.

use super::stft::stft;
use super::{FeatureKind, FeatureMatrix, SpectrogramConfig};
use crate::Result;

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn logstep() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / logstep()
    } else {
        hz / F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * (logstep() * (mel - MIN_LOG_MEL)).exp()
    } else {
        F_SP * mel
    }
}

/// Triangular filters stored sparsely: each row keeps its non-zero span.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    /// Center frequency of each filter in Hz.
    pub centers_hz: Vec<f64>,
    starts: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    /// Dense `n_mels x n_bins` matrix.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_mels)
            .map(|m| {
                let mut row = vec![0.0; self.n_bins];
                row[self.starts[m]..self.starts[m] + self.weights[m].len()]
                    .copy_from_slice(&self.weights[m]);
                row
            })
            .collect()
    }

    /// Applies the filterbank to one power (or magnitude) spectrum frame.
    pub fn apply(&self, spectrum: &[f64], out: &mut [f64]) {
        for m in 0..self.n_mels {
            let s = self.starts[m];
            out[m] = self.weights[m]
                .iter()
                .zip(&spectrum[s..])
                .map(|(w, p)| w * p)
                .sum();
        }
    }
}

/// Builds `n_mels` area-normalized triangular filters spanning 0 Hz to sr/2.
pub fn mel_filterbank(cfg: &SpectrogramConfig) -> Result<MelFilterbank> {
    cfg.validate()?;
    let n_bins = cfg.n_bins();
    let sr = cfg.sample_rate as f64;
    let fft_freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * sr / cfg.n_fft as f64).collect();
    let mel_max = hz_to_mel(sr / 2.0);
    let mel_pts: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();

    let mut starts = Vec::with_capacity(cfg.n_mels);
    let mut weights = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (lower, center, upper) = (mel_pts[m], mel_pts[m + 1], mel_pts[m + 2]);
        let enorm = 2.0 / (upper - lower);
        let row: Vec<f64> = fft_freqs
            .iter()
            .map(|&f| {
                let rise = (f - lower) / (center - lower);
                let fall = (upper - f) / (upper - center);
                rise.min(fall).max(0.0) * enorm
            })
            .collect();
        let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
        let last = row.iter().rposition(|&w| w > 0.0).map_or(first, |i| i + 1);
        starts.push(first);
        weights.push(row[first..last].to_vec());
    }
    Ok(MelFilterbank {
        n_mels: cfg.n_mels,
        n_bins,
        centers_hz: mel_pts[1..=cfg.n_mels].to_vec(),
        starts,
        weights,
    })
}

pub(crate) const POWER_FLOOR: f64 = 1e-10;
pub(crate) const TOP_DB: f64 = 80.0;

/// Converts power values to dB in place with the 1e-10 floor and an 80 dB
/// dynamic range below the maximum.
pub(crate) fn power_to_db(values: &mut [f64]) {
    let mut top = f64::NEG_INFINITY;
    for v in values.iter_mut() {
        *v = 10.0 * v.max(POWER_FLOOR).log10();
        top = top.max(*v);
    }
    let floor = top - TOP_DB;
    for v in values.iter_mut() {
        *v = v.max(floor);
    }
}

pub(crate) fn mel_power(samples: &[f32], cfg: &SpectrogramConfig) -> Result<Vec<f64>> {
    let fb = mel_filterbank(cfg)?;
    let spec = stft(samples, cfg)?;
    let mut out = vec![0.0; spec.frames * cfg.n_mels];
    let mut power = vec![0.0; spec.bins];
    for t in 0..spec.frames {
        for (p, z) in power.iter_mut().zip(spec.frame(t)) {
            *p = z.norm_sqr();
        }
        fb.apply(&power, &mut out[t * cfg.n_mels..(t + 1) * cfg.n_mels]);
    }
    Ok(out)
}

/// Power mel spectrogram, in dB when `cfg.log_scale` is set. Shape L x n_mels.
pub fn mel_spectrogram(samples: &[f32], cfg: &SpectrogramConfig) -> Result<FeatureMatrix> {
    let mut mel = mel_power(samples, cfg)?;
    if cfg.log_scale {
        power_to_db(&mut mel);
    }
    let rows = cfg.num_frames(samples.len());
    Ok(FeatureMatrix::new(
        rows,
        cfg.n_mels,
        mel.into_iter().map(|v| v as f32).collect(),
        FeatureKind::Mel,
        cfg.sample_rate as f32 / cfg.hop_length as f32,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 300.0, 999.0, 1000.0, 4000.0, 22_050.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn filters_are_single_peaked_triangles_with_increasing_centers() {
        let fb = mel_filterbank(&SpectrogramConfig::default()).unwrap();
        for row in fb.to_dense() {
            assert!(row.iter().all(|&w| w >= 0.0));
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            // non-decreasing up to the peak, non-increasing after
            assert!(row[..=peak].windows(2).all(|w| w[0] <= w[1]));
            assert!(row[peak..].windows(2).all(|w| w[0] >= w[1]));
        }
        assert!(fb.centers_hz.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn flat_spectrum_response_has_no_zeros() {
        let cfg = SpectrogramConfig::default();
        let fb = mel_filterbank(&cfg).unwrap();
        let flat = vec![1.0; cfg.n_bins()];
        let mut out = vec![0.0; cfg.n_mels];
        fb.apply(&flat, &mut out);
        assert!(out.iter().all(|&v| v > 0.0), "{out:?}");
        // Area normalization makes each response roughly the bin density
        // n_fft / sr; neighbours never jump by more than 2x.
        assert!(out.windows(2).all(|w| w[1] / w[0] < 2.0 && w[0] / w[1] < 2.0));
        let expect = cfg.n_fft as f64 / cfg.sample_rate as f64;
        assert!(out[64..].iter().all(|&v| (v / expect - 1.0).abs() < 0.1));
    }

    #[test]
    fn too_many_mels_is_a_config_error() {
        let cfg = SpectrogramConfig {
            n_fft: 64,
            n_mels: 40,
            win_length: 64,
            ..Default::default()
        };
        assert!(mel_filterbank(&cfg).is_err());
    }

    #[test]
    fn table_sequence_lengths() {
        let cfg = SpectrogramConfig::default();
        let five = mel_spectrogram(&vec![0.0; 220_500], &cfg).unwrap();
        assert_eq!(five.shape(), (430, 128));
        let one = mel_spectrogram(&vec![0.0; 44_100], &cfg).unwrap();
        assert_eq!(one.shape(), (86, 128));
    }

    #[test]
    fn silence_sits_at_the_db_floor() {
        let m = mel_spectrogram(&vec![0.0; 8192], &SpectrogramConfig::default()).unwrap();
        assert!(m.data.iter().all(|&v| v == -100.0));
    }

    #[test]
    fn tone_peaks_in_nearest_band() {
        let cfg = SpectrogramConfig::default();
        let fb = mel_filterbank(&cfg).unwrap();
        for freq in [440.0, 1234.0, 3000.0, 7777.0, 15_000.0] {
            let x: Vec<f32> = (0..16_384)
                .map(|i| (2.0 * PI * freq * i as f64 / 44_100.0).sin() as f32)
                .collect();
            let m = mel_spectrogram(&x, &cfg).unwrap();
            let nearest = fb
                .centers_hz
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - freq).abs().total_cmp(&(b.1 - freq).abs()))
                .unwrap()
                .0;
            for t in 2..m.rows - 2 {
                let row = m.row(t);
                let arg = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                assert_eq!(arg, nearest, "freq {freq} frame {t}");
            }
        }
    }
}
