//! Centered short-time Fourier transform and its overlap-add inverse.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::SpectrogramConfig;
use crate::Result;

/// L x (n_fft/2 + 1) complex spectrum, frames row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<Complex64>,
    pub config: SpectrogramConfig,
}

impl ComplexSpectrogram {
    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }
}

/// Periodic Hann window of `win_length`, zero-padded (centered) to `n_fft`.
pub fn hann_window(win_length: usize, n_fft: usize) -> Vec<f64> {
    let mut w = vec![0.0; n_fft];
    let offset = (n_fft - win_length) / 2;
    for i in 0..win_length {
        w[offset + i] = 0.5 - 0.5 * (2.0 * PI * i as f64 / win_length as f64).cos();
    }
    w
}

/// Index into `0..n` under repeated mirror reflection (edge not repeated).
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

pub(crate) struct StftPlan {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl StftPlan {
    pub(crate) fn new(cfg: &SpectrogramConfig) -> Self {
        let mut planner = FftPlanner::new();
        StftPlan {
            fwd: planner.plan_fft_forward(cfg.n_fft),
            inv: planner.plan_fft_inverse(cfg.n_fft),
            window: hann_window(cfg.win_length, cfg.n_fft),
        }
    }
}

fn stft_frames(samples: &[f32], cfg: &SpectrogramConfig, n_frames: usize) -> ComplexSpectrogram {
    let plan = StftPlan::new(cfg);
    let n_fft = cfg.n_fft;
    let bins = cfg.n_bins();
    let half = (n_fft / 2) as isize;
    let n = samples.len();
    let mut data = Vec::with_capacity(n_frames * bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let start = (t * cfg.hop_length) as isize - half;
        for (j, slot) in buf.iter_mut().enumerate() {
            let w = plan.window[j];
            let s = if w == 0.0 || n == 0 {
                0.0
            } else {
                samples[reflect_index(start + j as isize, n)] as f64
            };
            *slot = Complex64::new(s * w, 0.0);
        }
        plan.fwd.process(&mut buf);
        data.extend_from_slice(&buf[..bins]);
    }
    ComplexSpectrogram {
        frames: n_frames,
        bins,
        data,
        config: *cfg,
    }
}

/// Centered STFT truncated to `n / hop` frames.
pub fn stft(samples: &[f32], cfg: &SpectrogramConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    Ok(stft_frames(samples, cfg, cfg.num_frames(samples.len())))
}

/// Centered STFT with all `1 + n / hop` frames, so that [`istft`] can cover
/// every input sample. Used by the spectral augmentations.
pub fn stft_full(samples: &[f32], cfg: &SpectrogramConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    Ok(stft_frames(samples, cfg, 1 + samples.len() / cfg.hop_length))
}

/// Weighted overlap-add inverse of [`stft`].
///
/// Output has `length` samples when given, otherwise `hop * (frames - 1)`.
/// Samples not covered by any window come out as zero.
pub fn istft(spec: &ComplexSpectrogram, length: Option<usize>) -> Vec<f32> {
    let cfg = &spec.config;
    let n_fft = cfg.n_fft;
    let hop = cfg.hop_length;
    let out_len = length.unwrap_or(hop * spec.frames.saturating_sub(1));
    if spec.frames == 0 {
        return vec![0.0; out_len];
    }
    let plan = StftPlan::new(cfg);
    let padded_len = n_fft + hop * (spec.frames - 1);
    let mut acc = vec![0.0f64; padded_len];
    let mut wsum = vec![0.0f64; padded_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let scale = 1.0 / n_fft as f64;
    for t in 0..spec.frames {
        let frame = spec.frame(t);
        buf[..spec.bins].copy_from_slice(frame);
        // Hermitian completion for a real signal.
        for k in spec.bins..n_fft {
            buf[k] = frame[n_fft - k].conj();
        }
        buf[0].im = 0.0;
        if n_fft % 2 == 0 {
            buf[n_fft / 2].im = 0.0;
        }
        plan.inv.process(&mut buf);
        let off = t * hop;
        for j in 0..n_fft {
            let w = plan.window[j];
            acc[off + j] += buf[j].re * scale * w;
            wsum[off + j] += w * w;
        }
    }
    let half = n_fft / 2;
    (0..out_len)
        .map(|i| {
            let p = i + half;
            if p < padded_len && wsum[p] > 1e-10 {
                (acc[p] / wsum[p]) as f32
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn cfg() -> SpectrogramConfig {
        SpectrogramConfig::default()
    }

    fn sine(freq: f64, sr: f64, n: usize) -> Vec<f32> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / sr).sin() as f32)
            .collect()
    }

    /// Direct O(N^2) DFT magnitude of one windowed frame.
    fn dft_argmax(frame: &[f64]) -> usize {
        let n = frame.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, &x) in frame.iter().enumerate() {
                    let a = -2.0 * PI * (k * j) as f64 / n as f64;
                    re += x * a.cos();
                    im += x * a.sin();
                }
                (k, re * re + im * im)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }

    #[test]
    fn bin_centered_sine_peaks_at_its_bin() {
        let c = cfg();
        let f = 10.0 * c.sample_rate as f64 / c.n_fft as f64;
        let x = sine(f, c.sample_rate as f64, 8192);
        let spec = stft(&x, &c).unwrap();
        let w = hann_window(c.win_length, c.n_fft);
        // interior frames only
        for t in 2..spec.frames - 2 {
            let mags: Vec<f64> = spec.frame(t).iter().map(|z| z.norm()).collect();
            let arg = mags
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(arg, 10);
            if t == 4 {
                let start = t * c.hop_length - c.n_fft / 2;
                let frame: Vec<f64> = (0..c.n_fft).map(|j| x[start + j] as f64 * w[j]).collect();
                assert_eq!(dft_argmax(&frame), 10);
            }
        }
    }

    #[test]
    fn frame_count_matches_truncated_rule() {
        let c = cfg();
        assert_eq!(stft(&vec![0.0; 220_500], &c).unwrap().frames, 430);
        assert_eq!(stft(&vec![0.0; 44_100], &c).unwrap().frames, 86);
        assert_eq!(stft_full(&vec![0.0; 220_500], &c).unwrap().frames, 431);
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let spec = stft(&vec![0.0; 4096], &cfg()).unwrap();
        assert!(spec.data.iter().all(|z| z.norm() == 0.0));
        assert!(istft(&spec, Some(4096)).iter().all(|&s| s == 0.0));
    }

    #[test]
    fn white_noise_round_trip() {
        let mut r = rng::seeded(11);
        let x: Vec<f32> = (0..44_100).map(|_| r.random_range(-1.0f32..1.0)).collect();
        let c = cfg();
        let y = istft(&stft(&x, &c).unwrap(), Some(x.len()));
        // interior: away from the dropped final frame
        let interior = c.n_fft..x.len() - 2 * c.n_fft;
        let mse: f64 = interior
            .clone()
            .map(|i| ((x[i] - y[i]) as f64).powi(2))
            .sum::<f64>()
            / interior.len() as f64;
        assert!(mse.sqrt() < 1e-4, "rms {}", mse.sqrt());

        let full = istft(&stft_full(&x, &c).unwrap(), Some(x.len()));
        let worst = x.iter().zip(&full).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(worst < 1e-4, "worst {worst}");
    }

    #[test]
    fn round_trip_preserves_dominant_frequency() {
        let c = cfg();
        let x = sine(1000.0, 44_100.0, 8192);
        let y = istft(&stft_full(&x, &c).unwrap(), Some(x.len()));
        let seg: Vec<f64> = y[2048..2048 + 1024].iter().map(|&v| v as f64).collect();
        let hz = dft_argmax(&seg) as f64 * 44_100.0 / 1024.0;
        assert!((hz - 1000.0).abs() < 44.0, "{hz}");
    }

    #[test]
    fn stft_is_linear() {
        let mut r = rng::seeded(5);
        let x: Vec<f32> = (0..4096).map(|_| r.random_range(-1.0f32..1.0)).collect();
        let a = 0.3f32;
        let ax: Vec<f32> = x.iter().map(|v| v * a).collect();
        let s1 = stft(&x, &cfg()).unwrap();
        let s2 = stft(&ax, &cfg()).unwrap();
        for (p, q) in s1.data.iter().zip(&s2.data) {
            assert!((p * a as f64 - q).norm() < 1e-6 * (1.0 + p.norm()));
        }
    }

    #[test]
    fn parseval_power_for_white_noise() {
        let mut r = rng::seeded(21);
        let x: Vec<f32> = (0..32_768).map(|_| r.random_range(-1.0f32..1.0)).collect();
        let c = cfg();
        let spec = stft(&x, &c).unwrap();
        let w = hann_window(c.win_length, c.n_fft);
        let mut spec_power = 0.0;
        let mut sig_power = 0.0;
        for t in 0..spec.frames {
            let frame = spec.frame(t);
            // one-sided spectrum: double all bins except DC and Nyquist
            for (k, z) in frame.iter().enumerate() {
                let m = if k == 0 || k == c.n_fft / 2 { 1.0 } else { 2.0 };
                spec_power += m * z.norm_sqr() / c.n_fft as f64;
            }
            let start = (t * c.hop_length) as isize - (c.n_fft / 2) as isize;
            for j in 0..c.n_fft {
                let s = x[reflect_index(start + j as isize, x.len())] as f64 * w[j];
                sig_power += s * s;
            }
        }
        assert!((spec_power / sig_power - 1.0).abs() < 0.05);
    }

    #[test]
    fn reflect_handles_short_signals() {
        assert_eq!(reflect_index(-1, 4), 1);
        assert_eq!(reflect_index(4, 4), 2);
        assert_eq!(reflect_index(-7, 3), 1);
        assert_eq!(reflect_index(5, 1), 0);
    }
}
