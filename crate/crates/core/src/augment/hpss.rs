//! Harmonic/percussive separation by median filtering the magnitude
//! spectrogram along time (harmonic) and frequency (percussive).

use rustfft::num_complex::Complex64;

use crate::dsp::{istft, stft_full, ComplexSpectrogram, SpectrogramConfig};

pub const KERNEL: usize = 17;
const MASK_EPS: f64 = 1e-10;

fn hpss_config() -> SpectrogramConfig {
    SpectrogramConfig {
        n_fft: 1024,
        hop_length: 512,
        win_length: 1024,
        n_mels: 1,
        sample_rate: crate::SAMPLE_RATE,
        log_scale: false,
    }
}

/// Half-sample symmetric index (`d c b a | a b c d | d c b a`).
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn median(buf: &mut [f64]) -> f64 {
    let mid = buf.len() / 2;
    *buf.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1
}

/// Median-filters a `rows x cols` matrix along one axis.
fn median_filter(data: &[f64], rows: usize, cols: usize, along_rows: bool) -> Vec<f64> {
    let half = (KERNEL / 2) as isize;
    let mut out = vec![0.0; data.len()];
    let mut buf = vec![0.0; KERNEL];
    for r in 0..rows {
        for c in 0..cols {
            for (j, slot) in buf.iter_mut().enumerate() {
                let o = j as isize - half;
                *slot = if along_rows {
                    data[mirror(r as isize + o, rows) * cols + c]
                } else {
                    data[r * cols + mirror(c as isize + o, cols)]
                };
            }
            out[r * cols + c] = median(&mut buf);
        }
    }
    out
}

fn medians(spec: &ComplexSpectrogram) -> (Vec<f64>, Vec<f64>) {
    let mag = spec.magnitudes();
    // Frames are rows: time runs down the rows, frequency along a row.
    let harmonic = median_filter(&mag, spec.frames, spec.bins, true);
    let percussive = median_filter(&mag, spec.frames, spec.bins, false);
    (harmonic, percussive)
}

/// Soft masks `(harmonic, percussive)` for a spectrogram, each
/// `frames x bins` and summing to one per bin (up to the epsilon).
pub fn hpss_masks(spec: &ComplexSpectrogram) -> (Vec<f64>, Vec<f64>) {
    let (harmonic, percussive) = medians(spec);
    harmonic
        .iter()
        .zip(&percussive)
        .map(|(h, p)| {
            let (h2, p2) = (h * h, p * p);
            let denom = h2 + p2 + MASK_EPS;
            (h2 / denom, p2 / denom)
        })
        .unzip()
}

/// Returns `(harmonic, percussive)` signals, both of the input length.
pub fn hpss_split(x: &[f32]) -> (Vec<f32>, Vec<f32>) {
    if x.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let spec = stft_full(x, &hpss_config()).expect("static hpss config is valid");
    let (mh, mp) = hpss_masks(&spec);
    let apply = |mask: &[f64]| {
        let data: Vec<Complex64> = spec.data.iter().zip(mask).map(|(z, m)| z * m).collect();
        let masked = ComplexSpectrogram {
            data,
            ..spec.clone()
        };
        istft(&masked, Some(x.len()))
    };
    (apply(&mh), apply(&mp))
}
