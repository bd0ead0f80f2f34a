//! Spectral feature extraction.
//!
//! Framing follows one fixed rule: a centered STFT over `n` samples yields
//! `1 + n / hop` frames and the final frame is dropped, so every spectral
//! feature matrix has exactly `n / hop` rows (430 rows for 5 s at 44.1 kHz
//! with hop 512, 86 rows for 1 s).

mod features;
mod mel;
mod pipeline;
mod stft;

pub use features::{
    dct_matrix, downsample_columns, mfcc, mfcc_from_log_mel, normalize01, read_features,
    reshape_amplitudes, write_features,
};
pub use mel::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, MelFilterbank};
pub use pipeline::{FeatureKind, FeaturePipeline};
pub use stft::{hann_window, istft, stft, stft_full, ComplexSpectrogram};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrogramConfig {
    pub n_fft: usize,
    pub hop_length: usize,
    pub win_length: usize,
    pub n_mels: usize,
    pub sample_rate: u32,
    pub log_scale: bool,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        SpectrogramConfig {
            n_fft: 1024,
            hop_length: 512,
            win_length: 1024,
            n_mels: 128,
            sample_rate: crate::SAMPLE_RATE,
            log_scale: true,
        }
    }
}

impl SpectrogramConfig {
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 {
            return Err(Error::config("n_fft must be at least 2"));
        }
        if self.hop_length == 0 {
            return Err(Error::config("hop_length must be positive"));
        }
        if self.win_length == 0 || self.win_length > self.n_fft {
            return Err(Error::config(format!(
                "win_length {} must be in 1..={}",
                self.win_length, self.n_fft
            )));
        }
        if self.n_mels == 0 || self.n_mels > self.n_bins() {
            return Err(Error::config(format!(
                "n_mels {} must be in 1..={} for n_fft {}",
                self.n_mels,
                self.n_bins(),
                self.n_fft
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::config("sample_rate must be positive"));
        }
        Ok(())
    }

    /// Frame count for `n_samples` under the truncated centered framing.
    pub fn num_frames(&self, n_samples: usize) -> usize {
        n_samples / self.hop_length
    }
}

/// An L x F matrix of per-frame feature vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
    pub kind: FeatureKind,
    pub frame_rate: f32,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>, kind: FeatureKind, frame_rate: f32) -> Self {
        assert_eq!(data.len(), rows * cols, "feature data does not match shape");
        FeatureMatrix {
            rows,
            cols,
            data,
            kind,
            frame_rate,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }
}
