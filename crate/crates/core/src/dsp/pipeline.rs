use super::features::{downsample_columns, mfcc, normalize01, reshape_amplitudes};
use super::mel::mel_spectrogram;
use super::{FeatureMatrix, SpectrogramConfig};
use crate::{AudioClip, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Mel,
    Mfcc,
    AmplitudeReshape,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Mel => 0,
            FeatureKind::Mfcc => 1,
            FeatureKind::AmplitudeReshape => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(FeatureKind::Mel),
            1 => Ok(FeatureKind::Mfcc),
            2 => Ok(FeatureKind::AmplitudeReshape),
            c => Err(Error::data(format!("unknown feature kind code {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Mel => "mel",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::AmplitudeReshape => "amplitude_reshape",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mel" => Ok(FeatureKind::Mel),
            "mfcc" => Ok(FeatureKind::Mfcc),
            "amplitude_reshape" | "reshape" => Ok(FeatureKind::AmplitudeReshape),
            other => Err(Error::config(format!("unknown feature kind `{other}`"))),
        }
    }
}

/// Waveform window to model input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePipeline {
    pub kind: FeatureKind,
    pub spectrogram: SpectrogramConfig,
    pub n_coeffs: usize,
    /// Keep every Nth frame (1 = no downsampling).
    pub downsample: usize,
    /// Min-max scale each matrix into [0, 1]. Off when the model's batch
    /// norm handles input scaling.
    pub normalize: bool,
    /// Rows of the amplitude reshape; columns are `window / rows`.
    pub reshape_rows: usize,
}

impl Default for FeaturePipeline {
    fn default() -> Self {
        FeaturePipeline {
            kind: FeatureKind::Mel,
            spectrogram: SpectrogramConfig::default(),
            n_coeffs: 128,
            downsample: 1,
            normalize: false,
            reshape_rows: 256,
        }
    }
}

impl FeaturePipeline {
    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        let base = match self.kind {
            FeatureKind::Mel => mel_spectrogram(&clip.samples, &self.spectrogram)?,
            FeatureKind::Mfcc => mfcc(&clip.samples, &self.spectrogram, self.n_coeffs)?,
            FeatureKind::AmplitudeReshape => {
                let cols = clip.samples.len() / self.reshape_rows.max(1);
                reshape_amplitudes(clip, self.reshape_rows, cols)?
            }
        };
        let base = if self.downsample > 1 {
            downsample_columns(&base, self.downsample)?
        } else {
            base
        };
        Ok(if self.normalize { normalize01(&base) } else { base })
    }

    /// `(L, F)` of the matrix produced for a window of `n_samples`.
    pub fn output_shape(&self, n_samples: usize) -> (usize, usize) {
        let (rows, cols) = match self.kind {
            FeatureKind::Mel => (self.spectrogram.num_frames(n_samples), self.spectrogram.n_mels),
            FeatureKind::Mfcc => (self.spectrogram.num_frames(n_samples), self.n_coeffs),
            FeatureKind::AmplitudeReshape => {
                (self.reshape_rows, n_samples / self.reshape_rows.max(1))
            }
        };
        let ds = self.downsample.max(1);
        (rows.div_ceil(ds), cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_shape_matches_extraction() {
        let clip = AudioClip::new((0..22_050).map(|i| (i as f32 * 0.01).sin()).collect(), 44_100);
        for kind in [FeatureKind::Mel, FeatureKind::Mfcc, FeatureKind::AmplitudeReshape] {
            for downsample in [1, 2, 3] {
                let p = FeaturePipeline {
                    kind,
                    downsample,
                    normalize: true,
                    n_coeffs: 40,
                    reshape_rows: 100,
                    ..Default::default()
                };
                let f = p.extract(&clip).unwrap();
                assert_eq!(f.shape(), p.output_shape(clip.len()), "{kind:?} {downsample}");
                assert!(f.data.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn kind_codes_round_trip() {
        for kind in [FeatureKind::Mel, FeatureKind::Mfcc, FeatureKind::AmplitudeReshape] {
            assert_eq!(FeatureKind::from_code(kind.code()).unwrap(), kind);
            assert_eq!(kind.name().parse::<FeatureKind>().unwrap(), kind);
        }
    }
}
