//! Audio ingestion: WAV decoding, resampling, manifests and slicing.

mod manifest;
mod resample;
mod wav;

pub use manifest::{load_manifest, DatasetManifest, Layout, ManifestEntry};
pub use resample::{resample, resample_to_len};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};

use rand::Rng;

use crate::{Error, Result};

/// A mono waveform with amplitudes nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub label: Option<usize>,
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        AudioClip {
            samples,
            sample_rate,
            label: None,
            source_id: String::new(),
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    /// Same metadata, new samples.
    pub fn with_samples(&self, samples: Vec<f32>) -> Self {
        AudioClip {
            samples,
            sample_rate: self.sample_rate,
            label: self.label,
            source_id: self.source_id.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::data("sample rate must be positive"));
        }
        if let Some(i) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::data(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }
}

/// Takes `n_samples` contiguous samples starting at a uniform random offset.
///
/// Clips shorter than the window are right-padded with zeros from offset 0.
pub fn random_slice<R: Rng + ?Sized>(clip: &AudioClip, n_samples: usize, rng: &mut R) -> AudioClip {
    assert!(n_samples > 0, "slice length must be positive");
    let len = clip.samples.len();
    if len <= n_samples {
        return clip.with_samples(pad_to(&clip.samples, n_samples));
    }
    let start = rng.random_range(0..=len - n_samples);
    clip.with_samples(clip.samples[start..start + n_samples].to_vec())
}

/// Deterministic centered window, used for evaluation.
pub fn center_slice(clip: &AudioClip, n_samples: usize) -> AudioClip {
    let len = clip.samples.len();
    if len <= n_samples {
        return clip.with_samples(pad_to(&clip.samples, n_samples));
    }
    let start = (len - n_samples) / 2;
    clip.with_samples(clip.samples[start..start + n_samples].to_vec())
}

/// Truncates or right-pads with zeros to exactly `n` samples.
pub fn pad_to(samples: &[f32], n: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&samples[..samples.len().min(n)]);
    out.resize(n, 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn ramp(n: usize) -> AudioClip {
        AudioClip::new((0..n).map(|i| i as f32).collect(), 44_100)
    }

    #[test]
    fn slice_of_exact_length_is_whole_clip() {
        let clip = ramp(64);
        let out = random_slice(&clip, 64, &mut rng::seeded(1));
        assert_eq!(out.samples, clip.samples);
    }

    #[test]
    fn short_clip_is_zero_padded_on_the_right() {
        let clip = ramp(1000);
        let out = random_slice(&clip, 1500, &mut rng::seeded(3));
        assert_eq!(out.len(), 1500);
        assert_eq!(&out.samples[..1000], &clip.samples[..]);
        assert!(out.samples[1000..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn fixed_seed_gives_identical_slices() {
        let clip = ramp(10_000);
        let a = random_slice(&clip, 300, &mut rng::seeded(42));
        let b = random_slice(&clip, 300, &mut rng::seeded(42));
        assert_eq!(a, b);
        // contiguous
        let start = a.samples[0] as usize;
        assert!(a.samples.iter().enumerate().all(|(i, &s)| s as usize == start + i));
    }

    #[test]
    fn slice_offsets_cover_the_full_range() {
        let clip = ramp(20);
        let mut r = rng::seeded(9);
        let mut seen = [false; 11];
        for _ in 0..500 {
            let s = random_slice(&clip, 10, &mut r);
            seen[s.samples[0] as usize] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn validate_rejects_nan_and_zero_rate() {
        assert!(AudioClip::new(vec![0.0, f32::NAN], 8000).validate().is_err());
        assert!(AudioClip::new(vec![0.0], 0).validate().is_err());
        assert!(AudioClip::new(vec![0.0], 8000).validate().is_ok());
    }

    proptest::proptest! {
        #[test]
        fn slice_length_is_always_exact(len in 0usize..3000, n in 1usize..2000, seed in 0u64..1000) {
            let clip = ramp(len);
            let out = random_slice(&clip, n, &mut rng::seeded(seed));
            proptest::prop_assert_eq!(out.len(), n);
        }
    }
}
