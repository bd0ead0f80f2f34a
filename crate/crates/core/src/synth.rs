//! Synthetic three-class sound corpus: sine tones, white-noise bursts and
//! click trains. Used for learnability checks and the examples, where no
//! public recordings are needed.

use std::f64::consts::TAU;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::audio_io::{load_manifest, write_wav, DatasetManifest, Layout};
use crate::{rng, AudioClip, Result};

/// Class names in the order a folder-per-class manifest lists them.
pub const SYNTH_CLASSES: [&str; 3] = ["click_train", "noise_burst", "sine_tone"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub clips_per_class: usize,
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub seed: u64,
    /// Standard deviation of the background noise present in every clip.
    pub background: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            clips_per_class: 60,
            duration_secs: 1.0,
            sample_rate: crate::SAMPLE_RATE,
            seed: 0,
            background: 0.01,
        }
    }
}

impl SynthSpec {
    pub fn n_samples(&self) -> usize {
        (self.duration_secs * self.sample_rate as f64).round() as usize
    }
}

/// Clip `index` of class `class` (see [`SYNTH_CLASSES`]).
pub fn synth_clip(class: usize, index: usize, spec: &SynthSpec) -> AudioClip {
    let mut r = rng::stream(spec.seed, &[class as u64, index as u64]);
    let n = spec.n_samples();
    let sr = spec.sample_rate as f64;
    let gain = r.random_range(0.3..0.8);
    let mut x = vec![0.0f64; n];
    match class {
        0 => {
            let rate = r.random_range(4.0..30.0);
            let period = (sr / rate).round().max(1.0) as usize;
            let width = r.random_range(8..48usize);
            let mut start = r.random_range(0..period);
            while start < n {
                for k in 0..width.min(n - start) {
                    // decaying impulse
                    x[start + k] = gain * (-(k as f64) / (width as f64 / 4.0)).exp();
                }
                start += period;
            }
        }
        1 => {
            let normal = Normal::new(0.0, gain / 2.0).expect("positive std");
            let bursts = r.random_range(1..4usize);
            for _ in 0..bursts {
                let len = r.random_range(n / 10..n / 3);
                let at = r.random_range(0..n - len);
                for v in &mut x[at..at + len] {
                    *v += normal.sample(&mut r);
                }
            }
        }
        2 => {
            let freq = r.random_range(150.0..3000.0);
            let phase = r.random_range(0.0..TAU);
            for (i, v) in x.iter_mut().enumerate() {
                *v = gain * (TAU * freq * i as f64 / sr + phase).sin();
            }
        }
        _ => panic!("synthetic class {class} out of range"),
    }
    if spec.background > 0.0 {
        let bg = Normal::new(0.0, spec.background).expect("positive std");
        for v in &mut x {
            *v += bg.sample(&mut r);
        }
    }
    let samples = x.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect();
    AudioClip::new(samples, spec.sample_rate)
        .with_label(class)
        .with_source(format!("{}_{index:03}", SYNTH_CLASSES[class]))
}

/// All clips, class-major.
pub fn synth_dataset(spec: &SynthSpec) -> Vec<AudioClip> {
    (0..SYNTH_CLASSES.len())
        .flat_map(|c| (0..spec.clips_per_class).map(move |i| (c, i)))
        .map(|(c, i)| synth_clip(c, i, spec))
        .collect()
}

/// Writes the corpus as `root/<class>/<class>_NNN.wav` and returns its
/// manifest.
pub fn write_synth_dataset(root: impl AsRef<Path>, spec: &SynthSpec) -> Result<DatasetManifest> {
    let root = root.as_ref();
    for clip in synth_dataset(spec) {
        let class = SYNTH_CLASSES[clip.label.expect("labelled")];
        let dir = root.join(class);
        std::fs::create_dir_all(&dir)?;
        write_wav(dir.join(format!("{}.wav", clip.source_id)), &clip)?;
    }
    load_manifest(root, Layout::FolderPerClass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let spec = SynthSpec {
            clips_per_class: 2,
            ..SynthSpec::default()
        };
        let a = synth_dataset(&spec);
        assert_eq!(a, synth_dataset(&spec));
        assert_eq!(a.len(), 6);
        for c in &a {
            assert_eq!(c.len(), 44_100);
            assert!(c.samples.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn written_corpus_lists_classes_in_label_order() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            clips_per_class: 2,
            duration_secs: 0.1,
            ..SynthSpec::default()
        };
        let m = write_synth_dataset(dir.path(), &spec).unwrap();
        assert_eq!(m.class_names, SYNTH_CLASSES);
        assert_eq!(m.len(), 6);
        for e in &m.entries {
            assert!(e.path.to_string_lossy().contains(SYNTH_CLASSES[e.class_index]));
        }
    }
}
