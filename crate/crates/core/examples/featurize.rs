//! Turns one synthetic clip of each class into the model input matrices the
//! pipeline supports and prints their shapes and value ranges.
//!
//!     cargo run --release --example featurize

use tinyesc::audio_io::pad_to;
use tinyesc::dsp::{FeatureKind, FeaturePipeline};
use tinyesc::synth::{synth_clip, SynthSpec, SYNTH_CLASSES};

fn main() -> tinyesc::Result<()> {
    let spec = SynthSpec::default();
    let pipelines = [
        ("log-mel, 128 bands", FeaturePipeline::default()),
        (
            "MFCC, 40 coefficients",
            FeaturePipeline {
                kind: FeatureKind::Mfcc,
                n_coeffs: 40,
                ..FeaturePipeline::default()
            },
        ),
        (
            "log-mel, every 3rd frame, scaled to [0, 1]",
            FeaturePipeline {
                downsample: 3,
                normalize: true,
                ..FeaturePipeline::default()
            },
        ),
        (
            "raw amplitudes, 256 rows",
            FeaturePipeline {
                kind: FeatureKind::AmplitudeReshape,
                ..FeaturePipeline::default()
            },
        ),
    ];
    for (class, name) in SYNTH_CLASSES.iter().enumerate() {
        let clip = synth_clip(class, 0, &spec);
        println!("{name} ({} samples)", clip.len());
        for (label, pipe) in &pipelines {
            let m = pipe.extract(&clip)?;
            let lo = m.data.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = m.data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            println!("  {label:<45} {:>4} x {:<4} [{lo:.3}, {hi:.3}]", m.rows, m.cols);
        }
    }

    // Five seconds (the ESC-50 clip length) gives 430 frames at hop 512.
    let clip = synth_clip(2, 0, &spec);
    let long = clip.with_samples(pad_to(&clip.samples, 5 * 44_100));
    let m = FeaturePipeline::default().extract(&long)?;
    println!("5 s window: {} x {}", m.rows, m.cols);
    Ok(())
}
