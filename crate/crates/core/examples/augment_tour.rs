//! Runs every augmentation on a one-second tone and reports how the signal
//! changed. Pass a directory to also write each result as a WAV file.
//!
//!     cargo run --release --example augment_tour -- /tmp/augmented

use tinyesc::audio_io::write_wav;
use tinyesc::augment::{apply_pipeline, AugmentKind, AugmentSpec};
use tinyesc::rng;
use tinyesc::synth::{synth_clip, SynthSpec};

fn rms(x: &[f32]) -> f64 {
    (x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Frequency of the strongest zero-crossing rate, a cheap pitch estimate.
fn crossing_hz(x: &[f32], sr: f64) -> f64 {
    let n = x.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
    n as f64 * sr / (2.0 * x.len() as f64)
}

fn main() -> tinyesc::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    let spec = SynthSpec {
        background: 0.0,
        ..SynthSpec::default()
    };
    let clip = synth_clip(2, 3, &spec);
    let sr = clip.sample_rate as f64;
    println!(
        "{:<22} {:>8} {:>8} {:>10}",
        "augmentation", "samples", "rms", "~freq (Hz)"
    );
    println!(
        "{:<22} {:>8} {:>8.4} {:>10.0}",
        "original",
        clip.len(),
        rms(&clip.samples),
        crossing_hz(&clip.samples, sr)
    );
    for (i, kind) in AugmentKind::ALL.into_iter().enumerate() {
        let y = kind.apply(&clip.samples, &mut rng::stream(1, &[i as u64]));
        println!(
            "{:<22} {:>8} {:>8.4} {:>10.0}",
            kind.name(),
            y.len(),
            rms(&y),
            crossing_hz(&y, sr)
        );
        if let Some(dir) = &out {
            write_wav(dir.join(format!("{}.wav", kind.name())), &clip.with_samples(y))?;
        }
    }

    // The training pipeline: each augmentation fires independently with
    // probability 0.3, in a fixed order.
    let specs = AugmentSpec::all_default();
    for draw in 0..3u64 {
        let y = apply_pipeline(&clip.samples, &specs, &mut rng::stream(9, &[draw]));
        println!("pipeline draw {draw}: rms {:.4}", rms(&y));
    }
    Ok(())
}
