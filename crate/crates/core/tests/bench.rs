//! Latency orderings. Kept in their own test binary so no other test shares
//! the CPU while timing.

use tinyesc::deploy::{bench, BenchConfig, BenchModel, QuantizedModel};
use tinyesc::dsp::FeaturePipeline;
use tinyesc::model::{count_params, init_model, Checkpoint, ModelConfig};
use tinyesc::rng;
use tinyesc::train::FeatureSource;

fn checkpoint(cfg: &ModelConfig) -> Checkpoint {
    let names = (0..cfg.classes).map(|i| format!("c{i}")).collect();
    Checkpoint::new(init_model(cfg, &mut rng::seeded(11)).unwrap(), names)
}

/// Mel spectrogram of 5 s at every other frame (215 positions), sixteen
/// applications of one shared 256-wide block with 16 heads, 50 classes.
fn large() -> (ModelConfig, FeaturePipeline) {
    let cfg = ModelConfig {
        seq_len: 215,
        hidden: 256,
        layers: 16,
        heads: 16,
        classes: 50,
        share_layers: true,
        ..ModelConfig::default()
    };
    let pipe = FeaturePipeline {
        downsample: 2,
        ..FeaturePipeline::default()
    };
    (cfg, pipe)
}

#[test]
fn latency_orderings() {
    let bc = BenchConfig::default();
    let tiny_cfg = ModelConfig::default();
    assert_eq!(count_params(&tiny_cfg), 6_642);
    let tiny = checkpoint(&tiny_cfg);
    let mel = FeatureSource::Spectral(FeaturePipeline::default());
    let t = bench(BenchModel::Float(&tiny), &mel, &bc).unwrap();

    let (large_cfg, pipe) = large();
    let n = count_params(&large_cfg);
    assert!((850_000..1_000_000).contains(&n), "{n}");
    let big = checkpoint(&large_cfg);
    let bigq = QuantizedModel::from_checkpoint(&big).unwrap();
    let src = FeatureSource::Spectral(pipe);
    // Alternate the two models so slow drift in machine load hits both.
    let (mut fsum, mut qsum) = (0.0, 0.0);
    let (mut f, mut q) = (None, None);
    for _ in 0..3 {
        let fr = bench(BenchModel::Float(&big), &src, &bc).unwrap();
        let qr = bench(BenchModel::Quantized(&bigq), &src, &bc).unwrap();
        fsum += fr.model_mean_ms;
        qsum += qr.model_mean_ms;
        f = Some(fr);
        q = Some(qr);
    }
    let (f, q) = (f.unwrap(), q.unwrap());
    for r in [&t, &f, &q] {
        println!("{}", r.to_json_line());
    }
    assert!(t.mean_ms < f.mean_ms, "tiny {} ms vs large {} ms", t.mean_ms, f.mean_ms);
    assert!(qsum <= fsum * 1.1, "quantized {qsum} ms vs f32 {fsum} ms over three rounds");
    assert!(q.size_bytes * 3 < f.size_bytes);
}
