//! Quantizes the tiny model to int8, checks how often its predictions agree
//! with the f32 model, saves it and times both on one thread.
//!
//!     cargo run --release --example quantize_and_bench

use rand_distr::{Distribution, StandardNormal};
use tinyesc::deploy::{bench, encode_quantized, qforward, BenchConfig, BenchModel, QuantizedModel};
use tinyesc::model::{encode_checkpoint, forward, init_model, Checkpoint, Input, ModelConfig};
use tinyesc::rng;
use tinyesc::train::{argmax, FeatureSource};

fn main() -> tinyesc::Result<()> {
    let cfg = ModelConfig::default();
    let names = (0..cfg.classes).map(|i| format!("class_{i}")).collect();
    let ck = Checkpoint::new(init_model(&cfg, &mut rng::seeded(0))?, names);
    let q = QuantizedModel::from_checkpoint(&ck)?;

    let (qb, fb) = q.params.weight_payload();
    println!("linear weight payload: {qb} bytes int8 vs {fb} bytes f32");
    println!(
        "file sizes: {} bytes f32 checkpoint, {} bytes quantized",
        encode_checkpoint(&ck).len(),
        encode_quantized(&q).len()
    );

    let n = 500;
    let mut r = rng::seeded(1);
    let x: Vec<f32> = (0..n * cfg.seq_len * cfg.input_dim)
        .map(|_| StandardNormal.sample(&mut r))
        .collect();
    let a = forward(&ck.params, &Input::Features(&x))?;
    let b = qforward(&q.params, &Input::Features(&x))?;
    let agree = a
        .chunks(cfg.classes)
        .zip(b.chunks(cfg.classes))
        .filter(|(u, v)| argmax(u) == argmax(v))
        .count();
    let dev = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0f32, f32::max);
    println!("argmax agreement on {n} random inputs: {agree}/{n}, max logit gap {dev:.2e}");

    let source = FeatureSource::default();
    let bc = BenchConfig::default();
    for model in [BenchModel::Float(&ck), BenchModel::Quantized(&q)] {
        println!("{}", bench(model, &source, &bc)?.to_json_line());
    }
    Ok(())
}
