//! Writes the synthetic three-class corpus to `data/synthetic` (or the
//! directory given) and trains the tiny model on it, printing per-epoch
//! metrics. The same data backs `configs/synthetic.cfg`.
//!
//!     cargo run --release --example train_synthetic -- data/synthetic 30

use tinyesc::model::{count_params, ModelConfig};
use tinyesc::synth::{write_synth_dataset, SynthSpec};
use tinyesc::train::{fit, initial_checkpoint, Dataset, TrainConfig, ValSplit};

fn main() -> tinyesc::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = args.next().unwrap_or_else(|| "data/synthetic".into());
    let epochs: usize = args.next().map_or(Ok(30), |s| s.parse()).expect("epochs must be an integer");

    let manifest = write_synth_dataset(&root, &SynthSpec::default())?;
    println!("wrote {} clips in {} classes to {root}", manifest.len(), manifest.num_classes());
    let data = Dataset::load(&manifest, tinyesc::SAMPLE_RATE)?;

    let cfg = TrainConfig {
        lr_peak: 1e-3,
        warmup_steps: 100,
        batch_size: 16,
        epochs,
        seed: 7,
        val_split: ValSplit::Stratified(0.2),
        ..TrainConfig::default()
    };
    let model = cfg.shape_model(&ModelConfig {
        classes: data.class_names.len(),
        ..ModelConfig::default()
    });
    println!("model: {} parameters, sequence length {}", count_params(&model), model.seq_len);

    let start = initial_checkpoint(&model, data.class_names.clone(), &cfg)?;
    let t = std::time::Instant::now();
    let out = fit(&data, start, &cfg, None)?;
    for m in &out.metrics {
        println!("epoch {:>3}  loss {:.4}  val acc {:.3}", m.epoch, m.train_loss, m.val_acc);
    }
    println!(
        "best val acc {:.3} in {:.1} s",
        out.best_val_acc(),
        t.elapsed().as_secs_f64()
    );
    Ok(())
}
