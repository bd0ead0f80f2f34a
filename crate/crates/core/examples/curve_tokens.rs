//! Builds absolute and relative curve vocabularies over a synthetic corpus,
//! compares their coverage and tokenizes one clip.
//!
//!     cargo run --release --example curve_tokens

use tinyesc::synth::{synth_dataset, SynthSpec};
use tinyesc::tokenizer::{build_curve_vocab, coverage, tokenize, CurveMode, CurveSpec, UNK};

fn main() -> tinyesc::Result<()> {
    let spec = SynthSpec {
        clips_per_class: 20,
        ..SynthSpec::default()
    };
    let corpus = synth_dataset(&spec);
    // Every fourth clip is held out, so all classes appear on both sides.
    let (test, train): (Vec<_>, Vec<_>) = corpus.into_iter().enumerate().partition(|(i, _)| i % 4 == 0);
    let train: Vec<_> = train.into_iter().map(|(_, c)| c).collect();
    let test: Vec<_> = test.into_iter().map(|(_, c)| c).collect();
    for mode in [CurveMode::Absolute, CurveMode::Relative] {
        let cs = CurveSpec {
            top_k: 5_000,
            mode,
            ..CurveSpec::default()
        };
        let (vocab, stats) = build_curve_vocab(&train, cs)?;
        let held_out = coverage(&vocab, &test);
        println!("{mode:?} curves (L={}, R={})", cs.curve_len, cs.resolution);
        println!("  distinct curves in training audio: {}", stats.distinct_curves);
        println!("  vocabulary size: {}", vocab.vocab_size());
        println!(
            "  window coverage: train {:.2}%, held out {:.2}%",
            100.0 * stats.vocab_coverage,
            100.0 * held_out.vocab_coverage
        );
        println!("  token coverage (held out): {:.2}%", 100.0 * held_out.token_coverage);
        let ids = tokenize(&test[0].samples, &vocab);
        let unk = ids.iter().filter(|&&t| t == UNK).count();
        println!("  first clip: {} tokens, {unk} unknown, head {:?}", ids.len(), &ids[..8]);
    }
    Ok(())
}
