//! Parameter and multiply-add accounting for a range of architectures, and
//! which of them fit a 256 KB int8 budget.
//!
//!     cargo run --release --example param_budget

use tinyesc::model::{count_mult_adds, count_params, mult_add_breakdown, ModelConfig, MultAddConvention};

const BUDGET_BYTES: u64 = 256 * 1024;

fn main() {
    let rows = [
        ("1 s, H16, 1 layer", ModelConfig { seq_len: 86, ..ModelConfig::default() }),
        ("5 s, H16, 1 layer", ModelConfig::default()),
        (
            "5 s, H64, 4 layers",
            ModelConfig { hidden: 64, layers: 4, heads: 4, ..ModelConfig::default() },
        ),
        (
            "5 s, H512, 8 layers",
            ModelConfig { hidden: 512, layers: 8, heads: 8, ..ModelConfig::default() },
        ),
        (
            "5 s, H64, 4 shared",
            ModelConfig { hidden: 64, layers: 4, heads: 4, share_layers: true, ..ModelConfig::default() },
        ),
    ];
    println!(
        "{:<22} {:>12} {:>14} {:>16} {:>8}",
        "model", "params", "mult-adds/pos", "mult-adds total", "int8 fit"
    );
    for (name, cfg) in &rows {
        let params = count_params(cfg);
        println!(
            "{name:<22} {params:>12} {:>14} {:>16} {:>8}",
            count_mult_adds(cfg, MultAddConvention::PerPosition),
            count_mult_adds(cfg, MultAddConvention::Total),
            if params <= BUDGET_BYTES { "yes" } else { "no" }
        );
    }

    let b = mult_add_breakdown(&ModelConfig::default(), MultAddConvention::Total);
    println!("\nwhere the 5 s tiny model spends its multiply-adds:");
    for (part, n) in [
        ("input (batch norm + mapping)", b.input),
        ("embedding norm", b.embed_norm),
        ("attention projections", b.attention_proj),
        ("attention scores and mixing", b.attention_mix),
        ("layer norms", b.layer_norms),
        ("feed-forward", b.ffn),
        ("pooler", b.pooler),
        ("classifier", b.classifier),
    ] {
        println!("  {part:<30} {n:>10}");
    }

    // Widest single-layer model that still fits the budget at 5 s.
    let widest = (1..=64)
        .map(|k| 8 * k)
        .filter(|&h| count_params(&ModelConfig { hidden: h, heads: 2, ..ModelConfig::default() }) <= BUDGET_BYTES)
        .max()
        .unwrap_or(0);
    println!("\nwidest one-layer model under 256 KB: H = {widest}");
}
