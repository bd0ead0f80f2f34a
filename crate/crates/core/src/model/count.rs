use super::config::{InputMode, ModelConfig};

/// How multiply-adds are tallied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultAddConvention {
    /// Every weight tensor (biases excluded) counted once per use, as a
    /// per-module profiler reports it: linear layers contribute `out * in`,
    /// norms their scale vector, embedding tables their full size.
    PerPosition,
    /// True multiply-accumulates of one forward pass over all L positions,
    /// including attention scores and value mixing.
    Total,
}

impl std::str::FromStr for MultAddConvention {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "per_position" | "per-position" => Ok(MultAddConvention::PerPosition),
            "total" => Ok(MultAddConvention::Total),
            other => Err(crate::Error::config(format!("unknown mult-add convention `{other}`"))),
        }
    }
}

fn layer_block_params(h: u64) -> u64 {
    4 * (h * h + h) + 2 * h + (4 * h * h + 4 * h) + (4 * h * h + h) + 2 * h
}

/// Learnable scalar count in closed form.
pub fn count_params(cfg: &ModelConfig) -> u64 {
    let (l, f, h, c) = (
        cfg.seq_len as u64,
        cfg.input_dim as u64,
        cfg.hidden as u64,
        cfg.classes as u64,
    );
    let input = match cfg.input_mode {
        InputMode::Continuous => 2 * l + f * h + h,
        InputMode::Tokens => f * h + if cfg.use_positional { l * h } else { 0 },
    };
    input + 2 * h + 2 * h + cfg.layer_blocks() as u64 * layer_block_params(h) + (h * h + h) + (h * c + c)
}

/// Per-stage multiply-add tally of one forward pass for a single clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MultAddBreakdown {
    pub input: u64,
    pub embed_norm: u64,
    pub attention_proj: u64,
    pub attention_mix: u64,
    pub layer_norms: u64,
    pub ffn: u64,
    pub pooler: u64,
    pub classifier: u64,
}

impl MultAddBreakdown {
    pub fn sum(&self) -> u64 {
        self.input
            + self.embed_norm
            + self.attention_proj
            + self.attention_mix
            + self.layer_norms
            + self.ffn
            + self.pooler
            + self.classifier
    }
}

pub fn mult_add_breakdown(cfg: &ModelConfig, convention: MultAddConvention) -> MultAddBreakdown {
    let (l, f, h, c) = (
        cfg.seq_len as u64,
        cfg.input_dim as u64,
        cfg.hidden as u64,
        cfg.classes as u64,
    );
    let n = cfg.layers as u64;
    match convention {
        MultAddConvention::PerPosition => MultAddBreakdown {
            input: match cfg.input_mode {
                InputMode::Continuous => l + f * h,
                InputMode::Tokens => f * h + if cfg.use_positional { l * h } else { 0 },
            } + 2 * h,
            embed_norm: h,
            attention_proj: n * 4 * h * h,
            attention_mix: 0,
            layer_norms: n * 2 * h,
            ffn: n * 8 * h * h,
            pooler: h * h,
            classifier: h * c,
        },
        MultAddConvention::Total => MultAddBreakdown {
            input: match cfg.input_mode {
                // batch-norm affine plus the mapping matmul
                InputMode::Continuous => l * f + l * f * h,
                InputMode::Tokens => 0,
            },
            embed_norm: l * h,
            attention_proj: n * 4 * l * h * h,
            attention_mix: n * 2 * l * l * h,
            layer_norms: n * 2 * l * h,
            ffn: n * 8 * l * h * h,
            pooler: h * h,
            classifier: h * c,
        },
    }
}

pub fn count_mult_adds(cfg: &ModelConfig, convention: MultAddConvention) -> u64 {
    mult_add_breakdown(cfg, convention).sum()
}
