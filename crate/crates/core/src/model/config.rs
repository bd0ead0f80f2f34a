use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// L x F real feature matrices (mel, MFCC, reshaped amplitudes).
    Continuous,
    /// Sequences of L token ids.
    Tokens,
}

impl InputMode {
    pub fn name(self) -> &'static str {
        match self {
            InputMode::Continuous => "continuous",
            InputMode::Tokens => "tokens",
        }
    }
}

impl std::str::FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(InputMode::Continuous),
            "tokens" => Ok(InputMode::Tokens),
            other => Err(Error::config(format!("unknown input mode `{other}`"))),
        }
    }
}

/// Encoder hyperparameters. The feed-forward width is always `4 * hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_mode: InputMode,
    /// Feature width F (continuous) or vocabulary size (tokens).
    pub input_dim: usize,
    pub seq_len: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub classes: usize,
    pub use_positional: bool,
    pub share_layers: bool,
    pub dropout: f64,
}

impl Default for ModelConfig {
    /// The 6,642-parameter reference model: 5 s of 128-band log-mel input.
    fn default() -> Self {
        ModelConfig {
            input_mode: InputMode::Continuous,
            input_dim: 128,
            seq_len: 430,
            hidden: 16,
            layers: 1,
            heads: 2,
            classes: 6,
            use_positional: false,
            share_layers: false,
            dropout: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn ffn_dim(&self) -> usize {
        4 * self.hidden
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    /// Number of distinct layer parameter blocks.
    pub fn layer_blocks(&self) -> usize {
        if self.share_layers {
            1.min(self.layers)
        } else {
            self.layers
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("seq_len", self.seq_len),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("heads", self.heads),
            ("classes", self.classes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.hidden % self.heads != 0 {
            return Err(Error::config(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        if self.input_mode == InputMode::Continuous && self.use_positional {
            return Err(Error::config(
                "positional embeddings are not used with continuous inputs",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} must be in [0, 1)", self.dropout)));
        }
        Ok(())
    }
}
