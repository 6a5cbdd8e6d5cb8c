use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::VOCAB_SIZE;

/// Transformer dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_embd: usize,
    pub n_layer: usize,
    pub n_heads: usize,
    pub hidden_dim: usize,
    pub vocab_size: usize,
    pub context_len: usize,
    #[serde(default)]
    pub dropout: f64,
}

pub const PRESET_NAMES: [&str; 3] = ["full-student", "full-teacher", "desk-tiny"];

impl ModelConfig {
    /// 512 / 6 layers / 8 heads / 2048 hidden.
    pub fn full_student() -> Self {
        Self {
            n_embd: 512,
            n_layer: 6,
            n_heads: 8,
            hidden_dim: 2048,
            vocab_size: VOCAB_SIZE,
            context_len: 512,
            dropout: 0.1,
        }
    }

    /// 1280 / 36 layers / 20 heads / 5120 hidden.
    pub fn full_teacher() -> Self {
        Self {
            n_embd: 1280,
            n_layer: 36,
            n_heads: 20,
            hidden_dim: 5120,
            vocab_size: VOCAB_SIZE,
            context_len: 512,
            dropout: 0.1,
        }
    }

    pub fn desk_tiny() -> Self {
        Self {
            n_embd: 16,
            n_layer: 2,
            n_heads: 2,
            hidden_dim: 64,
            vocab_size: VOCAB_SIZE,
            context_len: 64,
            dropout: 0.0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full-student" => Ok(Self::full_student()),
            "full-teacher" => Ok(Self::full_teacher()),
            "desk-tiny" => Ok(Self::desk_tiny()),
            other => Err(Error::Config(format!(
                "unknown model preset '{other}' (expected one of {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    pub fn with_vocab(mut self, vocab_size: usize) -> Self {
        self.vocab_size = vocab_size;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.n_embd / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_embd", self.n_embd),
            ("n_layer", self.n_layer),
            ("n_heads", self.n_heads),
            ("hidden_dim", self.hidden_dim),
            ("vocab_size", self.vocab_size),
            ("context_len", self.context_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.n_embd % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "n_embd {} is not divisible by n_heads {}",
                self.n_embd, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Closed-form parameter count for the tied-head, biased, pre-norm layout.
pub fn count_params(c: &ModelConfig) -> usize {
    let (d, h) = (c.n_embd, c.hidden_dim);
    let attention = 4 * d * d + 4 * d;
    let mlp = 2 * d * h + h + d;
    let norms = 4 * d;
    c.vocab_size * d + c.context_len * d + c.n_layer * (attention + mlp + norms) + 2 * d
}
