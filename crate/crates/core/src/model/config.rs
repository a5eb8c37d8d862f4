use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::PATCH_SIZE;

use super::strategy::TokenStrategy;
use super::vocab::Vocab;

/// Every architectural size of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub patch_size: usize,
    pub enc_dim: usize,
    pub enc_layers: usize,
    pub enc_heads: usize,
    pub enc_mlp: usize,
    pub views: usize,
    pub lm_dim: usize,
    pub lm_layers: usize,
    pub lm_heads: usize,
    pub lm_mlp: usize,
    pub max_seq_len: usize,
    pub lora_rank: usize,
    pub lora_alpha: f64,
    pub reg_layers: usize,
    pub reg_visual_tokens: usize,
    pub reg_hidden_tokens: usize,
    /// Strategy feeding visual tokens to the language model.
    pub lm_visual_strategy: TokenStrategy,
    /// Strategy feeding visual tokens to the regression head.
    pub reg_visual_strategy: TokenStrategy,
    pub init_seed: u64,
    pub vocab: Vocab,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            patch_size: 5,
            enc_dim: 32,
            enc_layers: 4,
            enc_heads: 4,
            enc_mlp: 128,
            views: 6,
            lm_dim: 64,
            lm_layers: 2,
            lm_heads: 4,
            lm_mlp: 256,
            max_seq_len: 512,
            lora_rank: 4,
            lora_alpha: 8.0,
            reg_layers: 4,
            reg_visual_tokens: 48,
            reg_hidden_tokens: 16,
            lm_visual_strategy: TokenStrategy::HalfLayers,
            reg_visual_strategy: TokenStrategy::HalfLayers,
            init_seed: 7,
            vocab: Vocab::build_default(),
        }
    }
}

impl ModelConfig {
    pub fn tokens_per_view(&self) -> usize {
        let side = PATCH_SIZE / self.patch_size;
        side * side
    }

    pub fn patch_dim(&self) -> usize {
        3 * self.patch_size * self.patch_size
    }

    pub fn reg_tokens(&self) -> usize {
        self.reg_visual_tokens + self.reg_hidden_tokens
    }

    pub fn lora_scale(&self) -> f64 {
        self.lora_alpha / self.lora_rank as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.patch_size == 0 || PATCH_SIZE % self.patch_size != 0 {
            return bad(format!("patch size {} does not divide {PATCH_SIZE}", self.patch_size));
        }
        if self.enc_layers < 2 || self.enc_layers % 2 != 0 {
            return bad(format!("encoder depth must be even and at least 2, got {}", self.enc_layers));
        }
        if self.enc_heads == 0 || self.enc_dim % self.enc_heads != 0 {
            return bad("encoder width must divide into heads".into());
        }
        if self.lm_heads == 0 || self.lm_dim % self.lm_heads != 0 {
            return bad("language model width must divide into heads".into());
        }
        if !(1..=6).contains(&self.views) {
            return bad(format!("view count must be in [1, 6], got {}", self.views));
        }
        if self.lora_rank == 0 || self.reg_layers == 0 || self.reg_visual_tokens == 0 || self.reg_hidden_tokens == 0 {
            return bad("adapter rank, mixer depth and regression token counts must be positive".into());
        }
        let prefix = 2 + self.views * self.tokens_per_view() * self.lm_visual_strategy.layers(self.enc_layers)?.len();
        if prefix >= self.max_seq_len {
            return bad(format!("visual prefix of {prefix} tokens leaves no room within {}", self.max_seq_len));
        }
        self.reg_visual_strategy.layers(self.enc_layers)?;
        Ok(())
    }
}
