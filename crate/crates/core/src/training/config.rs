use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TokenStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Mse,
}

/// Where stage-2 response hidden states come from during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSource {
    /// Ground-truth answer text forced through the language model.
    Teacher,
    /// The model's own greedy answer, as at inference.
    Generated,
}

/// Hyper-parameters of one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: u8,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub token_strategy: TokenStrategy,
    pub loss: LossKind,
    /// Stop after this many optimizer steps; 0 means no limit.
    pub max_steps: usize,
    /// Use only the first this-many training scenes; 0 means all.
    pub train_scenes: usize,
    /// Stage 2: train with the reverse projection zeroed and frozen.
    pub ablate_reverse_projection: bool,
    pub context: ContextSource,
}

impl StageConfig {
    pub fn defaults(stage: u8) -> Result<Self> {
        let (learning_rate, loss) = match stage {
            1 => (3e-3, LossKind::CrossEntropy),
            2 => (1e-3, LossKind::Mse),
            other => return Err(Error::Config(format!("stage must be 1 or 2, got {other}"))),
        };
        Ok(StageConfig {
            stage,
            learning_rate,
            epochs: 10,
            batch_size: 16,
            seed: 42,
            token_strategy: TokenStrategy::HalfLayers,
            loss,
            max_steps: 0,
            train_scenes: 0,
            ablate_reverse_projection: false,
            context: ContextSource::Teacher,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let expected = if self.stage == 1 { LossKind::CrossEntropy } else { LossKind::Mse };
        if !(1..=2).contains(&self.stage) {
            return Err(Error::Config(format!("stage must be 1 or 2, got {}", self.stage)));
        }
        if self.loss != expected {
            return Err(Error::Config(format!("stage {} trains with {expected:?} loss", self.stage)));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if self.stage == 1 && self.ablate_reverse_projection {
            return Err(Error::Config("reverse-projection ablation applies to stage 2 only".into()));
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped; unknown keys are rejected.
    pub fn apply_text(mut self, text: &str) -> Result<Self> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
        }
        match key {
            "stage" => self.stage = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "token_strategy" => self.token_strategy = value.parse()?,
            "loss" => {
                self.loss = match value {
                    "cross_entropy" => LossKind::CrossEntropy,
                    "mse" => LossKind::Mse,
                    other => return Err(Error::Config(format!("unknown loss {other:?}"))),
                }
            }
            "max_steps" => self.max_steps = num(key, value)?,
            "train_scenes" => self.train_scenes = num(key, value)?,
            "ablate_reverse_projection" => self.ablate_reverse_projection = num(key, value)?,
            "context" => {
                self.context = match value {
                    "teacher" => ContextSource::Teacher,
                    "generated" => ContextSource::Generated,
                    other => return Err(Error::Config(format!("unknown context source {other:?}"))),
                }
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// The resolved configuration in the file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let loss = match self.loss {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Mse => "mse",
        };
        let context = match self.context {
            ContextSource::Teacher => "teacher",
            ContextSource::Generated => "generated",
        };
        let _ = writeln!(s, "stage = {}", self.stage);
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "token_strategy = {}", self.token_strategy);
        let _ = writeln!(s, "loss = {loss}");
        let _ = writeln!(s, "max_steps = {}", self.max_steps);
        let _ = writeln!(s, "train_scenes = {}", self.train_scenes);
        let _ = writeln!(s, "ablate_reverse_projection = {}", self.ablate_reverse_projection);
        let _ = writeln!(s, "context = {context}");
        s
    }
}
