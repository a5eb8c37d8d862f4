//! Two-stage training: adapters and generation head first, then the
//! regression branch on top of a frozen language model.

pub mod config;
mod stage1;
mod stage2;

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasetio::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::error::{Error, Result};
use crate::modality::scene_views;
use crate::model::{encode_views, Model, ModelConfig, ParamGroup};
use crate::numerics::{ParamSet, Real, Tensor};
use crate::synthdata::{Category, DialogueRecord, SceneRecord};

pub use config::{ContextSource, LossKind, StageConfig};
pub use stage1::{stage1_targets, train_stage1};
pub use stage2::{agb_context, train_stage2, MAX_ANSWER_TOKENS};

/// Which parameter groups a stage updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreezePolicy {
    pub stage: u8,
}

impl FreezePolicy {
    pub fn trains(self, group: ParamGroup) -> bool {
        match self.stage {
            1 => matches!(group, ParamGroup::Adapter | ParamGroup::GenerationHead),
            2 => matches!(group, ParamGroup::RegressionHead | ParamGroup::ReverseProjection),
            _ => false,
        }
    }

    pub fn apply<F: Real>(self, params: &mut ParamSet<F>) {
        params.set_trainable(|name| self.trains(ParamGroup::of(name)));
    }
}

/// CRC-32 over the names and values of every frozen parameter.
pub fn frozen_digest<F: Real>(params: &ParamSet<F>) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for p in params.iter().filter(|p| !p.trainable) {
        h.update(p.name.as_bytes());
        for v in p.tensor.values() {
            h.update(&v.to_f64c().to_le_bytes());
        }
    }
    h.finalize()
}

/// Uniform choice over the four task categories.
pub fn sample_category<R: Rng>(rng: &mut R) -> Category {
    Category::ALL[rng.gen_range(0..Category::ALL.len())]
}

/// One dialogue per draw, its category chosen uniformly.
pub fn sample_dialogue<'a, R: Rng>(
    rng: &mut R,
    index: &DialogueIndex<'a>,
    scene_id: u64,
) -> Result<&'a DialogueRecord> {
    index.get(scene_id, sample_category(rng))
}

/// Lookup of dialogues by scene and category.
#[derive(Debug, Clone, Default)]
pub struct DialogueIndex<'a> {
    map: HashMap<(u64, Category), &'a DialogueRecord>,
}

impl<'a> DialogueIndex<'a> {
    pub fn new(dialogues: &'a [DialogueRecord]) -> Self {
        DialogueIndex { map: dialogues.iter().map(|d| ((d.scene_id, d.category), d)).collect() }
    }

    pub fn get(&self, scene_id: u64, category: Category) -> Result<&'a DialogueRecord> {
        self.map
            .get(&(scene_id, category))
            .copied()
            .ok_or_else(|| Error::Precondition(format!("scene {scene_id} has no {} dialogue", category.as_str())))
    }
}

/// Encoder outputs of every layer for one scene.
pub fn scene_layers<F: Real>(model: &Model<F>, scene: &SceneRecord) -> Result<Vec<Tensor<F>>> {
    encode_views(model, &scene_views(&scene.ms, &scene.sar))
}

/// Loss after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub steps: usize,
    pub mean_loss: f64,
}

/// Loss history of a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Mean batch loss of each optimizer step.
    pub step_losses: Vec<f64>,
}

impl TrainReport {
    /// `step,epoch,loss` rows, one per optimizer step.
    pub fn loss_curve_csv(&self) -> String {
        let mut out = String::from("step,epoch,loss\n");
        let mut step = 0;
        for e in &self.epochs {
            for _ in 0..e.steps {
                out.push_str(&format!("{},{},{}\n", step + 1, e.epoch, self.step_losses[step]));
                step += 1;
            }
        }
        out
    }
}

pub(crate) fn check_finite(loss: f64, epoch: usize, step: usize, scene_ids: &[u64]) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("loss {loss} at epoch {epoch}, step {step}, batch scenes {scene_ids:?}")))
    }
}

/// Training scenes to use under `cfg`.
pub(crate) fn training_subset<'a>(scenes: &'a [&'a SceneRecord], cfg: &StageConfig) -> &'a [&'a SceneRecord] {
    if cfg.train_scenes == 0 {
        scenes
    } else {
        &scenes[..cfg.train_scenes.min(scenes.len())]
    }
}

pub fn to_checkpoint<F: Real>(model: &Model<F>, stage: u8) -> Result<Checkpoint<F>> {
    Ok(Checkpoint {
        stage,
        model_config: serde_json::to_value(&model.config).map_err(|e| Error::json("model config", e))?,
        params: model.params.clone(),
    })
}

/// Rebuilds a model, checking the stored parameters against the layout
/// the recorded configuration implies.
pub fn from_checkpoint<F: Real>(ckpt: Checkpoint<F>) -> Result<Model<F>> {
    let config: ModelConfig =
        serde_json::from_value(ckpt.model_config).map_err(|e| Error::json("model config", e))?;
    let reference = Model::<F>::init(config.clone())?;
    for p in reference.params.iter() {
        let stored = ckpt
            .params
            .get(&p.name)
            .ok_or_else(|| Error::Config(format!("checkpoint is missing parameter {}", p.name)))?;
        if stored.tensor.dims() != p.tensor.dims() {
            return Err(Error::Dimension(format!(
                "parameter {} has shape {:?}, configuration expects {:?}",
                p.name,
                stored.tensor.dims(),
                p.tensor.dims()
            )));
        }
    }
    if ckpt.params.len() != reference.params.len() {
        let extra: Vec<&str> = ckpt.params.names().filter(|n| reference.params.get(n).is_none()).collect();
        return Err(Error::Config(format!("checkpoint has unexpected parameters {extra:?}")));
    }
    Ok(Model { config, params: ckpt.params })
}

pub fn save_model<F: Real>(model: &Model<F>, stage: u8, dir: &Path) -> Result<()> {
    save_checkpoint(&to_checkpoint(model, stage)?, dir)
}

/// Loads a model and the stage that wrote it.
pub fn load_model<F: Real>(dir: &Path) -> Result<(Model<F>, u8)> {
    let ckpt = load_checkpoint::<F>(dir)?;
    let stage = ckpt.stage;
    Ok((from_checkpoint(ckpt)?, stage))
}
