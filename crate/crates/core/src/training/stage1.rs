use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{lm_forward, select_tokens, Model};
use crate::numerics::{Adam, AdamConfig, GradFilter, NamedGrads, Real, Tape, Tensor, IGNORE_INDEX};
use crate::synthdata::{DialogueRecord, SceneRecord};

use super::config::StageConfig;
use super::{check_finite, sample_dialogue, scene_layers, training_subset, DialogueIndex, EpochStats, FreezePolicy, TrainReport};

/// Next-token targets over text positions: answer tokens and `<eos>` are
/// supervised, the task tag and question are ignored.
pub fn stage1_targets(ids: &[u32], answer_start: usize) -> Vec<i64> {
    (0..ids.len())
        .map(|i| if i + 1 >= answer_start && i + 1 < ids.len() { ids[i + 1] as i64 } else { IGNORE_INDEX })
        .collect()
}

fn sample_loss<F: Real>(model: &Model<F>, visual: &Tensor<F>, d: &DialogueRecord) -> Result<(f64, NamedGrads<F>)> {
    let (ids, start) = model.vocab().dialogue_ids(d.category, &d.question, Some(&d.answer));
    let targets = stage1_targets(&ids, start);
    let mut tape = Tape::new(GradFilter::Trainable);
    let v = tape.constant(visual.clone());
    let out = lm_forward(&mut tape, &model.params, &model.config, Some(v), &ids)?;
    let loss = tape.softmax_cross_entropy(out.logits, &targets)?;
    let value = tape.value(loss).item().to_f64c();
    Ok((value, tape.backward(loss)?.into_named()))
}

/// Fine-tunes the adapters and the generation head with cross-entropy on
/// answer tokens. Each scene contributes one dialogue per epoch, its task
/// drawn uniformly.
pub fn train_stage1<F: Real>(
    model: &mut Model<F>,
    scenes: &[&SceneRecord],
    dialogues: &DialogueIndex<'_>,
    cfg: &StageConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.stage != 1 {
        return Err(Error::Config(format!("train_stage1 called with stage {}", cfg.stage)));
    }
    let scenes = training_subset(scenes, cfg);
    if scenes.is_empty() {
        return Err(Error::Precondition("no training scenes".into()));
    }
    FreezePolicy { stage: 1 }.apply(&mut model.params);
    let strategy = model.config.lm_visual_strategy;
    let visual: Vec<Tensor<F>> = scenes
        .iter()
        .map(|s| select_tokens(&scene_layers(model, s)?, strategy))
        .collect::<Result<_>>()?;

    let mut opt = Adam::new(AdamConfig { lr: cfg.learning_rate, ..AdamConfig::default() })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    let mut report = TrainReport::default();
    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for batch in order.chunks(cfg.batch_size) {
            let step = report.step_losses.len() + 1;
            let ids: Vec<u64> = batch.iter().map(|&i| scenes[i].scene_id).collect();
            let mut grads = NamedGrads::default();
            let mut total = 0.0;
            for &i in batch {
                let d = sample_dialogue(&mut rng, dialogues, scenes[i].scene_id)?;
                let (loss, g) = sample_loss(model, &visual[i], d)?;
                check_finite(loss, epoch, step, &ids)?;
                total += loss;
                grads.accumulate(g);
            }
            grads.scale(F::from_f64c(1.0 / batch.len() as f64));
            opt.step(&mut model.params, &grads);
            let mean = total / batch.len() as f64;
            report.step_losses.push(mean);
            epoch_loss += mean;
            steps += 1;
            if cfg.max_steps > 0 && report.step_losses.len() >= cfg.max_steps {
                report.epochs.push(EpochStats { epoch, steps, mean_loss: epoch_loss / steps as f64 });
                log::info!("stage 1 epoch {epoch}: loss {:.4} (step limit reached)", epoch_loss / steps as f64);
                break 'epochs;
            }
        }
        let stats = EpochStats { epoch, steps, mean_loss: epoch_loss / steps as f64 };
        log::info!("stage 1 epoch {epoch}: loss {:.4}", stats.mean_loss);
        report.epochs.push(stats);
    }
    check_params_finite(model)?;
    Ok(report)
}

pub(crate) fn check_params_finite<F: Real>(model: &Model<F>) -> Result<()> {
    match model.params.iter().find(|p| !p.tensor.all_finite()) {
        Some(p) => Err(Error::NonFinite(format!("parameter {} became non-finite", p.name))),
        None => Ok(()),
    }
}
