use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{regression_branch, select_tokens, LmRuntime, Model};
use crate::numerics::{Adam, AdamConfig, GradFilter, NamedGrads, Real, Tape, Tensor};
use crate::synthdata::{Category, DialogueRecord, SceneRecord, AGB_MAX};

use super::config::{ContextSource, StageConfig};
use super::stage1::check_params_finite;
use super::{check_finite, scene_layers, training_subset, DialogueIndex, EpochStats, FreezePolicy, TrainReport};

/// Upper bound on generated answer length.
pub const MAX_ANSWER_TOKENS: usize = 48;

/// Response hidden states `[n × lm_dim]` for the biomass question of a
/// scene, either teacher-forced on the reference answer or generated.
pub fn agb_context<F: Real>(
    runtime: &LmRuntime<F>,
    model: &Model<F>,
    lm_visual: &Tensor<F>,
    dialogue: &DialogueRecord,
    source: ContextSource,
) -> Result<Tensor<F>> {
    let vocab = model.vocab();
    let hidden = match source {
        ContextSource::Teacher => {
            let (ids, start) = vocab.dialogue_ids(Category::Agb, &dialogue.question, Some(&dialogue.answer));
            runtime.teacher_forced_hidden(Some(lm_visual), &ids, start)?
        }
        ContextSource::Generated => {
            let (prompt, _) = vocab.dialogue_ids(Category::Agb, &dialogue.question, None);
            runtime.generate_greedy(Some(lm_visual), &prompt, MAX_ANSWER_TOKENS)?.response_hidden
        }
    };
    let d = model.config.lm_dim;
    Tensor::matrix(hidden.len() / d, d, hidden)
}

struct Sample<F> {
    scene_id: u64,
    visual: Tensor<F>,
    context: Tensor<F>,
    target: F,
}

fn sample_loss<F: Real>(model: &Model<F>, s: &Sample<F>) -> Result<(f64, NamedGrads<F>)> {
    let mut tape = Tape::new(GradFilter::Trainable);
    let v = tape.constant(s.visual.clone());
    let h = tape.constant(s.context.clone());
    let pred = regression_branch(&mut tape, &model.params, &model.config, v, h)?;
    let loss = tape.mse(pred, &[s.target])?;
    let value = tape.value(loss).item().to_f64c();
    Ok((value, tape.backward(loss)?.into_named()))
}

/// Zeroes the reverse projection and removes it from training.
pub(crate) fn ablate_reverse_projection<F: Real>(model: &mut Model<F>) {
    for name in ["rproj.w", "rproj.b"] {
        if let Some(p) = model.params.get_mut(name) {
            p.tensor.values_mut().iter_mut().for_each(|v| *v = F::zero());
            p.trainable = false;
        }
    }
}

/// Trains the reverse projection and regression head with MSE against
/// biomass scaled to `[0, 1]`. The language model and encoder stay frozen,
/// so visual tokens and response states are computed once up front.
pub fn train_stage2<F: Real>(
    model: &mut Model<F>,
    scenes: &[&SceneRecord],
    dialogues: &DialogueIndex<'_>,
    cfg: &StageConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.stage != 2 {
        return Err(Error::Config(format!("train_stage2 called with stage {}", cfg.stage)));
    }
    let scenes = training_subset(scenes, cfg);
    if scenes.is_empty() {
        return Err(Error::Precondition("no training scenes".into()));
    }
    FreezePolicy { stage: 2 }.apply(&mut model.params);
    model.config.reg_visual_strategy = cfg.token_strategy;
    if cfg.ablate_reverse_projection {
        ablate_reverse_projection(model);
    }
    let runtime = LmRuntime::new(model)?;
    let mut samples = Vec::with_capacity(scenes.len());
    for s in scenes {
        let layers = scene_layers(model, s)?;
        let lm_visual = select_tokens(&layers, model.config.lm_visual_strategy)?;
        let d = dialogues.get(s.scene_id, Category::Agb)?;
        samples.push(Sample {
            scene_id: s.scene_id,
            visual: select_tokens(&layers, cfg.token_strategy)?,
            context: agb_context(&runtime, model, &lm_visual, d, cfg.context)?,
            target: F::from_f64c(s.agb / AGB_MAX),
        });
    }

    let mut opt = Adam::new(AdamConfig { lr: cfg.learning_rate, ..AdamConfig::default() })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut report = TrainReport::default();
    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for batch in order.chunks(cfg.batch_size) {
            let step = report.step_losses.len() + 1;
            let ids: Vec<u64> = batch.iter().map(|&i| samples[i].scene_id).collect();
            let mut grads = NamedGrads::default();
            let mut total = 0.0;
            for &i in batch {
                let (loss, g) = sample_loss(model, &samples[i])?;
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
                break 'epochs;
            }
        }
        let stats = EpochStats { epoch, steps, mean_loss: epoch_loss / steps as f64 };
        log::info!("stage 2 epoch {epoch}: loss {:.5}", stats.mean_loss);
        report.epochs.push(stats);
    }
    check_params_finite(model)?;
    Ok(report)
}
