//! Generation-based evaluation of a trained model on held-out scenes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{regress, reverse_project, select_tokens, LmRuntime, Model, ParamGroup};
use crate::numerics::{GradFilter, Real, Tape, Tensor};
use crate::synthdata::{Category, SceneRecord};
use crate::training::{agb_context, scene_layers, ContextSource, DialogueIndex};

use super::metrics::{classification_metrics, counting_metrics, regression_metrics};
use super::parse::{parse_class_answer, parse_numeric_answer, parse_yes_no, ParsedAnswer};
use super::report::{AblationRow, Report};
use super::denormalize_agb;

/// One generated answer and its parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scene_id: u64,
    pub category: Category,
    pub question: String,
    pub reference: String,
    pub generated: String,
    pub hit_eos: bool,
    pub parsed: ParsedAnswer,
}

/// Biomass estimate of one scene, in Mg/ha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgbPrediction {
    pub scene_id: u64,
    pub truth: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reports: Vec<Report>,
    pub predictions: Vec<Prediction>,
    pub agb: Vec<AgbPrediction>,
}

impl Evaluation {
    /// `scene_id,truth,predicted` rows.
    pub fn agb_scatter_csv(&self) -> String {
        let mut out = String::from("scene_id,truth,predicted\n");
        for p in &self.agb {
            out.push_str(&format!("{},{},{}\n", p.scene_id, p.truth, p.predicted));
        }
        out
    }
}

/// Encoder outputs cached per scene, shared across tasks and strategies.
pub struct PreparedScenes<'a, F> {
    pub scenes: Vec<&'a SceneRecord>,
    pub layers: Vec<Vec<Tensor<F>>>,
    pub lm_visual: Vec<Tensor<F>>,
}

pub fn prepare_scenes<'a, F: Real>(model: &Model<F>, scenes: &[&'a SceneRecord]) -> Result<PreparedScenes<'a, F>> {
    let mut layers = Vec::with_capacity(scenes.len());
    let mut lm_visual = Vec::with_capacity(scenes.len());
    for s in scenes {
        let l = scene_layers(model, s)?;
        lm_visual.push(select_tokens(&l, model.config.lm_visual_strategy)?);
        layers.push(l);
    }
    Ok(PreparedScenes { scenes: scenes.to_vec(), layers, lm_visual })
}

fn parse_for(category: Category, text: &str, class_names: &[String]) -> ParsedAnswer {
    match category {
        Category::Landcover => parse_class_answer(text, class_names),
        Category::VqaHuman => parse_yes_no(text),
        Category::Counting | Category::Agb => parse_numeric_answer(text),
    }
}

/// Greedy answers to each scene's question of `category`.
pub fn generate_task<F: Real>(
    model: &Model<F>,
    runtime: &LmRuntime<F>,
    prepared: &PreparedScenes<'_, F>,
    dialogues: &DialogueIndex<'_>,
    category: Category,
) -> Result<Vec<Prediction>> {
    let vocab = model.vocab();
    let mut out = Vec::with_capacity(prepared.scenes.len());
    for (scene, visual) in prepared.scenes.iter().zip(&prepared.lm_visual) {
        let d = dialogues.get(scene.scene_id, category)?;
        let (prompt, _) = vocab.dialogue_ids(category, &d.question, None);
        let gen = runtime.generate_greedy(Some(visual), &prompt, crate::training::MAX_ANSWER_TOKENS)?;
        let generated = vocab.decode(&gen.tokens);
        out.push(Prediction {
            scene_id: scene.scene_id,
            category,
            question: d.question.clone(),
            reference: d.answer.clone(),
            parsed: parse_for(category, &generated, &scene.land_cover.class_names),
            generated,
            hit_eos: gen.hit_eos,
        });
    }
    Ok(out)
}

/// Metrics for a set of generated answers of one category.
pub fn score_task(category: Category, prepared: &[&SceneRecord], predictions: &[Prediction]) -> Result<Report> {
    if prepared.len() != predictions.len() {
        return Err(Error::Precondition("one prediction per scene is required".into()));
    }
    let task = category.task_name().to_string();
    Ok(match category {
        Category::Landcover => {
            let pairs: Vec<(String, ParsedAnswer)> = prepared
                .iter()
                .zip(predictions)
                .map(|(s, p)| (s.land_cover.modal_class_name().to_string(), p.parsed.clone()))
                .collect();
            Report::Classification { task, report: classification_metrics(&pairs) }
        }
        Category::VqaHuman => {
            let pairs: Vec<(String, ParsedAnswer)> = prepared
                .iter()
                .zip(predictions)
                .map(|(s, p)| ((if s.human_activity { "yes" } else { "no" }).to_string(), p.parsed.clone()))
                .collect();
            Report::Classification { task, report: classification_metrics(&pairs) }
        }
        Category::Counting => {
            let pairs: Vec<(i64, ParsedAnswer)> =
                prepared.iter().zip(predictions).map(|(s, p)| (s.patch_count as i64, p.parsed.clone())).collect();
            Report::Counting { task, report: counting_metrics(&pairs) }
        }
        Category::Agb => return Err(Error::Precondition("biomass is scored through the regression head".into())),
    })
}

/// Response states of the model's own biomass answers, one per scene.
pub fn agb_contexts<F: Real>(
    model: &Model<F>,
    runtime: &LmRuntime<F>,
    prepared: &PreparedScenes<'_, F>,
    dialogues: &DialogueIndex<'_>,
) -> Result<Vec<Tensor<F>>> {
    prepared
        .scenes
        .iter()
        .zip(&prepared.lm_visual)
        .map(|(s, v)| agb_context(runtime, model, v, dialogues.get(s.scene_id, Category::Agb)?, ContextSource::Generated))
        .collect()
}

/// Regression-head estimates using the model's configured visual strategy.
pub fn predict_agb<F: Real>(
    model: &Model<F>,
    prepared: &PreparedScenes<'_, F>,
    contexts: &[Tensor<F>],
) -> Result<Vec<AgbPrediction>> {
    let mut out = Vec::with_capacity(contexts.len());
    for ((scene, layers), ctx) in prepared.scenes.iter().zip(&prepared.layers).zip(contexts) {
        let mut tape = Tape::new(GradFilter::None);
        let v = tape.constant(select_tokens(layers, model.config.reg_visual_strategy)?);
        let h = tape.constant(ctx.clone());
        let projected = reverse_project(&mut tape, &model.params, h)?;
        let y = regress(&mut tape, &model.params, &model.config, v, projected)?;
        let predicted = denormalize_agb(tape.value(y).item().to_f64c());
        if !predicted.is_finite() {
            return Err(Error::NonFinite(format!("biomass estimate for scene {}", scene.scene_id)));
        }
        out.push(AgbPrediction { scene_id: scene.scene_id, truth: scene.agb, predicted });
    }
    Ok(out)
}

pub fn agb_report(predictions: &[AgbPrediction]) -> Report {
    let pairs: Vec<(f64, f64)> = predictions.iter().map(|p| (p.truth, p.predicted)).collect();
    Report::Regression { task: Category::Agb.task_name().to_string(), report: regression_metrics(&pairs) }
}

/// Runs every requested task over `scenes`.
pub fn evaluate<F: Real>(
    model: &Model<F>,
    scenes: &[&SceneRecord],
    dialogues: &DialogueIndex<'_>,
    tasks: &[Category],
) -> Result<Evaluation> {
    let runtime = LmRuntime::new(model)?;
    let prepared = prepare_scenes(model, scenes)?;
    let mut eval = Evaluation::default();
    for &category in tasks {
        if category == Category::Agb {
            let contexts = agb_contexts(model, &runtime, &prepared, dialogues)?;
            eval.agb = predict_agb(model, &prepared, &contexts)?;
            eval.reports.push(agb_report(&eval.agb));
        } else {
            let preds = generate_task(model, &runtime, &prepared, dialogues, category)?;
            eval.reports.push(score_task(category, &prepared.scenes, &preds)?);
            log::info!("evaluated {} on {} scenes", category.task_name(), preds.len());
            eval.predictions.extend(preds);
        }
    }
    Ok(eval)
}

/// Compares regression heads that share one stage-1 language model. The
/// biomass answers are generated once and reused by every head.
pub fn ablate_tokens<F: Real>(
    heads: &[Model<F>],
    scenes: &[&SceneRecord],
    dialogues: &DialogueIndex<'_>,
) -> Result<(Report, Vec<Vec<AgbPrediction>>)> {
    let first = heads.first().ok_or_else(|| Error::Precondition("no regression heads to compare".into()))?;
    for h in &heads[1..] {
        let shared = first.params.iter().filter(|p| {
            !matches!(ParamGroup::of(&p.name), ParamGroup::RegressionHead | ParamGroup::ReverseProjection)
        });
        for p in shared {
            if h.params.get(&p.name).map(|q| &q.tensor) != Some(&p.tensor) {
                return Err(Error::Precondition(format!("heads disagree on shared parameter {}", p.name)));
            }
        }
    }
    let runtime = LmRuntime::new(first)?;
    let prepared = prepare_scenes(first, scenes)?;
    let contexts = agb_contexts(first, &runtime, &prepared, dialogues)?;
    let mut scored = Vec::with_capacity(heads.len());
    for h in heads {
        let preds = predict_agb(h, &prepared, &contexts)?;
        let pairs: Vec<(f64, f64)> = preds.iter().map(|p| (p.truth, p.predicted)).collect();
        let row = AblationRow { strategy: h.config.reg_visual_strategy, report: regression_metrics(&pairs) };
        scored.push((row, preds));
    }
    scored.sort_by_key(|(r, _)| r.strategy);
    let (rows, all) = scored.into_iter().unzip();
    Ok((Report::Ablation { rows }, all))
}
