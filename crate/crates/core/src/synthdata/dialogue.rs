use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::scene::SceneRecord;
use super::seeded;
use super::templates::{Category, TemplateSuite, SLOT_AGB, SLOT_CLASS, SLOT_COUNT};

/// One question/answer pair about a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub scene_id: u64,
    pub category: Category,
    pub question: String,
    pub answer: String,
    pub numeric_target: Option<f64>,
}

impl DialogueRecord {
    pub fn validate(&self) -> Result<()> {
        if self.category.has_numeric_target() != self.numeric_target.is_some() {
            return Err(Error::Precondition(format!(
                "scene {}: {} dialogue numeric target presence is wrong",
                self.scene_id,
                self.category.as_str()
            )));
        }
        Ok(())
    }
}

/// AGB rendered with one decimal.
pub fn format_agb(agb: f64) -> String {
    format!("{agb:.1}")
}

fn pick<'a>(rng: &mut impl Rng, list: &'a [String]) -> &'a str {
    list.choose(rng).expect("validated template list")
}

/// One record per category, templates drawn with a seeded generator.
pub fn make_dialogues(scene: &SceneRecord, suite: &TemplateSuite, seed: u64) -> Result<Vec<DialogueRecord>> {
    suite.validate()?;
    let mut rng = seeded(seed);
    let class = scene.land_cover.modal_class_name().to_string();
    let mut out = Vec::with_capacity(4);
    for category in Category::ALL {
        let question = pick(&mut rng, suite.questions(category)).to_string();
        let (answer, numeric_target) = match category {
            Category::Landcover => (pick(&mut rng, &suite.landcover_answers).replace(SLOT_CLASS, &class), None),
            Category::Counting => (
                pick(&mut rng, &suite.counting_answers).replace(SLOT_COUNT, &scene.patch_count.to_string()),
                Some(scene.patch_count as f64),
            ),
            Category::VqaHuman => {
                let list = if scene.human_activity { &suite.vqa_yes_answers } else { &suite.vqa_no_answers };
                (pick(&mut rng, list).to_string(), None)
            }
            Category::Agb => {
                let text = pick(&mut rng, &suite.agb_answers)
                    .replace(SLOT_CLASS, &class)
                    .replace(SLOT_AGB, &format_agb(scene.agb));
                (text, Some(scene.agb))
            }
        };
        out.push(DialogueRecord { scene_id: scene.scene_id, category, question, answer, numeric_target });
    }
    Ok(out)
}
