use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dialogue categories, one record per category per scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Landcover,
    Counting,
    VqaHuman,
    Agb,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Landcover, Category::Counting, Category::VqaHuman, Category::Agb];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Landcover => "landcover",
            Category::Counting => "counting",
            Category::VqaHuman => "vqa_human",
            Category::Agb => "agb",
        }
    }

    /// Task name used by the CLI and the prompt tag.
    pub fn task_name(self) -> &'static str {
        match self {
            Category::VqaHuman => "vqa",
            other => other.as_str(),
        }
    }

    pub fn from_task_name(name: &str) -> Option<Category> {
        match name {
            "landcover" => Some(Category::Landcover),
            "counting" => Some(Category::Counting),
            "vqa" | "vqa_human" => Some(Category::VqaHuman),
            "agb" => Some(Category::Agb),
            _ => None,
        }
    }

    pub fn has_numeric_target(self) -> bool {
        matches!(self, Category::Counting | Category::Agb)
    }
}

pub const SLOT_CLASS: &str = "{class}";
pub const SLOT_COUNT: &str = "{count}";
pub const SLOT_AGB: &str = "{agb}";

/// Question and answer templates for every category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSuite {
    pub landcover_questions: Vec<String>,
    pub landcover_answers: Vec<String>,
    pub counting_questions: Vec<String>,
    pub counting_answers: Vec<String>,
    pub vqa_questions: Vec<String>,
    pub vqa_yes_answers: Vec<String>,
    pub vqa_no_answers: Vec<String>,
    pub agb_questions: Vec<String>,
    pub agb_answers: Vec<String>,
}

pub const MIN_TEMPLATES_PER_KIND: usize = 25;

impl TemplateSuite {
    pub fn questions(&self, category: Category) -> &[String] {
        match category {
            Category::Landcover => &self.landcover_questions,
            Category::Counting => &self.counting_questions,
            Category::VqaHuman => &self.vqa_questions,
            Category::Agb => &self.agb_questions,
        }
    }

    pub fn answer_count(&self, category: Category) -> usize {
        match category {
            Category::Landcover => self.landcover_answers.len(),
            Category::Counting => self.counting_answers.len(),
            Category::VqaHuman => self.vqa_yes_answers.len() + self.vqa_no_answers.len(),
            Category::Agb => self.agb_answers.len(),
        }
    }

    pub fn total(&self) -> usize {
        Category::ALL
            .iter()
            .map(|&c| self.questions(c).len() + self.answer_count(c))
            .sum()
    }

    /// Every template that may appear in a rendered dialogue.
    pub fn all_templates(&self) -> impl Iterator<Item = &String> {
        [
            &self.landcover_questions,
            &self.landcover_answers,
            &self.counting_questions,
            &self.counting_answers,
            &self.vqa_questions,
            &self.vqa_yes_answers,
            &self.vqa_no_answers,
            &self.agb_questions,
            &self.agb_answers,
        ]
        .into_iter()
        .flatten()
    }

    pub fn validate(&self) -> Result<()> {
        for c in Category::ALL {
            let (q, a) = (self.questions(c).len(), self.answer_count(c));
            if q < MIN_TEMPLATES_PER_KIND || a < MIN_TEMPLATES_PER_KIND {
                return Err(Error::Precondition(format!(
                    "category {} has {q} question and {a} answer templates, need {MIN_TEMPLATES_PER_KIND} each",
                    c.as_str()
                )));
            }
        }
        if self.vqa_yes_answers.is_empty() || self.vqa_no_answers.is_empty() {
            return Err(Error::Precondition("vqa needs both yes and no answers".into()));
        }
        let need = |list: &[String], slot: &str, what: &str| -> Result<()> {
            match list.iter().find(|t| !t.contains(slot)) {
                Some(t) => Err(Error::Precondition(format!("{what} template lacks {slot}: {t:?}"))),
                None => Ok(()),
            }
        };
        need(&self.landcover_answers, SLOT_CLASS, "landcover answer")?;
        need(&self.counting_answers, SLOT_COUNT, "counting answer")?;
        need(&self.agb_answers, SLOT_AGB, "agb answer")?;
        if let Some(t) = self.all_templates().find(|t| t.trim().is_empty()) {
            return Err(Error::Precondition(format!("empty template {t:?}")));
        }
        Ok(())
    }
}

fn owned(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl Default for TemplateSuite {
    fn default() -> Self {
        TemplateSuite {
            landcover_questions: owned(&[
                "What is the land cover type of this area?",
                "Which land cover class dominates this image?",
                "Identify the main land cover in the scene.",
                "What kind of land cover is shown here?",
                "Classify the land cover of this patch.",
                "Which land cover category best describes this region?",
                "What is the dominant surface type in this image?",
                "Determine the prevailing land cover of the area.",
                "What type of land cover can be seen in this image?",
                "Please name the land cover class of this scene.",
                "Which class of land cover occupies most of the patch?",
                "What land cover is most common in this region?",
                "Describe the primary land cover of the scene.",
                "Tell me the land cover category of this area.",
                "Looking at the image, what is the land cover?",
                "Which land cover type is present across most of the image?",
                "What is the main category of land use and cover here?",
                "Based on the imagery, classify the dominant land cover.",
                "Can you identify the prevailing land cover class?",
                "What surface cover is dominant in this patch?",
                "Report the land cover class for this image.",
                "Which land cover label fits this area best?",
                "What is the major land cover found in this region?",
                "From the observation, what land cover dominates?",
                "State the principal land cover type of the scene.",
                "Give the most likely land cover class for this area.",
            ]),
            landcover_answers: owned(&[
                "The land cover of this area is {class}.",
                "{class}.",
                "This image is dominated by {class}.",
                "The dominant land cover is {class}.",
                "The scene mainly shows {class}.",
                "It is classified as {class}.",
                "The main land cover type is {class}.",
                "Most of the patch is covered by {class}.",
                "The prevailing class here is {class}.",
                "This region is best described as {class}.",
                "The area is mostly {class}.",
                "The land cover category is {class}.",
                "I would classify it as {class}.",
                "The image shows predominantly {class}.",
                "The principal surface type is {class}.",
                "It appears to be {class}.",
                "The majority of the area is {class}.",
                "The dominant class in the image is {class}.",
                "This patch belongs to the class {class}.",
                "The observed land cover is {class}.",
                "The primary land cover here is {class}.",
                "Most pixels belong to {class}.",
                "The best matching land cover label is {class}.",
                "The region is characterized by {class}.",
                "The land cover class of the scene is {class}.",
                "Mainly {class}.",
            ]),
            counting_questions: owned(&[
                "How many land cover patches are in this image?",
                "Count the distinct land cover patches in the scene.",
                "How many separate patches can be identified?",
                "What is the number of land cover patches here?",
                "How many ecological patches does this area contain?",
                "Count the connected land cover units in the image.",
                "How many distinct patches of land cover are visible?",
                "Please count the land cover patches in this region.",
                "What is the total count of patches in the scene?",
                "How fragmented is the area, in number of patches?",
                "How many contiguous land cover regions are there?",
                "Determine the number of separate land cover patches.",
                "How many individual patches can you find in this image?",
                "Give the number of land cover patches in the area.",
                "How many continuous land cover units appear here?",
                "Report the patch count for this image.",
                "How many patches of uniform land cover exist in the scene?",
                "What is the count of distinct ecological units?",
                "Count how many land cover patches this patch contains.",
                "How many connected regions of the same class are present?",
                "Tell me the number of land cover patches.",
                "How many homogeneous patches are in this region?",
                "Estimate the number of separate land cover areas.",
                "What number of land cover patches can be observed?",
                "How many different patches make up this landscape?",
                "In total, how many land cover patches are there?",
            ]),
            counting_answers: owned(&[
                "There are {count} patches.",
                "{count}.",
                "The image contains {count} land cover patches.",
                "I count {count} patches.",
                "The scene has {count} distinct patches.",
                "The number of patches is {count}.",
                "A total of {count} patches can be identified.",
                "There are {count} connected land cover units.",
                "The patch count is {count}.",
                "The area contains {count} ecological patches.",
                "{count} patches are visible.",
                "The landscape is divided into {count} patches.",
                "I can identify {count} separate patches.",
                "The region includes {count} land cover patches.",
                "There appear to be {count} patches.",
                "In total there are {count} patches.",
                "The total number of patches is {count}.",
                "It has {count} contiguous regions.",
                "The image shows {count} distinct land cover units.",
                "Exactly {count} patches are present.",
                "The count of patches is {count}.",
                "This scene consists of {count} patches.",
                "You can see {count} patches in this image.",
                "The fragmentation level is {count} patches.",
                "Overall, {count} patches make up the scene.",
                "There are {count} homogeneous patches.",
            ]),
            vqa_questions: owned(&[
                "Is there any human activity in this area?",
                "Are there signs of human activity in the image?",
                "Does this scene show human activity?",
                "Is human activity present in this region?",
                "Can you see evidence of human activity here?",
                "Is this area affected by human activity?",
                "Are there human-made features in the scene?",
                "Does the image contain traces of human activity?",
                "Is there evidence of human presence in this patch?",
                "Has this land been modified by human activity?",
                "Are any built or cultivated areas visible?",
                "Does this region show human land use?",
                "Is the landscape influenced by human activity?",
                "Do you see any human activity in the image?",
                "Is there any sign of settlement or farming here?",
                "Does the scene include areas shaped by people?",
                "Are human activities visible in this area?",
                "Is any part of this image used by humans?",
                "Can human activity be detected in the scene?",
                "Does this patch contain managed or built land?",
                "Is there human disturbance in this region?",
                "Are there indications of human land use here?",
                "Is the area touched by human activity?",
                "Does the image reveal any human activity?",
                "Would you say humans are active in this area?",
                "Is human influence visible in this scene?",
            ]),
            vqa_yes_answers: owned(&[
                "Yes.",
                "Yes, there is human activity in this area.",
                "Yes, signs of human activity are visible.",
                "Yes, the scene shows human activity.",
                "Yes, human activity is present.",
                "Yes, parts of the area are used by humans.",
                "Yes, the landscape shows human influence.",
                "Yes, human land use can be seen.",
                "Yes, there are traces of human activity.",
                "Yes, the region has been modified by people.",
                "Yes, human presence is evident.",
                "Yes, some areas are built or cultivated.",
                "Yes, it is affected by human activity.",
            ]),
            vqa_no_answers: owned(&[
                "No.",
                "No, there is no human activity in this area.",
                "No, signs of human activity are absent.",
                "No, the scene shows a natural landscape.",
                "No, human activity is not present.",
                "No, the area appears untouched.",
                "No, the landscape shows no human influence.",
                "No, human land use cannot be seen.",
                "No, there are no traces of human activity.",
                "No, the region looks natural.",
                "No, human presence is not evident.",
                "No, there are no built or cultivated areas.",
                "No, it is not affected by human activity.",
            ]),
            agb_questions: owned(&[
                "What is the above-ground biomass of this area?",
                "Estimate the above-ground biomass in this image.",
                "How much above-ground biomass does this region contain?",
                "What is the biomass density of the scene?",
                "Please estimate the AGB of this patch.",
                "How much biomass is stored above ground here?",
                "What is the estimated AGB in Mg/ha for this area?",
                "Give the above-ground biomass of this region.",
                "How dense is the above-ground biomass in this image?",
                "What amount of above-ground biomass is present?",
                "Estimate the AGB value of the scene.",
                "What is the AGB of this patch in Mg/ha?",
                "Report the above-ground biomass for this area.",
                "How much vegetation biomass is above the ground here?",
                "What is the level of above-ground biomass in the region?",
                "Can you estimate the biomass of this area?",
                "Determine the above-ground biomass of the patch.",
                "What is the average above-ground biomass in this scene?",
                "How high is the AGB in this image?",
                "Tell me the above-ground biomass of this region.",
                "What biomass value would you assign to this area?",
                "Predict the above-ground biomass of this patch.",
                "How much AGB is present in the scene?",
                "Provide an estimate of the above-ground biomass.",
                "What is the biomass per hectare in this area?",
                "Quantify the above-ground biomass of this image.",
            ]),
            agb_answers: owned(&[
                "The area is mostly {class}, and the above-ground biomass is about {agb} Mg/ha.",
                "Mostly {class}; the AGB is {agb} Mg/ha.",
                "Dominated by {class}, the biomass is estimated at {agb} Mg/ha.",
                "With {class} as main cover, the AGB is approximately {agb} Mg/ha.",
                "The scene is mainly {class}, with {agb} Mg/ha of above-ground biomass.",
                "Given the {class} cover, the estimated AGB is {agb} Mg/ha.",
                "The land cover is {class}, so the AGB is around {agb} Mg/ha.",
                "Mainly {class}, holding about {agb} Mg/ha of biomass.",
                "The patch is covered by {class}; its biomass is {agb} Mg/ha.",
                "For this {class} area, the above-ground biomass is {agb} Mg/ha.",
                "The dominant cover is {class} and the AGB is {agb} Mg/ha.",
                "This {class} scene holds roughly {agb} Mg/ha.",
                "Based on the {class} cover, I estimate {agb} Mg/ha.",
                "The region is {class}, with an AGB of {agb} Mg/ha.",
                "Largely {class}; the estimated biomass is {agb} Mg/ha.",
                "The image shows {class}, and the biomass density is {agb} Mg/ha.",
                "The main class is {class}, giving about {agb} Mg/ha.",
                "Covered mostly by {class}, the area stores {agb} Mg/ha.",
                "The prevailing cover is {class}; AGB is near {agb} Mg/ha.",
                "With mostly {class}, the biomass here is {agb} Mg/ha.",
                "The scene is dominated by {class}, so about {agb} Mg/ha.",
                "Its land cover is {class} and the AGB is roughly {agb} Mg/ha.",
                "The area is {class}; above-ground biomass is {agb} Mg/ha.",
                "Mostly {class}, with an estimated {agb} Mg/ha.",
                "The dominant class is {class}, and the AGB reaches {agb} Mg/ha.",
                "Primarily {class}; the biomass is about {agb} Mg/ha.",
            ]),
        }
    }
}
