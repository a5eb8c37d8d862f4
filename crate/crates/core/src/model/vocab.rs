use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthdata::templates::{SLOT_AGB, SLOT_CLASS, SLOT_COUNT};
use crate::synthdata::{class_vocabulary, Category, TemplateSuite};
use crate::text::{join_words, split_words, PUNCTUATION};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const IMG: &str = "<img>";

pub fn task_tag(category: Category) -> String {
    format!("<task:{}>", category.task_name())
}

/// Closed word-level vocabulary. Specials come first, then task tags,
/// digits and punctuation, then sorted words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Vocabulary covering the default templates and every class name.
    pub fn build_default() -> Vocab {
        Self::build(&TemplateSuite::default(), &class_vocabulary())
    }

    pub fn build(suite: &TemplateSuite, class_names: &[&str]) -> Vocab {
        let mut tokens: Vec<String> = [PAD, UNK, BOS, EOS, IMG].iter().map(|s| s.to_string()).collect();
        tokens.extend(Category::ALL.iter().map(|&c| task_tag(c)));
        tokens.extend((0..10).map(|d| d.to_string()));
        tokens.extend(PUNCTUATION.iter().map(|c| c.to_string()));
        let mut words = BTreeSet::new();
        for t in suite.all_templates() {
            let t = t.replace(SLOT_CLASS, " ").replace(SLOT_COUNT, " ").replace(SLOT_AGB, " ");
            words.extend(split_words(&t));
        }
        for name in class_names {
            words.extend(split_words(name));
        }
        for w in words {
            if !tokens.contains(&w) {
                tokens.push(w);
            }
        }
        Vocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    fn special(&self, token: &str) -> u32 {
        self.id(token).expect("special tokens are always present")
    }

    pub fn bos(&self) -> u32 {
        self.special(BOS)
    }

    pub fn eos(&self) -> u32 {
        self.special(EOS)
    }

    pub fn img(&self) -> u32 {
        self.special(IMG)
    }

    pub fn unk(&self) -> u32 {
        self.special(UNK)
    }

    pub fn task(&self, category: Category) -> u32 {
        self.special(&task_tag(category))
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.token(id).map_or(true, |t| t.starts_with('<') && t.ends_with('>') && t.len() > 2)
    }

    /// Word ids; unknown words map to `<unk>`.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        split_words(text).iter().map(|w| self.id(w).unwrap_or_else(|| self.unk())).collect()
    }

    /// Like `encode` but fails on any unknown word.
    pub fn encode_strict(&self, text: &str) -> Result<Vec<u32>> {
        split_words(text)
            .iter()
            .map(|w| self.id(w).ok_or_else(|| Error::Precondition(format!("word {w:?} is outside the vocabulary"))))
            .collect()
    }

    /// Detokenized text with special tokens dropped.
    pub fn decode(&self, ids: &[u32]) -> String {
        let words: Vec<&str> = ids.iter().filter(|&&i| !self.is_special(i)).filter_map(|&i| self.token(i)).collect();
        join_words(&words)
    }

    /// `<task:X>`, question words, then answer words and `<eos>` when an
    /// answer is given. Returns the ids and the index of the first answer id.
    pub fn dialogue_ids(&self, category: Category, question: &str, answer: Option<&str>) -> (Vec<u32>, usize) {
        let mut ids = vec![self.task(category)];
        ids.extend(self.encode(question));
        let start = ids.len();
        if let Some(a) = answer {
            ids.extend(self.encode(a));
            ids.push(self.eos());
        }
        (ids, start)
    }
}
