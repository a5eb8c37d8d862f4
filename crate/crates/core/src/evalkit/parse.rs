use serde::{Deserialize, Serialize};

use crate::text::split_words;

/// What could be read out of a free-text answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ParsedAnswer {
    ClassLabel(String),
    Number(f64),
    YesNo(bool),
    Unanswerable,
}

impl ParsedAnswer {
    pub fn is_answered(&self) -> bool {
        !matches!(self, ParsedAnswer::Unanswerable)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            ParsedAnswer::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// Label view used by classification metrics.
    pub fn as_label(&self) -> Option<String> {
        match self {
            ParsedAnswer::ClassLabel(s) => Some(s.clone()),
            ParsedAnswer::YesNo(true) => Some("yes".into()),
            ParsedAnswer::YesNo(false) => Some("no".into()),
            _ => None,
        }
    }
}

fn contains_words(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Case-insensitive search for class names on word boundaries. The longest
/// matching name wins; two distinct names of equal length are ambiguous.
/// An empty class list yields `Unanswerable`.
pub fn parse_class_answer(text: &str, class_names: &[String]) -> ParsedAnswer {
    let words = split_words(text);
    let mut best: Option<(&String, usize)> = None;
    let mut tied = false;
    for name in class_names {
        let pattern = split_words(name);
        if !contains_words(&words, &pattern) {
            continue;
        }
        let len = pattern.iter().map(|w| w.len()).sum::<usize>() + pattern.len();
        match best {
            Some((b, l)) if len == l && b != name => tied = true,
            Some((_, l)) if len <= l => {}
            _ => {
                best = Some((name, len));
                tied = false;
            }
        }
    }
    match best {
        Some((name, _)) if !tied => ParsedAnswer::ClassLabel(name.clone()),
        _ => ParsedAnswer::Unanswerable,
    }
}

/// First run of digits and dots that starts with a digit. One trailing dot
/// is read as sentence punctuation; any other repeated dot is malformed.
pub fn parse_numeric_answer(text: &str) -> ParsedAnswer {
    let Some(start) = text.find(|c: char| c.is_ascii_digit()) else {
        return ParsedAnswer::Unanswerable;
    };
    let rest = &text[start..];
    let end = rest.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(rest.len());
    let mut run = &rest[..end];
    if run.ends_with('.') && !run.ends_with("..") {
        run = &run[..run.len() - 1];
    }
    if run.matches('.').count() > 1 {
        return ParsedAnswer::Unanswerable;
    }
    match run.parse::<f64>() {
        Ok(v) if v.is_finite() => ParsedAnswer::Number(v),
        _ => ParsedAnswer::Unanswerable,
    }
}

/// The first standalone "yes" or "no".
pub fn parse_yes_no(text: &str) -> ParsedAnswer {
    for w in split_words(text) {
        match w.as_str() {
            "yes" => return ParsedAnswer::YesNo(true),
            "no" => return ParsedAnswer::YesNo(false),
            _ => {}
        }
    }
    ParsedAnswer::Unanswerable
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        crate::synthdata::class_vocabulary().iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn class_examples() {
        assert_eq!(parse_class_answer("The area is Shrubs.", &names()), ParsedAnswer::ClassLabel("Shrubs".into()));
        assert_eq!(parse_class_answer("cannot determine", &names()), ParsedAnswer::Unanswerable);
        let both = "Shrubs next to closed forest, evergreen needleleaf forest";
        assert_eq!(
            parse_class_answer(both, &names()),
            ParsedAnswer::ClassLabel("Closed forest, evergreen needleleaf forest".into())
        );
        assert_eq!(
            parse_class_answer("mostly cultivated and managed vegetation / agriculture ( cropland ).", &names()),
            ParsedAnswer::ClassLabel("Cultivated and Managed Vegetation/Agriculture (Cropland)".into())
        );
        assert_eq!(parse_class_answer("shrubsland", &names()), ParsedAnswer::Unanswerable);
        let tie = vec!["ab".to_string(), "cd".to_string()];
        assert_eq!(parse_class_answer("ab and cd", &tie), ParsedAnswer::Unanswerable);
        assert_eq!(parse_class_answer("Shrubs", &[]), ParsedAnswer::Unanswerable);
    }

    #[test]
    fn numeric_examples() {
        assert_eq!(parse_numeric_answer("There are 3 patches"), ParsedAnswer::Number(3.0));
        assert_eq!(parse_numeric_answer("about 142.5 Mg/ha"), ParsedAnswer::Number(142.5));
        assert_eq!(parse_numeric_answer("3..14"), ParsedAnswer::Unanswerable);
        assert_eq!(parse_numeric_answer("There are 12 patches."), ParsedAnswer::Number(12.0));
        assert_eq!(parse_numeric_answer("It is 7."), ParsedAnswer::Number(7.0));
        assert_eq!(parse_numeric_answer("1.2.3"), ParsedAnswer::Unanswerable);
        assert_eq!(parse_numeric_answer("none"), ParsedAnswer::Unanswerable);
        assert_eq!(parse_numeric_answer("AGB .5 then 8"), ParsedAnswer::Number(5.0));
    }

    #[test]
    fn yes_no_examples() {
        assert_eq!(parse_yes_no("Yes, there is."), ParsedAnswer::YesNo(true));
        assert_eq!(parse_yes_no("no human activity"), ParsedAnswer::YesNo(false));
        assert_eq!(parse_yes_no("nothing to say"), ParsedAnswer::Unanswerable);
    }
}
