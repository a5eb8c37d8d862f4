//! Word splitting shared by the tokenizer and the answer parsers.

/// Characters emitted as standalone tokens.
pub const PUNCTUATION: &[char] = &[',', '.', '?', '!', ';', ':', '/', '(', ')', '-', '\''];

/// Lower-cases and splits text into words, punctuation marks and single digits.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<String>| {
        if !word.is_empty() {
            out.push(std::mem::take(word));
        }
    };
    for ch in text.chars() {
        if ch.is_whitespace() {
            flush(&mut word, &mut out);
        } else if PUNCTUATION.contains(&ch) || ch.is_ascii_digit() {
            flush(&mut word, &mut out);
            out.push(ch.to_string());
        } else {
            word.extend(ch.to_lowercase());
        }
    }
    flush(&mut word, &mut out);
    out
}

/// Canonical spacing used for phrase matching: words joined by single spaces.
pub fn normalize(text: &str) -> String {
    split_words(text).join(" ")
}

/// Joins tokens back into readable text: no space before closing punctuation,
/// none around `/`, and digit runs (with decimal points) kept together.
pub fn join_words<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    let mut prev_prev: Option<&str> = None;
    for tok in tokens.iter().map(|t| t.as_ref()) {
        let is_digit = |s: Option<&str>| s.is_some_and(|s| s.len() == 1 && s.as_bytes()[0].is_ascii_digit());
        let tight = match prev {
            None => true,
            Some(p) => {
                matches!(tok, "," | "." | "?" | "!" | ";" | ":" | ")" | "/" | "'" | "-")
                    || matches!(p, "(" | "/" | "'" | "-")
                    || (is_digit(Some(tok)) && is_digit(Some(p)))
                    || (is_digit(Some(tok)) && p == "." && is_digit(prev_prev))
            }
        };
        if !tight {
            out.push(' ');
        }
        out.push_str(tok);
        prev_prev = prev;
        prev = Some(tok);
    }
    out
}
