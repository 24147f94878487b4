//! Tokenization and answer-text normalization.

use crate::types::Token;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Normalizes answer text: lowercase, drop ASCII punctuation, drop the
/// articles "a", "an" and "the", collapse whitespace.
pub fn normalize_text(s: &str) -> String {
    let lowered: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalized tokens of `s`, i.e. `normalize_text(s)` split on whitespace.
pub fn normalized_tokens(s: &str) -> Vec<String> {
    normalize_text(s)
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Splits on whitespace and trims non-alphanumeric characters from both ends
/// of every chunk. Internal punctuation is kept so that "2,582,322",
/// "1996-97" and "3.5" stay single tokens. Chunks that are pure punctuation
/// are dropped.
pub fn tokenize(s: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chunk_start: Option<usize> = None;
    for (i, c) in s.char_indices().chain(std::iter::once((s.len(), ' '))) {
        match (c.is_whitespace(), chunk_start) {
            (true, Some(start)) => {
                push_trimmed(&mut tokens, s, start, i);
                chunk_start = None;
            }
            (false, None) => chunk_start = Some(i),
            _ => {}
        }
    }
    tokens
}

fn push_trimmed(tokens: &mut Vec<Token>, s: &str, start: usize, end: usize) {
    let chunk = &s[start..end];
    let trimmed_front = chunk.trim_start_matches(|c: char| !c.is_alphanumeric());
    let offset = chunk.len() - trimmed_front.len();
    let trimmed = trimmed_front.trim_end_matches(|c: char| !c.is_alphanumeric());
    if !trimmed.is_empty() {
        tokens.push(Token {
            text: trimmed.to_owned(),
            char_start: start + offset,
        });
    }
}

/// Joins token texts with single spaces.
pub fn join_tokens(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}
