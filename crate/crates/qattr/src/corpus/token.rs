//! Whitespace-and-punctuation tokenizer.
//!
//! Words are maximal runs of alphanumeric characters; every other
//! non-whitespace character becomes a single-character punctuation token.
//! Apostrophes are punctuation, so contractions split ("don't" ->
//! "don", "'", "t"). Offsets are byte offsets into the source text, which
//! makes the round trip exact: joining token substrings with the original
//! gaps reproduces the input.

use serde::{Deserialize, Serialize};

/// One token of a document, with byte offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
    /// Word (alphanumeric run) vs punctuation.
    pub is_word: bool,
}

/// Tokenize text into words and single-character punctuation tokens.
///
/// Deterministic; empty input yields an empty list.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;

    let flush = |tokens: &mut Vec<Token>, start: usize, end: usize, text: &str| {
        tokens.push(Token {
            text: text[start..end].to_string(),
            char_start: start,
            char_end: end,
            is_word: true,
        });
    };

    for (pos, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if word_start.is_none() {
                word_start = Some(pos);
            }
        } else {
            if let Some(start) = word_start.take() {
                flush(&mut tokens, start, pos, text);
            }
            if !ch.is_whitespace() {
                tokens.push(Token {
                    text: ch.to_string(),
                    char_start: pos,
                    char_end: pos + ch.len_utf8(),
                    is_word: false,
                });
            }
        }
    }
    if let Some(start) = word_start.take() {
        flush(&mut tokens, start, text.len(), text);
    }
    tokens
}
