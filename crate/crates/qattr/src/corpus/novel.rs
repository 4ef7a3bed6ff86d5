//! Annotated-novel loading and validation.
//!
//! A novel arrives as two files: the raw UTF-8 text and a JSON annotation
//! with characters, chapters, quotes, and mentions. All token indices refer
//! to this crate's tokenizer run over the text file, and every range is
//! half-open: `start_tok` inclusive, `end_tok` exclusive.

use serde::{Deserialize, Serialize};

use crate::corpus::drama::Utterance;
use crate::corpus::token::{tokenize, Token};
use crate::corpus::Character;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuoteType {
    Explicit,
    Anaphoric,
    Implicit,
}

impl QuoteType {
    pub const ALL: [QuoteType; 3] = [QuoteType::Explicit, QuoteType::Anaphoric, QuoteType::Implicit];

    pub fn label(self) -> &'static str {
        match self {
            QuoteType::Explicit => "explicit",
            QuoteType::Anaphoric => "anaphoric",
            QuoteType::Implicit => "implicit",
        }
    }
}

/// A span of direct speech, `tokens[start_tok..end_tok]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quote {
    pub id: String,
    pub start_tok: usize,
    pub end_tok: usize,
    pub quote_type: QuoteType,
    /// Gold speaker; may be absent at inference time.
    pub speaker_id: Option<String>,
    /// Index into the novel's chapter list.
    pub chapter: usize,
}

/// A character mention span, `tokens[start_tok..end_tok]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub start_tok: usize,
    pub end_tok: usize,
    /// Resolved character id, or None when unresolvable.
    pub entity_id: Option<String>,
    /// True when the span overlaps a quote; such mentions are never
    /// speaker candidates.
    pub quote_internal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chapter {
    pub start_tok: usize,
    pub end_tok: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedNovel {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub characters: Vec<Character>,
    pub quotes: Vec<Quote>,
    pub mentions: Vec<Mention>,
    pub chapters: Vec<Chapter>,
}

impl AnnotatedNovel {
    pub fn character(&self, id: &str) -> Option<&Character> {
        self.characters.iter().find(|c| c.id == id)
    }

    /// Materialize a quote as a standalone utterance: the covered text
    /// slice with token offsets rebased to it.
    pub fn quote_utterance(&self, quote: &Quote) -> Utterance {
        let toks = &self.tokens[quote.start_tok..quote.end_tok];
        let base = toks[0].char_start;
        let end = toks[toks.len() - 1].char_end;
        let tokens = toks
            .iter()
            .map(|t| Token {
                text: t.text.clone(),
                char_start: t.char_start - base,
                char_end: t.char_end - base,
                is_word: t.is_word,
            })
            .collect();
        Utterance {
            speaker_id: quote.speaker_id.clone().unwrap_or_default(),
            text: self.text[base..end].to_string(),
            tokens,
            segment_ordinal: quote.start_tok,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotation {
    id: String,
    characters: Vec<RawCharacter>,
    chapters: Vec<RawSpan>,
    quotes: Vec<RawQuote>,
    mentions: Vec<RawMention>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCharacter {
    id: String,
    name: String,
    #[serde(default)]
    aliases: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpan {
    start_tok: usize,
    end_tok: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuote {
    id: String,
    start_tok: usize,
    end_tok: usize,
    #[serde(rename = "type")]
    quote_type: QuoteType,
    #[serde(default)]
    speaker_id: Option<String>,
    chapter: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMention {
    start_tok: usize,
    end_tok: usize,
    #[serde(default)]
    entity_id: Option<String>,
}

/// Parse a novel from its text and annotation file contents.
///
/// Validates every cross-reference and range; errors name the offending
/// record (quote id, mention index, chapter index, character id).
pub fn parse_novel(text: &str, annotation_json: &str) -> Result<AnnotatedNovel> {
    let raw: RawAnnotation = serde_json::from_str(annotation_json)
        .map_err(|e| Error::Format(format!("annotation JSON: {e}")))?;
    let tokens = tokenize(text);
    let n = tokens.len();

    if raw.id.trim().is_empty() {
        return Err(Error::validation("annotation", "empty novel id"));
    }

    let mut characters = Vec::with_capacity(raw.characters.len());
    for rc in raw.characters {
        let record = format!("character \"{}\"", rc.id);
        if rc.id.trim().is_empty() {
            return Err(Error::validation("character", "empty id"));
        }
        if rc.name.trim().is_empty() {
            return Err(Error::validation(&record, "empty name"));
        }
        if characters.iter().any(|c: &Character| c.id == rc.id) {
            return Err(Error::validation(&record, "duplicate character id"));
        }
        let mut ch = Character::new(&rc.id, &rc.name);
        for alias in rc.aliases {
            if alias.trim().is_empty() {
                return Err(Error::validation(&record, "empty alias"));
            }
            ch.aliases.insert(alias);
        }
        characters.push(ch);
    }

    let chapters = validate_chapters(&raw.chapters, n)?;

    let mut quotes = Vec::with_capacity(raw.quotes.len());
    for rq in raw.quotes {
        let record = format!("quote \"{}\"", rq.id);
        if rq.id.trim().is_empty() {
            return Err(Error::validation("quote", "empty id"));
        }
        if quotes.iter().any(|q: &Quote| q.id == rq.id) {
            return Err(Error::validation(&record, "duplicate quote id"));
        }
        check_span(rq.start_tok, rq.end_tok, n, &record)?;
        if let Some(sp) = &rq.speaker_id {
            if !characters.iter().any(|c| &c.id == sp) {
                return Err(Error::validation(&record, format!("unknown speaker \"{sp}\"")));
            }
        }
        let Some(chapter) = chapters.get(rq.chapter) else {
            return Err(Error::validation(
                &record,
                format!("chapter index {} out of range ({} chapters)", rq.chapter, chapters.len()),
            ));
        };
        if rq.start_tok < chapter.start_tok || rq.end_tok > chapter.end_tok {
            return Err(Error::validation(
                &record,
                format!("range [{}, {}) extends outside chapter {}", rq.start_tok, rq.end_tok, rq.chapter),
            ));
        }
        quotes.push(Quote {
            id: rq.id,
            start_tok: rq.start_tok,
            end_tok: rq.end_tok,
            quote_type: rq.quote_type,
            speaker_id: rq.speaker_id,
            chapter: rq.chapter,
        });
    }

    let mut by_start: Vec<&Quote> = quotes.iter().collect();
    by_start.sort_by_key(|q| q.start_tok);
    for pair in by_start.windows(2) {
        if pair[1].start_tok < pair[0].end_tok {
            return Err(Error::validation(
                format!("quote \"{}\"", pair[1].id),
                format!("overlaps quote \"{}\"", pair[0].id),
            ));
        }
    }
    let quote_spans: Vec<(usize, usize)> = by_start.iter().map(|q| (q.start_tok, q.end_tok)).collect();

    let mut mentions = Vec::with_capacity(raw.mentions.len());
    for (i, rm) in raw.mentions.into_iter().enumerate() {
        let record = format!("mention {i}");
        check_span(rm.start_tok, rm.end_tok, n, &record)?;
        if let Some(ent) = &rm.entity_id {
            if !characters.iter().any(|c| &c.id == ent) {
                return Err(Error::validation(&record, format!("unknown entity \"{ent}\"")));
            }
        }
        let quote_internal = overlaps_any(rm.start_tok, rm.end_tok, &quote_spans);
        mentions.push(Mention {
            start_tok: rm.start_tok,
            end_tok: rm.end_tok,
            entity_id: rm.entity_id,
            quote_internal,
        });
    }

    Ok(AnnotatedNovel {
        id: raw.id,
        text: text.to_string(),
        tokens,
        characters,
        quotes,
        mentions,
        chapters,
    })
}

fn validate_chapters(raw: &[RawSpan], n: usize) -> Result<Vec<Chapter>> {
    if raw.is_empty() {
        if n > 0 {
            return Err(Error::validation("chapters", "no chapters but novel has tokens"));
        }
        return Ok(Vec::new());
    }
    let mut chapters = Vec::with_capacity(raw.len());
    for (i, span) in raw.iter().enumerate() {
        let record = format!("chapter {i}");
        if span.start_tok >= span.end_tok {
            return Err(Error::validation(&record, "empty or inverted range"));
        }
        let expected_start = if i == 0 { 0 } else { raw[i - 1].end_tok };
        if span.start_tok != expected_start {
            return Err(Error::validation(
                &record,
                format!("starts at {} but previous coverage ends at {expected_start}", span.start_tok),
            ));
        }
        chapters.push(Chapter { start_tok: span.start_tok, end_tok: span.end_tok });
    }
    let last = chapters.last().unwrap();
    if last.end_tok != n {
        return Err(Error::validation(
            "chapters",
            format!("cover [0, {}) but novel has {n} tokens", last.end_tok),
        ));
    }
    Ok(chapters)
}

fn check_span(start: usize, end: usize, n: usize, record: &str) -> Result<()> {
    if start >= end {
        return Err(Error::validation(record, "empty or inverted range"));
    }
    if end > n {
        return Err(Error::validation(
            record,
            format!("range [{start}, {end}) out of bounds for {n} tokens"),
        ));
    }
    Ok(())
}

/// True when [start, end) intersects any of the sorted, disjoint spans.
fn overlaps_any(start: usize, end: usize, sorted_spans: &[(usize, usize)]) -> bool {
    // First span starting at or after `end` cannot overlap; check the one before.
    let idx = sorted_spans.partition_point(|&(s, _)| s < end);
    idx > 0 && sorted_spans[idx - 1].1 > start
}

/// Case-insensitive exact alias lookup. Returns None when no character or
/// more than one character matches.
pub fn resolve_alias(lexicon: &[Character], surface: &str) -> Option<String> {
    let needle = surface.to_lowercase();
    let mut found: Option<&str> = None;
    for ch in lexicon {
        if ch.aliases.iter().any(|a| a.to_lowercase() == needle) {
            match found {
                Some(prev) if prev != ch.id => return None,
                _ => found = Some(&ch.id),
            }
        }
    }
    found.map(str::to_string)
}
