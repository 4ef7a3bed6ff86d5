//! Masked context segments around a focal quote.

use crate::corpus::novel::{AnnotatedNovel, Quote};

pub const QUOTE_TOKEN: &str = "[QUOTE]";
pub const ALTQUOTE_TOKEN: &str = "[ALTQUOTE]";
pub const DEFAULT_WINDOW: usize = 100;

/// A window of document tokens around one quote, with the focal quote
/// collapsed to a single [QUOTE] token and every other quote that reaches
/// into the window collapsed to one [ALTQUOTE] each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextSegment {
    pub quote_id: String,
    pub tokens: Vec<String>,
    /// Document token range each segment position covers (half-open);
    /// width 1 everywhere except mask tokens.
    pub doc_spans: Vec<(usize, usize)>,
    /// Position of the [QUOTE] token.
    pub quote_pos: usize,
    /// Document token range the window covers (half-open).
    pub window: (usize, usize),
}

impl ContextSegment {
    /// Segment position of an unmasked document token; None when the token
    /// is outside the window or hidden behind a mask.
    pub fn position_of(&self, doc_tok: usize) -> Option<usize> {
        let idx = self.doc_spans.partition_point(|&(s, _)| s <= doc_tok);
        if idx == 0 {
            return None;
        }
        let (s, e) = self.doc_spans[idx - 1];
        if doc_tok < e && e - s == 1 {
            Some(idx - 1)
        } else {
            None
        }
    }
}

/// Cut the `w`-token window around `quote` and mask all quote material.
pub fn build_context(novel: &AnnotatedNovel, quote: &Quote, w: usize) -> ContextSegment {
    let n = novel.tokens.len();
    let lo = quote.start_tok.saturating_sub(w);
    let hi = (quote.end_tok + w).min(n);

    let mut spans: Vec<(usize, usize, bool)> = novel
        .quotes
        .iter()
        .map(|q| (q.start_tok, q.end_tok, q.id == quote.id))
        .collect();
    spans.sort_unstable_by_key(|s| s.0);

    let mut tokens = Vec::with_capacity(hi - lo);
    let mut doc_spans = Vec::with_capacity(hi - lo);
    let mut quote_pos = 0;
    let mut t = lo;
    while t < hi {
        let idx = spans.partition_point(|&(s, _, _)| s <= t);
        let owner = (idx > 0 && spans[idx - 1].1 > t).then(|| spans[idx - 1]);
        match owner {
            Some((_, e, focal)) => {
                let end = e.min(hi);
                if focal {
                    quote_pos = tokens.len();
                    tokens.push(QUOTE_TOKEN.to_string());
                } else {
                    tokens.push(ALTQUOTE_TOKEN.to_string());
                }
                doc_spans.push((t, end));
                t = end;
            }
            None => {
                tokens.push(novel.tokens[t].text.clone());
                doc_spans.push((t, t + 1));
                t += 1;
            }
        }
    }
    ContextSegment { quote_id: quote.id.clone(), tokens, doc_spans, quote_pos, window: (lo, hi) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_novel;

    /// One chapter, three quotes; q2 sits two tokens after q1.
    pub(crate) fn fixture() -> AnnotatedNovel {
        let words: Vec<String> = (0..60).map(|i| format!("w{i}")).collect();
        let text = words.join(" ");
        let anno = serde_json::json!({
            "id": "ctx",
            "characters": [{"id": "al", "name": "Al"}, {"id": "be", "name": "Be"}],
            "chapters": [{"start_tok": 0, "end_tok": 60}],
            "quotes": [
                {"id": "q1", "start_tok": 10, "end_tok": 15, "type": "explicit", "speaker_id": "al", "chapter": 0},
                {"id": "q2", "start_tok": 17, "end_tok": 20, "type": "implicit", "speaker_id": "be", "chapter": 0},
                {"id": "q3", "start_tok": 40, "end_tok": 45, "type": "implicit", "chapter": 0}
            ],
            "mentions": [
                {"start_tok": 15, "end_tok": 16, "entity_id": "al"},
                {"start_tok": 21, "end_tok": 22, "entity_id": "be"}
            ]
        });
        parse_novel(&text, &anno.to_string()).unwrap()
    }

    #[test]
    fn window_is_clipped_at_document_bounds() {
        let novel = fixture();
        let seg = build_context(&novel, &novel.quotes[0], 100);
        assert_eq!(seg.window, (0, 60));
        let seg = build_context(&novel, &novel.quotes[0], 4);
        assert_eq!(seg.window, (6, 19));
    }

    #[test]
    fn focal_quote_collapses_to_one_quote_token() {
        let novel = fixture();
        let seg = build_context(&novel, &novel.quotes[0], 5);
        let quote_count = seg.tokens.iter().filter(|t| *t == QUOTE_TOKEN).count();
        assert_eq!(quote_count, 1);
        assert_eq!(seg.tokens[seg.quote_pos], QUOTE_TOKEN);
        assert_eq!(seg.doc_spans[seg.quote_pos], (10, 15));
        // 5 left tokens, [QUOTE], then w5..w9... right side: tokens 15,16 then q2 masked.
        assert_eq!(seg.tokens[0], "w5");
        assert_eq!(seg.quote_pos, 5);
    }

    #[test]
    fn neighboring_quote_becomes_one_altquote() {
        let novel = fixture();
        let seg = build_context(&novel, &novel.quotes[0], 10);
        let alt: Vec<usize> = (0..seg.tokens.len()).filter(|&i| seg.tokens[i] == ALTQUOTE_TOKEN).collect();
        assert_eq!(alt.len(), 1);
        assert_eq!(seg.doc_spans[alt[0]], (17, 20));
    }

    #[test]
    fn partially_visible_quote_is_still_masked() {
        let novel = fixture();
        // Window around q2 with w=1 covers tokens [16, 21); q1 ends at 15 so
        // it is outside, but check a window that cuts into q1 instead.
        let seg = build_context(&novel, &novel.quotes[1], 3);
        assert_eq!(seg.window, (14, 23));
        // Position 0 covers the tail of q1: tokens [14, 15).
        assert_eq!(seg.tokens[0], ALTQUOTE_TOKEN);
        assert_eq!(seg.doc_spans[0], (14, 15));
    }

    #[test]
    fn no_quote_token_text_survives_masking() {
        let novel = fixture();
        for quote in &novel.quotes {
            let seg = build_context(&novel, quote, 100);
            for (i, (s, e)) in seg.doc_spans.iter().enumerate() {
                let masked = seg.tokens[i] == QUOTE_TOKEN || seg.tokens[i] == ALTQUOTE_TOKEN;
                for t in *s..*e {
                    let in_quote = novel.quotes.iter().any(|q| t >= q.start_tok && t < q.end_tok);
                    assert_eq!(in_quote, masked, "token {t} of quote {}", quote.id);
                }
            }
        }
    }

    #[test]
    fn left_context_empty_at_document_start() {
        let words: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let anno = serde_json::json!({
            "id": "n",
            "characters": [{"id": "al", "name": "Al"}],
            "chapters": [{"start_tok": 0, "end_tok": 20}],
            "quotes": [{"id": "q", "start_tok": 0, "end_tok": 5, "type": "explicit", "speaker_id": "al", "chapter": 0}],
            "mentions": []
        });
        let novel = parse_novel(&words.join(" "), &anno.to_string()).unwrap();
        let seg = build_context(&novel, &novel.quotes[0], 8);
        assert_eq!(seg.quote_pos, 0);
        assert_eq!(seg.window, (0, 13));
        assert_eq!(seg.tokens.len(), 9);
    }

    #[test]
    fn spec_window_arithmetic() {
        // Quote over tokens 200..=250 with w=100 in a 1000-token document
        // covers tokens 100..=350.
        let words: Vec<String> = (0..1000).map(|i| format!("w{i}")).collect();
        let anno = serde_json::json!({
            "id": "n",
            "characters": [{"id": "al", "name": "Al"}],
            "chapters": [{"start_tok": 0, "end_tok": 1000}],
            "quotes": [{"id": "q", "start_tok": 200, "end_tok": 251, "type": "explicit", "speaker_id": "al", "chapter": 0}],
            "mentions": []
        });
        let novel = parse_novel(&words.join(" "), &anno.to_string()).unwrap();
        let seg = build_context(&novel, &novel.quotes[0], 100);
        assert_eq!(seg.window, (100, 351));
        assert_eq!(seg.tokens.len(), 100 + 1 + 100);
        assert_eq!(seg.quote_pos, 100);
    }

    #[test]
    fn position_mapping_round_trips_unmasked_tokens() {
        let novel = fixture();
        let seg = build_context(&novel, &novel.quotes[0], 10);
        let (lo, hi) = seg.window;
        for t in lo..hi {
            let in_quote = novel.quotes.iter().any(|q| t >= q.start_tok && t < q.end_tok);
            match seg.position_of(t) {
                Some(p) => {
                    assert!(!in_quote);
                    assert_eq!(seg.doc_spans[p], (t, t + 1));
                    assert_eq!(seg.tokens[p], novel.tokens[t].text);
                }
                None => assert!(in_quote, "token {t} should map"),
            }
        }
        assert_eq!(seg.position_of(lo.wrapping_sub(1)), None);
        assert_eq!(seg.position_of(hi), None);
    }
}
