//! Candidate mention enumeration inside a context segment.

use crate::attrib::context::ContextSegment;
use crate::corpus::novel::{resolve_alias, AnnotatedNovel};

/// A mention in the window that resolves to a known character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateMention {
    /// Index into the novel's mention list.
    pub mention_index: usize,
    pub entity_id: String,
    /// Segment-local span, half-open.
    pub seg_start: usize,
    pub seg_end: usize,
}

/// All resolvable mentions fully inside the window, in segment order.
/// Quote-internal mentions never qualify; mentions without an annotation
/// link fall back to alias resolution over the surface string; mentions
/// that still resolve to nothing (or ambiguously) are dropped. The list is
/// never truncated.
pub fn enumerate_candidates(novel: &AnnotatedNovel, segment: &ContextSegment) -> Vec<CandidateMention> {
    let (lo, hi) = segment.window;
    let mut out = Vec::new();
    for (i, m) in novel.mentions.iter().enumerate() {
        if m.quote_internal || m.start_tok < lo || m.end_tok > hi {
            continue;
        }
        let entity_id = match &m.entity_id {
            Some(e) => e.clone(),
            None => {
                let first = &novel.tokens[m.start_tok];
                let last = &novel.tokens[m.end_tok - 1];
                let surface = &novel.text[first.char_start..last.char_end];
                match resolve_alias(&novel.characters, surface) {
                    Some(e) => e,
                    None => continue,
                }
            }
        };
        let seg_start = segment
            .position_of(m.start_tok)
            .expect("non-quote-internal mention inside the window maps to a segment position");
        out.push(CandidateMention {
            mention_index: i,
            entity_id,
            seg_start,
            seg_end: seg_start + (m.end_tok - m.start_tok),
        });
    }
    out.sort_unstable_by_key(|c| (c.seg_start, c.seg_end, c.mention_index));
    out
}

/// True when no candidate resolves to the gold speaker.
pub fn is_unanswerable(gold_speaker: &str, candidates: &[CandidateMention]) -> bool {
    !candidates.iter().any(|c| c.entity_id == gold_speaker)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrib::context::build_context;
    use crate::corpus::parse_novel;

    fn novel_with_mentions(mentions: serde_json::Value) -> AnnotatedNovel {
        // Tokens: 0..8 narrative, quote [8,11), 11.. narrative. Token 4 is
        // "Al", token 6 "Bennet", token 12 "Be".
        let words = ["the", "day", "was", "long", "Al", "and", "Bennet", "walked", "x", "x", "x", "then", "Be", "spoke", "softly", "end"];
        let anno = serde_json::json!({
            "id": "n",
            "characters": [
                {"id": "al", "name": "Al"},
                {"id": "be", "name": "Be"},
                {"id": "b1", "name": "Mr. Bennet", "aliases": ["Bennet"]},
                {"id": "b2", "name": "Mrs. Bennet", "aliases": ["Bennet"]}
            ],
            "chapters": [{"start_tok": 0, "end_tok": 16}],
            "quotes": [{"id": "q", "start_tok": 8, "end_tok": 11, "type": "implicit", "speaker_id": "al", "chapter": 0}],
            "mentions": mentions
        });
        parse_novel(&words.join(" "), &anno.to_string()).unwrap()
    }

    #[test]
    fn linked_mentions_in_window_are_returned_in_order() {
        let novel = novel_with_mentions(serde_json::json!([
            {"start_tok": 12, "end_tok": 13, "entity_id": "be"},
            {"start_tok": 4, "end_tok": 5, "entity_id": "al"}
        ]));
        let seg = build_context(&novel, &novel.quotes[0], 100);
        let cands = enumerate_candidates(&novel, &seg);
        assert_eq!(cands.len(), 2);
        assert_eq!(cands[0].entity_id, "al");
        assert_eq!(cands[1].entity_id, "be");
        assert!(cands[0].seg_start < cands[1].seg_start);
        assert_eq!(seg.tokens[cands[0].seg_start], "Al");
    }

    #[test]
    fn out_of_window_mentions_are_dropped() {
        let novel = novel_with_mentions(serde_json::json!([
            {"start_tok": 4, "end_tok": 5, "entity_id": "al"},
            {"start_tok": 12, "end_tok": 13, "entity_id": "be"}
        ]));
        let seg = build_context(&novel, &novel.quotes[0], 2);
        // Window [6, 13): the Al mention at 4 is outside.
        let cands = enumerate_candidates(&novel, &seg);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].entity_id, "be");
    }

    #[test]
    fn quote_internal_mentions_are_dropped() {
        let novel = novel_with_mentions(serde_json::json!([
            {"start_tok": 9, "end_tok": 10, "entity_id": "al"},
            {"start_tok": 12, "end_tok": 13, "entity_id": "be"}
        ]));
        assert!(novel.mentions[0].quote_internal);
        let seg = build_context(&novel, &novel.quotes[0], 100);
        let cands = enumerate_candidates(&novel, &seg);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].entity_id, "be");
    }

    #[test]
    fn unlinked_mention_resolves_through_alias() {
        let novel = novel_with_mentions(serde_json::json!([
            {"start_tok": 4, "end_tok": 5}
        ]));
        let seg = build_context(&novel, &novel.quotes[0], 100);
        let cands = enumerate_candidates(&novel, &seg);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].entity_id, "al");
    }

    #[test]
    fn ambiguous_unlinked_surface_is_dropped() {
        // "Bennet" is an alias of two characters; without an annotation
        // link the mention cannot be used.
        let novel = novel_with_mentions(serde_json::json!([
            {"start_tok": 6, "end_tok": 7}
        ]));
        let seg = build_context(&novel, &novel.quotes[0], 100);
        assert!(enumerate_candidates(&novel, &seg).is_empty());
    }

    #[test]
    fn candidate_list_is_not_truncated() {
        let mentions: Vec<serde_json::Value> = (0..14)
            .map(|i| {
                let t = if i < 8 { i } else { 11 + (i - 8) % 5 };
                serde_json::json!({"start_tok": t, "end_tok": t + 1, "entity_id": if i % 2 == 0 { "al" } else { "be" }})
            })
            .collect();
        let novel = novel_with_mentions(serde_json::json!(mentions));
        let seg = build_context(&novel, &novel.quotes[0], 100);
        assert_eq!(enumerate_candidates(&novel, &seg).len(), 14);
    }

    #[test]
    fn unanswerable_tests_gold_membership() {
        let novel = novel_with_mentions(serde_json::json!([
            {"start_tok": 4, "end_tok": 5, "entity_id": "al"},
            {"start_tok": 12, "end_tok": 13, "entity_id": "be"}
        ]));
        let seg = build_context(&novel, &novel.quotes[0], 100);
        let cands = enumerate_candidates(&novel, &seg);
        assert!(!is_unanswerable("al", &cands));
        assert!(!is_unanswerable("be", &cands));
        assert!(is_unanswerable("b1", &cands));
        assert!(is_unanswerable("anyone", &[]));
    }
}
