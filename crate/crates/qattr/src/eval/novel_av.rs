//! Chapter-level AV protocols over annotated novels.
//!
//! Queries are a character's explicit quotes within one chapter. CC scores
//! them against per-character collections of everything said in the other
//! chapters; CQ scores them against each held-out quote individually.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::novel::{AnnotatedNovel, Quote, QuoteType};
use crate::corpus::Utterance;
use crate::embed::{cosine, encode_collection, EmbeddingModel};
use crate::error::{Error, Result};
use crate::eval::auc::{auc, auc_multi};

/// Encode a set of quotes as one collection.
pub fn encode_quotes(model: &EmbeddingModel, novel: &AnnotatedNovel, quotes: &[&Quote]) -> Result<Vec<f64>> {
    let utts: Vec<Utterance> = quotes.iter().map(|q| novel.quote_utterance(q)).collect();
    let refs: Vec<&Utterance> = utts.iter().collect();
    encode_collection(model, &refs)
}

/// Mean AUC with per-character collection targets.
pub fn eval_cc(model: &EmbeddingModel, novel: &AnnotatedNovel) -> Result<f64> {
    eval_chapter_protocol(model, novel, false)
}

/// Mean AUC with single-quote targets (every held-out quote scored alone,
/// all of the query character's quotes counted as positives).
pub fn eval_cq(model: &EmbeddingModel, novel: &AnnotatedNovel) -> Result<f64> {
    eval_chapter_protocol(model, novel, true)
}

fn eval_chapter_protocol(model: &EmbeddingModel, novel: &AnnotatedNovel, single_targets: bool) -> Result<f64> {
    let explicit_chars: BTreeSet<&str> = novel
        .quotes
        .iter()
        .filter(|q| q.quote_type == QuoteType::Explicit)
        .filter_map(|q| q.speaker_id.as_deref())
        .collect();
    if explicit_chars.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "chapter protocols need at least 2 characters with explicit quotes, found {}",
            explicit_chars.len()
        )));
    }
    if novel.chapters.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "chapter protocols need at least 2 chapters, found {}",
            novel.chapters.len()
        )));
    }

    // Only gold-speaker quotes take part on either side.
    let spoken: Vec<(&str, &Quote)> = novel
        .quotes
        .iter()
        .filter_map(|q| q.speaker_id.as_deref().map(|s| (s, q)))
        .collect();

    let mut queries: BTreeMap<(&str, usize), Vec<&Quote>> = BTreeMap::new();
    for (speaker, quote) in &spoken {
        if quote.quote_type == QuoteType::Explicit {
            queries.entry((speaker, quote.chapter)).or_default().push(quote);
        }
    }

    let mut total = 0.0;
    let mut scored = 0usize;
    for ((character, chapter), query_quotes) in &queries {
        let q_vec = encode_quotes(model, novel, query_quotes)?;
        let held_out: Vec<(&str, &Quote)> =
            spoken.iter().filter(|(_, q)| q.chapter != *chapter).copied().collect();

        let value = if single_targets {
            let mut positives = Vec::new();
            let mut negatives = Vec::new();
            for (speaker, quote) in &held_out {
                let t_vec = encode_quotes(model, novel, &[quote])?;
                let sim = cosine(&q_vec, &t_vec)?;
                if speaker == character {
                    positives.push(sim);
                } else {
                    negatives.push(sim);
                }
            }
            if positives.is_empty() || negatives.is_empty() {
                continue;
            }
            auc_multi(&positives, &negatives)?
        } else {
            let mut by_char: BTreeMap<&str, Vec<&Quote>> = BTreeMap::new();
            for (speaker, quote) in &held_out {
                by_char.entry(speaker).or_default().push(quote);
            }
            let mut positive = None;
            let mut negatives = Vec::new();
            for (speaker, quotes) in &by_char {
                let sim = cosine(&q_vec, &encode_quotes(model, novel, quotes)?)?;
                if speaker == character {
                    positive = Some(sim);
                } else {
                    negatives.push(sim);
                }
            }
            let Some(pos) = positive else { continue };
            if negatives.is_empty() {
                continue;
            }
            auc(pos, &negatives)?
        };
        total += value;
        scored += 1;
    }

    if scored == 0 {
        return Err(Error::InvalidInput(
            "no scorable queries: every query character lacks held-out material or contrast".into(),
        ));
    }
    Ok(total / scored as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_novel;
    use crate::embed::features::feature_bucket;
    use crate::embed::{EncodeMode, FeatureConfig};

    /// Three chapters of twelve tokens; each character speaks in a private
    /// alphabet so styles are separable by construction.
    fn fixture() -> AnnotatedNovel {
        let words = [
            "aaaa", "aaaa", "aaaa", "then", "bbbb", "bbbb", "bbbb", "then", "cccc", "cccc", "cccc", "then",
            "aaaa", "aaaa", "aaaa", "then", "bbbb", "bbbb", "bbbb", "then", "cccc", "cccc", "cccc", "then",
            "aaaa", "aaaa", "aaaa", "then", "bbbb", "bbbb", "bbbb", "then", "cccc", "cccc", "cccc", "then",
        ];
        let text = words.join(" ");
        let anno = serde_json::json!({
            "id": "nov-av",
            "characters": [
                {"id": "al", "name": "Al"},
                {"id": "be", "name": "Be"},
                {"id": "cy", "name": "Cy"}
            ],
            "chapters": [
                {"start_tok": 0, "end_tok": 12},
                {"start_tok": 12, "end_tok": 24},
                {"start_tok": 24, "end_tok": 36}
            ],
            "quotes": [
                {"id": "q1", "start_tok": 0, "end_tok": 3, "type": "explicit", "speaker_id": "al", "chapter": 0},
                {"id": "q2", "start_tok": 4, "end_tok": 7, "type": "explicit", "speaker_id": "be", "chapter": 0},
                {"id": "q3", "start_tok": 8, "end_tok": 11, "type": "anaphoric", "speaker_id": "cy", "chapter": 0},
                {"id": "q4", "start_tok": 12, "end_tok": 15, "type": "implicit", "speaker_id": "al", "chapter": 1},
                {"id": "q5", "start_tok": 16, "end_tok": 19, "type": "explicit", "speaker_id": "be", "chapter": 1},
                {"id": "q6", "start_tok": 20, "end_tok": 23, "type": "explicit", "speaker_id": "cy", "chapter": 1},
                {"id": "q7", "start_tok": 24, "end_tok": 27, "type": "explicit", "speaker_id": "al", "chapter": 2},
                {"id": "q8", "start_tok": 28, "end_tok": 31, "type": "anaphoric", "speaker_id": "be", "chapter": 2},
                {"id": "q9", "start_tok": 32, "end_tok": 35, "type": "implicit", "chapter": 2}
            ],
            "mentions": []
        });
        parse_novel(&text, &anno.to_string()).unwrap()
    }

    /// Model routing each private alphabet to its own output coordinate.
    fn oracle_model(cfg: &FeatureConfig) -> EmbeddingModel {
        let dim = 4;
        let mut weights = vec![0.0; cfg.feature_dim * dim];
        for (coord, name) in [(0usize, "cg1:a"), (1, "cg1:b"), (2, "cg1:c")] {
            let (bucket, sign) = feature_bucket(name, cfg.feature_dim);
            weights[bucket as usize * dim + coord] = sign;
        }
        EmbeddingModel::with_weights(cfg.clone(), EncodeMode::Collection, dim, weights).unwrap()
    }

    #[test]
    fn quote_utterance_slices_and_rebases() {
        let novel = fixture();
        let u = novel.quote_utterance(&novel.quotes[0]);
        assert_eq!(u.text, "aaaa aaaa aaaa");
        assert_eq!(u.tokens.len(), 3);
        assert_eq!(u.tokens[0].char_start, 0);
        assert_eq!(&u.text[u.tokens[2].char_start..u.tokens[2].char_end], "aaaa");
        assert_eq!(u.speaker_id, "al");
    }

    #[test]
    fn oracle_model_scores_one_on_both_protocols() {
        let novel = fixture();
        let cfg = FeatureConfig { feature_dim: 1 << 12, ..FeatureConfig::default() };
        let model = oracle_model(&cfg);
        assert_eq!(eval_cc(&model, &novel).unwrap(), 1.0);
        assert_eq!(eval_cq(&model, &novel).unwrap(), 1.0);
    }

    #[test]
    fn zero_weight_model_scores_half() {
        let novel = fixture();
        let cfg = FeatureConfig { feature_dim: 1 << 10, ..FeatureConfig::default() };
        let model =
            EmbeddingModel::with_weights(cfg, EncodeMode::Collection, 4, vec![0.0; (1 << 10) * 4]).unwrap();
        assert_eq!(eval_cc(&model, &novel).unwrap(), 0.5);
        assert_eq!(eval_cq(&model, &novel).unwrap(), 0.5);
    }

    #[test]
    fn random_model_matches_brute_force() {
        let novel = fixture();
        let cfg = FeatureConfig { feature_dim: 1 << 12, ..FeatureConfig::default() };
        let model = EmbeddingModel::new_random(cfg, EncodeMode::Collection, 8, 41, 1e-2).unwrap();

        let dot = |a: &[f64], b: &[f64]| -> f64 {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                d / (na * nb)
            }
        };
        let pair_auc = |pos: &[f64], neg: &[f64]| -> f64 {
            let mut credit = 0.0;
            for p in pos {
                for n in neg {
                    if n < p {
                        credit += 1.0;
                    } else if n == p {
                        credit += 0.5;
                    }
                }
            }
            credit / (pos.len() * neg.len()) as f64
        };

        // Enumerate queries directly from the quote list.
        let chars = ["al", "be", "cy"];
        let mut cc_sum = 0.0;
        let mut cq_sum = 0.0;
        let mut n_queries = 0usize;
        for ch in 0..novel.chapters.len() {
            for c in chars {
                let q: Vec<&Quote> = novel
                    .quotes
                    .iter()
                    .filter(|q| q.chapter == ch && q.speaker_id.as_deref() == Some(c) && q.quote_type == QuoteType::Explicit)
                    .collect();
                if q.is_empty() {
                    continue;
                }
                let q_vec = encode_quotes(&model, &novel, &q).unwrap();
                let mut cc_pos = Vec::new();
                let mut cc_neg = Vec::new();
                let mut cq_pos = Vec::new();
                let mut cq_neg = Vec::new();
                for other in chars {
                    let held: Vec<&Quote> = novel
                        .quotes
                        .iter()
                        .filter(|q| q.chapter != ch && q.speaker_id.as_deref() == Some(other))
                        .collect();
                    if held.is_empty() {
                        continue;
                    }
                    let sim = dot(&q_vec, &encode_quotes(&model, &novel, &held).unwrap());
                    if other == c {
                        cc_pos.push(sim);
                    } else {
                        cc_neg.push(sim);
                    }
                    for single in &held {
                        let s = dot(&q_vec, &encode_quotes(&model, &novel, &[single]).unwrap());
                        if other == c {
                            cq_pos.push(s);
                        } else {
                            cq_neg.push(s);
                        }
                    }
                }
                assert_eq!(cc_pos.len(), 1);
                cc_sum += pair_auc(&cc_pos, &cc_neg);
                cq_sum += pair_auc(&cq_pos, &cq_neg);
                n_queries += 1;
            }
        }
        let cc_expected = cc_sum / n_queries as f64;
        let cq_expected = cq_sum / n_queries as f64;
        assert!((eval_cc(&model, &novel).unwrap() - cc_expected).abs() < 1e-12);
        assert!((eval_cq(&model, &novel).unwrap() - cq_expected).abs() < 1e-12);
    }

    #[test]
    fn query_without_held_out_material_is_skipped() {
        // Cy speaks only in chapter 1; that query has no positive target.
        let words = ["aaaa", "aaaa", "bbbb", "bbbb", "cccc", "cccc", "aaaa", "bbbb"];
        let text = words.join(" ");
        let anno = serde_json::json!({
            "id": "n",
            "characters": [
                {"id": "al", "name": "Al"}, {"id": "be", "name": "Be"}, {"id": "cy", "name": "Cy"}
            ],
            "chapters": [{"start_tok": 0, "end_tok": 4}, {"start_tok": 4, "end_tok": 8}],
            "quotes": [
                {"id": "q1", "start_tok": 0, "end_tok": 2, "type": "explicit", "speaker_id": "al", "chapter": 0},
                {"id": "q2", "start_tok": 2, "end_tok": 4, "type": "explicit", "speaker_id": "be", "chapter": 0},
                {"id": "q3", "start_tok": 4, "end_tok": 6, "type": "explicit", "speaker_id": "cy", "chapter": 1},
                {"id": "q4", "start_tok": 6, "end_tok": 7, "type": "implicit", "speaker_id": "al", "chapter": 1},
                {"id": "q5", "start_tok": 7, "end_tok": 8, "type": "implicit", "speaker_id": "be", "chapter": 1}
            ],
            "mentions": []
        });
        let novel = parse_novel(&text, &anno.to_string()).unwrap();
        let cfg = FeatureConfig { feature_dim: 1 << 12, ..FeatureConfig::default() };
        let model = oracle_model(&cfg);
        // Queries (al,0) and (be,0) are scorable; (cy,1) is skipped.
        assert_eq!(eval_cc(&model, &novel).unwrap(), 1.0);
    }

    #[test]
    fn too_few_chapters_or_characters_error() {
        let text = "aaaa bbbb";
        let one_chapter = serde_json::json!({
            "id": "n",
            "characters": [{"id": "al", "name": "Al"}, {"id": "be", "name": "Be"}],
            "chapters": [{"start_tok": 0, "end_tok": 2}],
            "quotes": [
                {"id": "q1", "start_tok": 0, "end_tok": 1, "type": "explicit", "speaker_id": "al", "chapter": 0},
                {"id": "q2", "start_tok": 1, "end_tok": 2, "type": "explicit", "speaker_id": "be", "chapter": 0}
            ],
            "mentions": []
        });
        let novel = parse_novel(text, &one_chapter.to_string()).unwrap();
        let cfg = FeatureConfig { feature_dim: 1 << 10, ..FeatureConfig::default() };
        let model = EmbeddingModel::new_random(cfg, EncodeMode::Collection, 4, 1, 1e-2).unwrap();
        let err = eval_cc(&model, &novel).unwrap_err();
        assert!(err.to_string().contains("2 chapters"), "{err}");

        let one_explicit = serde_json::json!({
            "id": "n",
            "characters": [{"id": "al", "name": "Al"}, {"id": "be", "name": "Be"}],
            "chapters": [{"start_tok": 0, "end_tok": 1}, {"start_tok": 1, "end_tok": 2}],
            "quotes": [
                {"id": "q1", "start_tok": 0, "end_tok": 1, "type": "explicit", "speaker_id": "al", "chapter": 0},
                {"id": "q2", "start_tok": 1, "end_tok": 2, "type": "implicit", "speaker_id": "be", "chapter": 1}
            ],
            "mentions": []
        });
        let novel = parse_novel(text, &one_explicit.to_string()).unwrap();
        let err = eval_cq(&model, &novel).unwrap_err();
        assert!(err.to_string().contains("explicit"), "{err}");
    }

    #[test]
    fn all_queries_skipped_is_an_error() {
        // Each character speaks in exactly one chapter: no query has a positive.
        let text = "aaaa aaaa bbbb bbbb";
        let anno = serde_json::json!({
            "id": "n",
            "characters": [{"id": "al", "name": "Al"}, {"id": "be", "name": "Be"}],
            "chapters": [{"start_tok": 0, "end_tok": 2}, {"start_tok": 2, "end_tok": 4}],
            "quotes": [
                {"id": "q1", "start_tok": 0, "end_tok": 2, "type": "explicit", "speaker_id": "al", "chapter": 0},
                {"id": "q2", "start_tok": 2, "end_tok": 4, "type": "explicit", "speaker_id": "be", "chapter": 1}
            ],
            "mentions": []
        });
        let novel = parse_novel(text, &anno.to_string()).unwrap();
        let cfg = FeatureConfig { feature_dim: 1 << 10, ..FeatureConfig::default() };
        let model = EmbeddingModel::new_random(cfg, EncodeMode::Collection, 4, 1, 1e-2).unwrap();
        let err = eval_cc(&model, &novel).unwrap_err();
        assert!(err.to_string().contains("no scorable"), "{err}");
    }
}
