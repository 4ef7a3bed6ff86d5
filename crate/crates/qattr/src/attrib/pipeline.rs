//! End-to-end attribution: character/quote vectors, per-quote prediction,
//! and accuracy tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attrib::candidates::{enumerate_candidates, is_unanswerable};
use crate::attrib::context::build_context;
use crate::attrib::scorer::{Arity, ScorerModel};
use crate::attrib::train::lookup_char_vector;
use crate::corpus::novel::{AnnotatedNovel, Quote, QuoteType};
use crate::embed::EmbeddingModel;
use crate::error::{Error, Result};
use crate::eval::novel_av::encode_quotes;
use crate::eval::report::Table;

/// Where character collections come from: gold explicit attributions, or
/// explicit quotes attributed by a context-only scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharSource {
    Gold,
    Predicted,
}

impl CharSource {
    pub fn name(self) -> &'static str {
        match self {
            CharSource::Gold => "gold",
            CharSource::Predicted => "predicted",
        }
    }
}

/// One vector per character: the encoded collection of their explicit
/// quotes, or the zero vector for characters never explicitly quoted.
pub fn build_character_embeddings(
    novel: &AnnotatedNovel,
    embedder: &EmbeddingModel,
    source: CharSource,
    scorer: Option<&ScorerModel>,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut collections: BTreeMap<&str, Vec<&Quote>> =
        novel.characters.iter().map(|c| (c.id.as_str(), Vec::new())).collect();
    match source {
        CharSource::Gold => {
            for q in &novel.quotes {
                if q.quote_type != QuoteType::Explicit {
                    continue;
                }
                if let Some(speaker) = &q.speaker_id {
                    collections.get_mut(speaker.as_str()).map(|v| v.push(q));
                }
            }
        }
        CharSource::Predicted => {
            let scorer = scorer.ok_or_else(|| {
                Error::InvalidInput("predicted character collections need a scorer".into())
            })?;
            if scorer.config.arity != Arity::ContextOnly {
                return Err(Error::InvalidInput(
                    "predicted character collections need a context-only scorer".into(),
                ));
            }
            let outcomes = attribute(scorer, novel, None)?;
            for (q, outcome) in novel.quotes.iter().zip(&outcomes) {
                if q.quote_type != QuoteType::Explicit {
                    continue;
                }
                if let Some(predicted) = &outcome.predicted {
                    if let Some(list) = collections.get_mut(predicted.as_str()) {
                        list.push(q);
                    }
                }
            }
        }
    }

    let mut out = BTreeMap::new();
    for (char_id, quotes) in collections {
        let v = if quotes.is_empty() {
            vec![0.0; embedder.dim]
        } else {
            encode_quotes(embedder, novel, &quotes)?
        };
        out.insert(char_id.to_string(), v);
    }
    Ok(out)
}

/// One vector per quote id, each quote encoded alone (u_q).
pub fn quote_vectors(novel: &AnnotatedNovel, embedder: &EmbeddingModel) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for q in &novel.quotes {
        out.insert(q.id.clone(), encode_quotes(embedder, novel, &[q])?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionOutcome {
    pub quote_id: String,
    pub quote_type: QuoteType,
    pub gold: Option<String>,
    /// None = abstain (empty candidate set).
    pub predicted: Option<String>,
    /// Gold speaker known and absent from the candidates.
    pub unanswerable: bool,
    pub candidates: usize,
}

/// Predict a speaker for every quote: argmax over candidate scores, ties
/// broken by earliest segment position; abstain when no candidate exists.
pub fn attribute(
    scorer: &ScorerModel,
    novel: &AnnotatedNovel,
    augment: Option<(&BTreeMap<String, Vec<f64>>, &BTreeMap<String, Vec<f64>>)>,
) -> Result<Vec<AttributionOutcome>> {
    if (scorer.config.arity == Arity::Augmented) != augment.is_some() {
        return Err(Error::InvalidInput(format!(
            "{} scorer attributing {} augmented inputs",
            scorer.config.arity.name(),
            if augment.is_some() { "with" } else { "without" }
        )));
    }
    let mut out = Vec::with_capacity(novel.quotes.len());
    for quote in &novel.quotes {
        let segment = build_context(novel, quote, scorer.config.window);
        let candidates = enumerate_candidates(novel, &segment);
        let predicted = if candidates.is_empty() {
            None
        } else {
            let h = scorer.encode_context(&segment);
            let u = match augment {
                Some((_, quote_vecs)) => Some(quote_vecs.get(&quote.id).cloned().ok_or_else(|| {
                    Error::InvalidInput(format!("no quote vector for \"{}\"", quote.id))
                })?),
                None => None,
            };
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, cand) in candidates.iter().enumerate() {
                let v = match augment {
                    Some((char_vecs, _)) => {
                        Some(lookup_char_vector(char_vecs, &cand.entity_id, scorer.config.char_dim)?)
                    }
                    None => None,
                };
                let s = scorer.score(&h, segment.quote_pos, cand, v.as_deref(), u.as_deref())?;
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            Some(candidates[best].entity_id.clone())
        };
        let unanswerable = quote
            .speaker_id
            .as_deref()
            .map(|gold| is_unanswerable(gold, &candidates))
            .unwrap_or(false);
        out.push(AttributionOutcome {
            quote_id: quote.id.clone(),
            quote_type: quote.quote_type,
            gold: quote.speaker_id.clone(),
            predicted,
            unanswerable,
            candidates: candidates.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypeAccuracy {
    pub evaluated: usize,
    pub correct: usize,
}

impl TypeAccuracy {
    fn add(&mut self, correct: bool) {
        self.evaluated += 1;
        self.correct += correct as usize;
    }

    /// None when no quote of this type was evaluated.
    pub fn accuracy(&self) -> Option<f64> {
        (self.evaluated > 0).then(|| self.correct as f64 / self.evaluated as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMetrics {
    pub overall: TypeAccuracy,
    pub non_explicit: TypeAccuracy,
    pub per_type: BTreeMap<QuoteType, TypeAccuracy>,
    pub unanswerable: usize,
    /// Novel groups that survived the unanswerable filter.
    pub novels: usize,
}

impl AttributionMetrics {
    pub fn unanswerable_fraction(&self) -> f64 {
        if self.overall.evaluated == 0 {
            0.0
        } else {
            self.unanswerable as f64 / self.overall.evaluated as f64
        }
    }
}

/// Pool outcome groups (one per novel) into accuracy by quote type.
///
/// Only quotes whose gold speaker utters at least `min_quotes` quotes in
/// their novel are evaluated; abstentions count as incorrect. A group is
/// dropped entirely when its unanswerable fraction exceeds
/// `max_unanswerable` (a fraction in [0, 1]).
pub fn evaluate_attribution(
    groups: &[&[AttributionOutcome]],
    min_quotes: usize,
    max_unanswerable: Option<f64>,
) -> AttributionMetrics {
    let mut metrics = AttributionMetrics {
        overall: TypeAccuracy::default(),
        non_explicit: TypeAccuracy::default(),
        per_type: QuoteType::ALL.iter().map(|t| (*t, TypeAccuracy::default())).collect(),
        unanswerable: 0,
        novels: 0,
    };
    for group in groups {
        let mut spoken: BTreeMap<&str, usize> = BTreeMap::new();
        for o in group.iter() {
            if let Some(gold) = &o.gold {
                *spoken.entry(gold.as_str()).or_default() += 1;
            }
        }
        let eligible: Vec<&AttributionOutcome> = group
            .iter()
            .filter(|o| o.gold.as_deref().is_some_and(|g| spoken[g] >= min_quotes))
            .collect();
        if eligible.is_empty() {
            continue;
        }
        if let Some(threshold) = max_unanswerable {
            let frac = eligible.iter().filter(|o| o.unanswerable).count() as f64 / eligible.len() as f64;
            if frac > threshold {
                continue;
            }
        }
        metrics.novels += 1;
        for o in eligible {
            let correct = o.predicted.as_deref() == o.gold.as_deref();
            metrics.overall.add(correct);
            if o.quote_type != QuoteType::Explicit {
                metrics.non_explicit.add(correct);
            }
            metrics.per_type.get_mut(&o.quote_type).expect("all types present").add(correct);
            metrics.unanswerable += o.unanswerable as usize;
        }
    }
    metrics
}

fn pct(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.1}", 100.0 * v),
        None => "-".to_string(),
    }
}

/// Accuracy table, one row per labeled run.
pub fn metrics_table(rows: &[(&str, &AttributionMetrics)]) -> Table {
    let mut t = Table::new(
        "Attribution accuracy (%)",
        &["run", "overall", "non-explicit", "explicit", "anaphoric", "implicit", "unanswerable %"],
    );
    for (label, m) in rows {
        t.push_row(vec![
            label.to_string(),
            pct(m.overall.accuracy()),
            pct(m.non_explicit.accuracy()),
            pct(m.per_type[&QuoteType::Explicit].accuracy()),
            pct(m.per_type[&QuoteType::Anaphoric].accuracy()),
            pct(m.per_type[&QuoteType::Implicit].accuracy()),
            format!("{:.1}", 100.0 * m.unanswerable_fraction()),
        ])
        .expect("fixed arity");
    }
    t
}

pub const ABSTAIN_LABEL: &str = "ABSTAIN";

/// One row per quote: id, prediction (or ABSTAIN), gold, type, flag.
pub fn predictions_table(outcomes: &[AttributionOutcome]) -> Table {
    let mut t = Table::new("Predictions", &["quote", "predicted", "gold", "type", "unanswerable"]);
    for o in outcomes {
        t.push_row(vec![
            o.quote_id.clone(),
            o.predicted.clone().unwrap_or_else(|| ABSTAIN_LABEL.to_string()),
            o.gold.clone().unwrap_or_default(),
            o.quote_type.label().to_string(),
            o.unanswerable.to_string(),
        ])
        .expect("fixed arity");
    }
    t
}
