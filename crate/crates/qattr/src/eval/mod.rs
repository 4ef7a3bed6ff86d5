//! Authorship-verification scoring: per-query AUC within segments,
//! per-play aggregation, novel protocols, and significance testing.

pub mod auc;
pub mod novel_av;
pub mod report;
pub mod ttest;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Play;
use crate::dataset::{QuerySet, SegmentRef, SegmentTable, UtteranceCollection};
use crate::embed::{cosine, encode_collection, EmbeddingModel};
use crate::error::{Error, Result};

pub use auc::{auc, auc_multi};
pub use novel_av::{eval_cc, eval_cq};
pub use ttest::{paired_ttest, TTestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Scene,
    Play,
    CC,
    CQ,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Scene => "scene",
            Protocol::Play => "play",
            Protocol::CC => "CC",
            Protocol::CQ => "CQ",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayAuc {
    pub play_id: String,
    pub title: String,
    pub author: String,
    pub segments_scored: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub protocol: Protocol,
    /// Mean AUC per scored segment, keyed by segment id, in corpus order.
    pub per_segment: Vec<(String, f64)>,
    /// Per-play mean over that play's segments.
    pub per_play: Vec<PlayAuc>,
    /// Mean of per-play AUCs.
    pub mean: f64,
    /// Population standard deviation over plays.
    pub std: f64,
}

/// Stable identifier of a collection inside a vector file:
/// `<play_id>:<segment_index>|<character_id>|<query|target>`.
pub fn collection_vector_id(segment: &SegmentRef, c: &UtteranceCollection) -> String {
    format!("{}|{}|{}", segment.id(), c.character_id, c.origin.name())
}

/// Mean AUC over queries given already-encoded collections. Each query is
/// scored against every target; its positive is the single target sharing
/// its character id.
pub fn eval_collections(queries: &[(String, Vec<f64>)], targets: &[(String, Vec<f64>)]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::InvalidInput("query set has no queries".into()));
    }
    let mut total = 0.0;
    for (character, q_vec) in queries {
        let mut positive: Option<f64> = None;
        let mut negatives = Vec::with_capacity(targets.len().saturating_sub(1));
        for (target_char, t_vec) in targets {
            let sim = cosine(q_vec, t_vec)?;
            if target_char == character {
                if positive.is_some() {
                    return Err(Error::InvalidInput(format!(
                        "character \"{character}\" has two targets in one segment"
                    )));
                }
                positive = Some(sim);
            } else {
                negatives.push(sim);
            }
        }
        let Some(pos) = positive else {
            return Err(Error::InvalidInput(format!("query character \"{character}\" has no target")));
        };
        total += auc::auc(pos, &negatives)?;
    }
    Ok(total / queries.len() as f64)
}

/// Encode and score one query set with the model.
pub fn eval_segment(model: &EmbeddingModel, segment: &crate::corpus::Segment, queryset: &QuerySet) -> Result<f64> {
    let encode = |c: &UtteranceCollection| -> Result<(String, Vec<f64>)> {
        let utts = c.utterances(segment);
        Ok((c.character_id.clone(), encode_collection(model, &utts)?))
    };
    let queries: Vec<_> = queryset.queries.iter().map(encode).collect::<Result<_>>()?;
    let targets: Vec<_> = queryset.targets.iter().map(encode).collect::<Result<_>>()?;
    eval_collections(&queries, &targets)
}

/// Score a whole corpus with any vector source; `lookup` supplies the
/// vector of one collection (model encoding, or an imported vector file).
pub fn eval_corpus_with<F>(
    mut lookup: F,
    plays: &[Play],
    querysets: &[QuerySet],
    protocol: Protocol,
) -> Result<AucReport>
where
    F: FnMut(&SegmentRef, &UtteranceCollection) -> Result<Vec<f64>>,
{
    if querysets.is_empty() {
        return Err(Error::InvalidInput("no query sets to evaluate".into()));
    }
    let mut per_segment = Vec::with_capacity(querysets.len());
    let mut by_play: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for qs in querysets {
        let mut queries = Vec::with_capacity(qs.queries.len());
        for c in &qs.queries {
            queries.push((c.character_id.clone(), lookup(&qs.segment, c)?));
        }
        let mut targets = Vec::with_capacity(qs.targets.len());
        for c in &qs.targets {
            targets.push((c.character_id.clone(), lookup(&qs.segment, c)?));
        }
        let seg_auc = eval_collections(&queries, &targets)?;
        per_segment.push((qs.segment.id(), seg_auc));
        by_play.entry(qs.segment.play_id.as_str()).or_default().push(seg_auc);
    }

    let meta: BTreeMap<&str, (&str, &str)> = plays
        .iter()
        .map(|p| (p.id.as_str(), (p.title.as_str(), p.author.as_str())))
        .collect();
    let mut per_play = Vec::with_capacity(by_play.len());
    for (play_id, aucs) in &by_play {
        let (title, author) = meta.get(play_id).copied().unwrap_or(("?", "?"));
        per_play.push(PlayAuc {
            play_id: play_id.to_string(),
            title: title.to_string(),
            author: author.to_string(),
            segments_scored: aucs.len(),
            auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
        });
    }
    let mean = per_play.iter().map(|p| p.auc).sum::<f64>() / per_play.len() as f64;
    let var = per_play.iter().map(|p| (p.auc - mean) * (p.auc - mean)).sum::<f64>() / per_play.len() as f64;
    Ok(AucReport { protocol, per_segment, per_play, mean, std: var.sqrt() })
}

/// Score a corpus by encoding every collection with the model.
pub fn eval_corpus(
    model: &EmbeddingModel,
    plays: &[Play],
    table: &SegmentTable,
    querysets: &[QuerySet],
    protocol: Protocol,
) -> Result<AucReport> {
    let by_id: BTreeMap<String, usize> = table
        .entries
        .iter()
        .enumerate()
        .map(|(i, (seg_ref, _))| (seg_ref.id(), i))
        .collect();
    eval_corpus_with(
        |seg_ref, c| {
            let idx = by_id.get(&seg_ref.id()).ok_or_else(|| {
                Error::InvalidInput(format!("query set references unknown segment {}", seg_ref.id()))
            })?;
            let segment = &table.entries[*idx].1;
            encode_collection(model, &c.utterances(segment))
        },
        plays,
        querysets,
        protocol,
    )
}

/// Score a corpus from an imported vector file keyed by
/// `collection_vector_id`.
pub fn eval_corpus_vectors(
    vectors: &BTreeMap<String, Vec<f64>>,
    plays: &[Play],
    querysets: &[QuerySet],
    protocol: Protocol,
) -> Result<AucReport> {
    eval_corpus_with(
        |seg_ref, c| {
            let id = collection_vector_id(seg_ref, c);
            vectors
                .get(&id)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("vector file has no entry for \"{id}\"")))
        },
        plays,
        querysets,
        protocol,
    )
}
