//! Corpus summary statistics per split.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Play;
use crate::dataset::{unit_segments, QuerySet, SegmentUnit, Split};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SplitStats {
    pub segments: usize,
    pub utterances: usize,
    pub queries: usize,
    /// Mean number of targets per query set (0 when the split has none).
    pub mean_targets_per_query: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub unit: SegmentUnit,
    pub per_split: BTreeMap<Split, SplitStats>,
}

/// Count segments and utterances contributed under `unit`, plus query-set
/// sizes, for each split.
pub fn corpus_stats(
    plays_per_split: &[(Split, &[Play])],
    querysets_per_split: &[(Split, &[QuerySet])],
    unit: SegmentUnit,
) -> CorpusStats {
    let mut per_split: BTreeMap<Split, SplitStats> = BTreeMap::new();
    for &split in &Split::ALL {
        per_split.insert(split, SplitStats::default());
    }
    for (split, plays) in plays_per_split {
        let entry = per_split.entry(*split).or_default();
        for play in plays.iter() {
            let Some(segments) = unit_segments(play, unit) else {
                continue;
            };
            entry.segments += segments.len();
            entry.utterances += segments.iter().map(|s| s.utterances.len()).sum::<usize>();
        }
    }
    for (split, querysets) in querysets_per_split {
        let entry = per_split.entry(*split).or_default();
        entry.queries = querysets.iter().map(|qs| qs.queries.len()).sum();
        if !querysets.is_empty() {
            let total_targets: usize = querysets.iter().map(|qs| qs.targets.len()).sum();
            entry.mean_targets_per_query = total_targets as f64 / querysets.len() as f64;
        }
    }
    CorpusStats { unit, per_split }
}
