//! Dataset construction for authorship verification: play-level corpus
//! splits, per-segment evaluation query/target sets, and per-epoch
//! resampled training instances.
//!
//! All sampling is a pure function of (seed, corpus content). Collections
//! store utterance ordinals into their segment rather than copies of the
//! utterances; `UtteranceCollection::utterances` resolves them.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index::sample as index_sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Play, Segment, SegmentKind, Utterance};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, SeedPart};

/// Minimum lines a character must utter in a segment to generate a
/// training instance.
pub const TRAIN_MIN_UTTERANCES: usize = 16;
/// Utterances sampled per training collection.
pub const TRAIN_COLLECTION_SIZE: usize = 8;
/// Minimum utterances for a character to appear as an evaluation query.
pub const EVAL_MIN_UTTERANCES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unit of comparison: scene-level segments or whole plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentUnit {
    Scene,
    Play,
}

impl SegmentUnit {
    pub fn name(self) -> &'static str {
        match self {
            SegmentUnit::Scene => "scene",
            SegmentUnit::Play => "play",
        }
    }
}

impl fmt::Display for SegmentUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Stable pointer to one segment of one play.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentRef {
    pub play_id: String,
    pub segment_index: usize,
    pub label: String,
}

impl SegmentRef {
    pub fn id(&self) -> String {
        format!("{}:{}", self.play_id, self.segment_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Query,
    Target,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Query => "query",
            Origin::Target => "target",
        }
    }
}

/// A set of utterances by one character within one segment, identified by
/// ordinal into the segment's utterance list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceCollection {
    pub character_id: String,
    pub origin: Origin,
    /// Sorted, distinct indices into the owning segment's utterances.
    pub ordinals: Vec<usize>,
}

impl UtteranceCollection {
    pub fn utterances<'a>(&self, segment: &'a Segment) -> Vec<&'a Utterance> {
        self.ordinals.iter().map(|&i| &segment.utterances[i]).collect()
    }
}

/// Evaluation material for one segment: one query per eligible character
/// and one target per participating character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    pub segment: SegmentRef,
    pub queries: Vec<UtteranceCollection>,
    pub targets: Vec<UtteranceCollection>,
}

/// One training batch: disjoint 8-utterance query/target collections for
/// every character with at least 16 lines in the segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainInstance {
    pub segment: SegmentRef,
    pub queries: Vec<UtteranceCollection>,
    pub targets: Vec<UtteranceCollection>,
}

/// Play-level corpus split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSplits {
    pub train: Vec<Play>,
    pub val: Vec<Play>,
    pub test: Vec<Play>,
}

impl CorpusSplits {
    pub fn get(&self, split: Split) -> &[Play] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Split, &[Play])> {
        Split::ALL.iter().map(move |&s| (s, self.get(s)))
    }
}

/// Assign whole plays to train/val/test with floor-rounded sizes and the
/// remainder going to train. Plays are sorted by id before shuffling so the
/// result depends only on (seed, corpus content), not input order.
pub fn split_corpus(mut plays: Vec<Play>, ratios: (f64, f64, f64), seed: u64) -> Result<CorpusSplits> {
    let (r_train, r_val, r_test) = ratios;
    let sum = r_train + r_val + r_test;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("split ratios sum to {sum}, expected 1")));
    }
    if r_train < 0.0 || r_val < 0.0 || r_test < 0.0 {
        return Err(Error::InvalidInput("split ratios must be non-negative".into()));
    }
    let n = plays.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 plays to split, got {n}")));
    }

    plays.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in plays.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(Error::InvalidInput(format!("duplicate play id \"{}\"", pair[0].id)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, [SeedPart::Str("split")]));
    plays.shuffle(&mut rng);

    let n_val = (n as f64 * r_val).floor() as usize;
    let n_test = (n as f64 * r_test).floor() as usize;
    let n_train = n - n_val - n_test;

    let test = plays.split_off(n_train + n_val);
    let val = plays.split_off(n_train);
    Ok(CorpusSplits { train: plays, val, test })
}

/// The segments a play contributes under the given unit. Scene unit uses the
/// play's parsed segments and drops plays without scene or act tags; Play
/// unit merges everything into a single whole-play segment.
pub fn unit_segments(play: &Play, unit: SegmentUnit) -> Option<Cow<'_, [Segment]>> {
    match unit {
        SegmentUnit::Scene => {
            if play.scene_split_eligible {
                Some(Cow::Borrowed(play.segments.as_slice()))
            } else {
                None
            }
        }
        SegmentUnit::Play => Some(Cow::Owned(vec![merge_play_segments(play)])),
    }
}

/// Concatenate all segments of a play into one whole-play segment,
/// renumbering utterance ordinals.
pub fn merge_play_segments(play: &Play) -> Segment {
    let mut merged = Segment {
        kind: SegmentKind::WholePlay,
        label: "play".to_string(),
        utterances: Vec::with_capacity(play.utterance_count()),
        characters: Default::default(),
    };
    for seg in &play.segments {
        for u in &seg.utterances {
            let mut u = u.clone();
            u.segment_ordinal = merged.utterances.len();
            merged.characters.insert(u.speaker_id.clone());
            merged.utterances.push(u);
        }
    }
    merged
}

/// Owned table of (reference, segment) pairs for one set of plays under one
/// unit, in corpus order. Built once; training and evaluation index into it.
#[derive(Debug, Clone)]
pub struct SegmentTable {
    pub entries: Vec<(SegmentRef, Segment)>,
}

pub fn build_segment_table(plays: &[Play], unit: SegmentUnit) -> SegmentTable {
    let mut entries = Vec::new();
    for play in plays {
        let Some(segments) = unit_segments(play, unit) else {
            continue;
        };
        for (idx, seg) in segments.iter().enumerate() {
            let seg_ref = SegmentRef {
                play_id: play.id.clone(),
                segment_index: idx,
                label: seg.label.clone(),
            };
            entries.push((seg_ref, seg.clone()));
        }
    }
    SegmentTable { entries }
}

/// Group utterance ordinals by speaker, in speaker order.
fn ordinals_by_character(segment: &Segment) -> BTreeMap<&str, Vec<usize>> {
    let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, u) in segment.utterances.iter().enumerate() {
        map.entry(u.speaker_id.as_str()).or_default().push(i);
    }
    map
}

/// Build the evaluation query set of one segment. Characters with at least
/// two utterances get half (floor) as a query and the rest as their target;
/// characters with a single utterance only contribute a target. Returns
/// None when fewer than two characters are query-eligible.
pub fn build_eval_queryset(seg_ref: &SegmentRef, segment: &Segment, seed: u64) -> Option<QuerySet> {
    let by_char = ordinals_by_character(segment);
    let eligible = by_char
        .values()
        .filter(|ords| ords.len() >= EVAL_MIN_UTTERANCES)
        .count();
    if eligible < 2 {
        return None;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::new();
    let mut targets = Vec::new();
    for (character, ords) in &by_char {
        let n = ords.len();
        if n >= EVAL_MIN_UTTERANCES {
            let k = n / 2;
            let mut picked = index_sample(&mut rng, n, k).into_vec();
            picked.sort_unstable();
            let mut in_query = vec![false; n];
            for &i in &picked {
                in_query[i] = true;
            }
            queries.push(UtteranceCollection {
                character_id: character.to_string(),
                origin: Origin::Query,
                ordinals: picked.iter().map(|&i| ords[i]).collect(),
            });
            targets.push(UtteranceCollection {
                character_id: character.to_string(),
                origin: Origin::Target,
                ordinals: (0..n).filter(|&i| !in_query[i]).map(|i| ords[i]).collect(),
            });
        } else {
            targets.push(UtteranceCollection {
                character_id: character.to_string(),
                origin: Origin::Target,
                ordinals: ords.clone(),
            });
        }
    }
    Some(QuerySet { segment: seg_ref.clone(), queries, targets })
}

/// Build training instances for one segment: an 8/8 disjoint query/target
/// pair for every character with at least 16 utterances. Yields at most one
/// instance; none when no character qualifies.
pub fn build_train_instances(seg_ref: &SegmentRef, segment: &Segment, seed: u64) -> Vec<TrainInstance> {
    let by_char = ordinals_by_character(segment);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::new();
    let mut targets = Vec::new();
    for (character, ords) in &by_char {
        let n = ords.len();
        if n < TRAIN_MIN_UTTERANCES {
            continue;
        }
        let picked = index_sample(&mut rng, n, 2 * TRAIN_COLLECTION_SIZE).into_vec();
        let take = |idx: &[usize], origin: Origin| {
            let mut ordinals: Vec<usize> = idx.iter().map(|&i| ords[i]).collect();
            ordinals.sort_unstable();
            UtteranceCollection { character_id: character.to_string(), origin, ordinals }
        };
        queries.push(take(&picked[..TRAIN_COLLECTION_SIZE], Origin::Query));
        targets.push(take(&picked[TRAIN_COLLECTION_SIZE..], Origin::Target));
    }
    if queries.is_empty() {
        return Vec::new();
    }
    vec![TrainInstance { segment: seg_ref.clone(), queries, targets }]
}

/// Seed for a segment's evaluation sampling.
pub fn eval_seed(base: u64, unit: SegmentUnit, seg_ref: &SegmentRef) -> u64 {
    derive_seed(
        base,
        [
            SeedPart::Str("eval"),
            SeedPart::Str(unit.name()),
            SeedPart::Str(&seg_ref.play_id),
            SeedPart::Num(seg_ref.segment_index as u64),
        ],
    )
}

/// Seed for a segment's training resample in one epoch.
pub fn epoch_seed(base: u64, epoch: usize, seg_ref: &SegmentRef) -> u64 {
    derive_seed(
        base,
        [
            SeedPart::Str("train"),
            SeedPart::Num(epoch as u64),
            SeedPart::Str(&seg_ref.play_id),
            SeedPart::Num(seg_ref.segment_index as u64),
        ],
    )
}

/// Query sets for every segment in the table; the second value counts
/// segments skipped for having fewer than two query-eligible characters.
pub fn build_eval_querysets(table: &SegmentTable, unit: SegmentUnit, base_seed: u64) -> (Vec<QuerySet>, usize) {
    let mut querysets = Vec::new();
    let mut skipped = 0;
    for (seg_ref, segment) in &table.entries {
        match build_eval_queryset(seg_ref, segment, eval_seed(base_seed, unit, seg_ref)) {
            Some(qs) => querysets.push(qs),
            None => skipped += 1,
        }
    }
    (querysets, skipped)
}

/// Fresh training instances for one epoch over the whole table.
pub fn build_epoch_instances(table: &SegmentTable, base_seed: u64, epoch: usize) -> Vec<TrainInstance> {
    let mut out = Vec::new();
    for (seg_ref, segment) in &table.entries {
        out.extend(build_train_instances(seg_ref, segment, epoch_seed(base_seed, epoch, seg_ref)));
    }
    out
}

/// One line of the audit file: a single collection with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub split: Split,
    pub segment: String,
    pub character: String,
    pub origin: Origin,
    pub ordinals: Vec<usize>,
}

fn collection_record(split: Split, segment: &SegmentRef, c: &UtteranceCollection) -> AuditRecord {
    AuditRecord {
        split,
        segment: segment.id(),
        character: c.character_id.clone(),
        origin: c.origin,
        ordinals: c.ordinals.clone(),
    }
}

/// Serialize query sets as one JSON record per collection, one per line.
pub fn querysets_to_jsonl(split: Split, querysets: &[QuerySet]) -> String {
    let mut out = String::new();
    for qs in querysets {
        for c in qs.queries.iter().chain(qs.targets.iter()) {
            let record = collection_record(split, &qs.segment, c);
            out.push_str(&serde_json::to_string(&record).expect("audit record serializes"));
            out.push('\n');
        }
    }
    out
}

/// Serialize training instances in the same record format.
pub fn instances_to_jsonl(split: Split, instances: &[TrainInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        for c in inst.queries.iter().chain(inst.targets.iter()) {
            let record = collection_record(split, &inst.segment, c);
            out.push_str(&serde_json::to_string(&record).expect("audit record serializes"));
            out.push('\n');
        }
    }
    out
}

/// Parse one audit line back into a record.
pub fn parse_audit_line(line: &str) -> Result<AuditRecord> {
    serde_json::from_str(line).map_err(|e| Error::Format(format!("audit record: {e}")))
}
