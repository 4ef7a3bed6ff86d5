//! Gradient-descent training of the projection with the segment-restricted
//! contrastive objective.
//!
//! Each epoch resamples 8/8 query/target collections per eligible character
//! (seeded per epoch and segment), shuffles the resulting instances, and
//! steps on batches of `batch_segments` segments: 8 for scene training,
//! 1 for play training. Every contrastive batch contains only collections
//! from a single segment, which is what restricts negatives.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Segment;
use crate::dataset::{build_train_instances, epoch_seed, SegmentTable, SegmentUnit, TrainInstance};
use crate::embed::features::{extract_features, sum_features, SparseVec};
use crate::embed::supcon::supcon_loss;
use crate::embed::{l2_normalize_dense, EmbeddingModel, EncodeMode};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, SeedPart};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub temperature: f64,
    /// Segments per gradient step.
    pub batch_segments: usize,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            learning_rate: 2e-5,
            epochs: 20,
            temperature: 0.1,
            batch_segments: 8,
            seed: 0,
        }
    }
}

impl TrainSettings {
    /// Paper batch shape: 8 scenes, or 1 play when training on whole plays.
    pub fn for_unit(unit: SegmentUnit) -> Self {
        let batch_segments = match unit {
            SegmentUnit::Scene => 8,
            SegmentUnit::Play => 1,
        };
        TrainSettings { batch_segments, ..TrainSettings::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidInput(format!("bad learning rate {}", self.learning_rate)));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidInput(format!("bad temperature {}", self.temperature)));
        }
        if self.batch_segments == 0 {
            return Err(Error::InvalidInput("batch_segments must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean contrastive loss per epoch, one entry per epoch.
    pub epoch_mean_loss: Vec<f64>,
    pub instances_per_epoch: Vec<usize>,
}

/// Saved forward pass of one collection, enough to backpropagate.
enum Forward {
    Zero,
    Collection {
        xn: SparseVec,
        e: Vec<f64>,
        z_norm: f64,
    },
    MeanPool {
        /// Per utterance: normalized features, normalized projection, ||z||.
        parts: Vec<(SparseVec, Vec<f64>, f64)>,
        n_utterances: usize,
        e: Vec<f64>,
        c_norm: f64,
    },
}

impl Forward {
    fn embedding(&self, dim: usize) -> Vec<f64> {
        match self {
            Forward::Zero => vec![0.0; dim],
            Forward::Collection { e, .. } => e.clone(),
            Forward::MeanPool { e, .. } => e.clone(),
        }
    }
}

fn forward_collection(model: &EmbeddingModel, segment: &Segment, ordinals: &[usize]) -> Forward {
    let utterances: Vec<_> = ordinals.iter().map(|&i| &segment.utterances[i]).collect();
    match model.mode {
        EncodeMode::Collection => {
            let mut xn = sum_features(&utterances, &model.feature_config);
            if xn.is_zero() {
                return Forward::Zero;
            }
            xn.l2_normalize();
            let mut e = model.project(&xn);
            let z_norm = l2_normalize_dense(&mut e);
            if z_norm == 0.0 {
                return Forward::Zero;
            }
            Forward::Collection { xn, e, z_norm }
        }
        EncodeMode::MeanPool => {
            let mut parts = Vec::with_capacity(utterances.len());
            let mut c = vec![0.0; model.dim];
            for u in &utterances {
                let mut xn = extract_features(u, &model.feature_config);
                if xn.is_zero() {
                    continue;
                }
                xn.l2_normalize();
                let mut e_u = model.project(&xn);
                let z_norm = l2_normalize_dense(&mut e_u);
                if z_norm == 0.0 {
                    continue;
                }
                for (ci, ei) in c.iter_mut().zip(&e_u) {
                    *ci += ei;
                }
                parts.push((xn, e_u, z_norm));
            }
            if parts.is_empty() {
                return Forward::Zero;
            }
            let n_utterances = utterances.len();
            let inv = 1.0 / n_utterances as f64;
            for ci in &mut c {
                *ci *= inv;
            }
            let mut e = c;
            let c_norm = l2_normalize_dense(&mut e);
            if c_norm == 0.0 {
                return Forward::Zero;
            }
            Forward::MeanPool { parts, n_utterances, e, c_norm }
        }
    }
}

/// d(loss)/dz for z the pre-normalization vector, given e = z/||z||.
fn back_through_normalize(e: &[f64], norm: f64, de: &[f64]) -> Vec<f64> {
    let dot: f64 = e.iter().zip(de).map(|(a, b)| a * b).sum();
    e.iter().zip(de).map(|(ei, di)| (di - ei * dot) / norm).collect()
}

fn accumulate_outer(grads: &mut BTreeMap<u32, Vec<f64>>, dim: usize, x: &SparseVec, dz: &[f64], scale: f64) {
    for (&f, &xv) in x.idx.iter().zip(&x.val) {
        let col = grads.entry(f).or_insert_with(|| vec![0.0; dim]);
        let s = scale * xv;
        for (c, d) in col.iter_mut().zip(dz) {
            *c += s * d;
        }
    }
}

fn backward_collection(
    model: &EmbeddingModel,
    fwd: &Forward,
    de: &[f64],
    scale: f64,
    grads: &mut BTreeMap<u32, Vec<f64>>,
) {
    match fwd {
        Forward::Zero => {}
        Forward::Collection { xn, e, z_norm } => {
            let dz = back_through_normalize(e, *z_norm, de);
            accumulate_outer(grads, model.dim, xn, &dz, scale);
        }
        Forward::MeanPool { parts, n_utterances, e, c_norm } => {
            let dc = back_through_normalize(e, *c_norm, de);
            let inv = 1.0 / *n_utterances as f64;
            let de_u: Vec<f64> = dc.iter().map(|d| d * inv).collect();
            for (xn, e_u, z_norm) in parts {
                let dz = back_through_normalize(e_u, *z_norm, &de_u);
                accumulate_outer(grads, model.dim, xn, &dz, scale);
            }
        }
    }
}

fn instance_collections<'a>(instance: &'a TrainInstance) -> (Vec<&'a crate::dataset::UtteranceCollection>, Vec<usize>) {
    let mut chars: Vec<&str> = Vec::new();
    let mut label_of = |id: &'a str| -> usize {
        match chars.iter().position(|c| *c == id) {
            Some(i) => i,
            None => {
                chars.push(id);
                chars.len() - 1
            }
        }
    };
    let mut collections = Vec::with_capacity(instance.queries.len() + instance.targets.len());
    let mut labels = Vec::with_capacity(collections.capacity());
    for c in instance.queries.iter().chain(instance.targets.iter()) {
        labels.push(label_of(&c.character_id));
        collections.push(c);
    }
    (collections, labels)
}

/// Contrastive loss of one training instance under the current weights.
pub fn instance_loss(
    model: &EmbeddingModel,
    segment: &Segment,
    instance: &TrainInstance,
    temperature: f64,
) -> Result<f64> {
    let (collections, labels) = instance_collections(instance);
    let embeddings: Vec<Vec<f64>> = collections
        .iter()
        .map(|c| forward_collection(model, segment, &c.ordinals).embedding(model.dim))
        .collect();
    let (loss, _) = supcon_loss(&embeddings, &labels, temperature)?;
    Ok(loss)
}

/// Loss and analytic gradient with respect to the projection weights,
/// returned as per-feature-column gradients (column index -> d-vector).
pub fn instance_gradient(
    model: &EmbeddingModel,
    segment: &Segment,
    instance: &TrainInstance,
    temperature: f64,
) -> Result<(f64, BTreeMap<u32, Vec<f64>>)> {
    let mut grads = BTreeMap::new();
    let loss = backward_instance(model, segment, instance, temperature, 1.0, &mut grads)?;
    Ok((loss, grads))
}

fn backward_instance(
    model: &EmbeddingModel,
    segment: &Segment,
    instance: &TrainInstance,
    temperature: f64,
    scale: f64,
    grads: &mut BTreeMap<u32, Vec<f64>>,
) -> Result<f64> {
    let (collections, labels) = instance_collections(instance);
    let forwards: Vec<Forward> = collections
        .iter()
        .map(|c| forward_collection(model, segment, &c.ordinals))
        .collect();
    let embeddings: Vec<Vec<f64>> = forwards.iter().map(|f| f.embedding(model.dim)).collect();
    let (loss, de) = supcon_loss(&embeddings, &labels, temperature)?;
    for (fwd, de_i) in forwards.iter().zip(&de) {
        backward_collection(model, fwd, de_i, scale, grads);
    }
    Ok(loss)
}

fn apply_gradients(model: &mut EmbeddingModel, grads: &BTreeMap<u32, Vec<f64>>, lr: f64) {
    for (&f, g) in grads {
        let col = model.column_mut(f as usize);
        for (w, gi) in col.iter_mut().zip(g) {
            *w -= lr * gi;
        }
    }
}

/// Train the projection in place. Returns the per-epoch mean loss history.
pub fn train(model: &mut EmbeddingModel, table: &SegmentTable, settings: &TrainSettings) -> Result<TrainReport> {
    settings.validate()?;
    let mut report = TrainReport { epoch_mean_loss: Vec::new(), instances_per_epoch: Vec::new() };

    for epoch in 0..settings.epochs {
        let mut pairs: Vec<(usize, TrainInstance)> = Vec::new();
        for (idx, (seg_ref, segment)) in table.entries.iter().enumerate() {
            for inst in build_train_instances(seg_ref, segment, epoch_seed(settings.seed, epoch, seg_ref)) {
                pairs.push((idx, inst));
            }
        }
        if pairs.is_empty() {
            return Err(Error::InvalidInput(
                "no training instances: no character utters enough lines in any segment".into(),
            ));
        }
        let mut order_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, [SeedPart::Str("order"), SeedPart::Num(epoch as u64)]));
        pairs.shuffle(&mut order_rng);

        let mut loss_sum = 0.0;
        for chunk in pairs.chunks(settings.batch_segments) {
            let scale = 1.0 / chunk.len() as f64;
            let mut grads: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            for (seg_idx, inst) in chunk {
                let segment = &table.entries[*seg_idx].1;
                loss_sum += backward_instance(model, segment, inst, settings.temperature, scale, &mut grads)?;
            }
            if settings.learning_rate != 0.0 {
                apply_gradients(model, &grads, settings.learning_rate);
            }
        }
        report.epoch_mean_loss.push(loss_sum / pairs.len() as f64);
        report.instances_per_epoch.push(pairs.len());
    }
    Ok(report)
}
