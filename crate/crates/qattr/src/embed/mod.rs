//! Character embedding model: hashed stylometric features through one
//! learned linear projection onto the unit sphere.

pub mod features;
pub mod function_words;
pub mod supcon;
pub mod train;
pub mod vectors;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Utterance;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, SeedPart};

pub use features::{extract_features, feature_bucket, sum_features, FeatureConfig, SparseVec};
pub use supcon::supcon_loss;
pub use train::{train, TrainReport, TrainSettings};
pub use vectors::{load_vectors, save_vectors, CharacterVector};

/// Default output dimension d.
pub const DEFAULT_DIM: usize = 512;
/// Default uniform init half-width for projection weights.
pub const DEFAULT_INIT_SCALE: f64 = 1e-3;

const MODEL_MAGIC: &[u8] = b"QAEMB1\n";

/// How a collection of utterances becomes one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodeMode {
    /// Sum feature counts over the collection, normalize, project, normalize.
    Collection,
    /// Project each utterance separately, normalize, average, normalize.
    MeanPool,
}

/// Linear projection from hashed feature space (F) to embedding space (d).
///
/// Weights are kept as f64 column-major (one contiguous column per feature
/// bucket); the on-disk format is f32 row-major.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub feature_config: FeatureConfig,
    pub mode: EncodeMode,
    pub dim: usize,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    dim: usize,
    mode: EncodeMode,
    feature_config: FeatureConfig,
}

impl EmbeddingModel {
    /// Fresh model with uniform random weights in [-init_scale, init_scale].
    pub fn new_random(
        feature_config: FeatureConfig,
        mode: EncodeMode,
        dim: usize,
        seed: u64,
        init_scale: f64,
    ) -> Result<Self> {
        feature_config.validate()?;
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dim must be positive".into()));
        }
        if !(init_scale > 0.0) || !init_scale.is_finite() {
            return Err(Error::InvalidInput(format!("init_scale must be positive, got {init_scale}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, [SeedPart::Str("embed-init")]));
        let weights = (0..feature_config.feature_dim * dim)
            .map(|_| rng.random_range(-init_scale..init_scale))
            .collect();
        Ok(EmbeddingModel { feature_config, mode, dim, weights })
    }

    /// Model with explicit weights, given column-major (feature-major) order.
    pub fn with_weights(
        feature_config: FeatureConfig,
        mode: EncodeMode,
        dim: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        feature_config.validate()?;
        let expected = feature_config.feature_dim * dim;
        if weights.len() != expected {
            return Err(Error::Dimension { expected, got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("non-finite weight".into()));
        }
        Ok(EmbeddingModel { feature_config, mode, dim, weights })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_config.feature_dim
    }

    pub fn weight(&self, row: usize, feature: usize) -> f64 {
        self.weights[feature * self.dim + row]
    }

    pub fn set_weight(&mut self, row: usize, feature: usize, value: f64) {
        self.weights[feature * self.dim + row] = value;
    }

    pub(crate) fn column(&self, feature: usize) -> &[f64] {
        &self.weights[feature * self.dim..(feature + 1) * self.dim]
    }

    pub(crate) fn column_mut(&mut self, feature: usize) -> &mut [f64] {
        &mut self.weights[feature * self.dim..(feature + 1) * self.dim]
    }

    /// Dense projection of a sparse feature vector.
    pub fn project(&self, x: &SparseVec) -> Vec<f64> {
        let mut z = vec![0.0; self.dim];
        for (&f, &v) in x.idx.iter().zip(&x.val) {
            for (zr, wr) in z.iter_mut().zip(self.column(f as usize)) {
                *zr += v * wr;
            }
        }
        z
    }

    /// Write magic, JSON header line, then f32 little-endian weights in
    /// row-major order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MODEL_MAGIC)?;
        let header = ModelHeader {
            dim: self.dim,
            mode: self.mode,
            feature_config: self.feature_config.clone(),
        };
        serde_json::to_writer(&mut w, &header).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
        let f_dim = self.feature_dim();
        let mut row = vec![0u8; f_dim * 4];
        for r in 0..self.dim {
            for f in 0..f_dim {
                let bits = (self.weights[f * self.dim + r] as f32).to_le_bytes();
                row[f * 4..f * 4 + 4].copy_from_slice(&bits);
            }
            w.write_all(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 7];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("model file too short for magic".into()))?;
        if magic != MODEL_MAGIC {
            return Err(Error::Format("bad magic, expected QAEMB1".into()));
        }
        let mut header_line = Vec::new();
        loop {
            let mut b = [0u8; 1];
            r.read_exact(&mut b).map_err(|_| Error::Format("truncated model header".into()))?;
            if b[0] == b'\n' {
                break;
            }
            header_line.push(b[0]);
        }
        let header: ModelHeader = serde_json::from_slice(&header_line)
            .map_err(|e| Error::Format(format!("model header: {e}")))?;
        header.feature_config.validate()?;
        if header.dim == 0 {
            return Err(Error::Format("model header has dim 0".into()));
        }

        let f_dim = header.feature_config.feature_dim;
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        let expected = header.dim * f_dim * 4;
        if raw.len() != expected {
            return Err(Error::Format(format!(
                "weight payload is {} bytes, expected {expected}",
                raw.len()
            )));
        }
        let mut weights = vec![0.0f64; header.dim * f_dim];
        for r_idx in 0..header.dim {
            for f in 0..f_dim {
                let off = (r_idx * f_dim + f) * 4;
                let v = f32::from_le_bytes(raw[off..off + 4].try_into().expect("4 bytes"));
                if !v.is_finite() {
                    return Err(Error::Format(format!("non-finite weight at row {r_idx}, feature {f}")));
                }
                weights[f * header.dim + r_idx] = f64::from(v);
            }
        }
        Ok(EmbeddingModel {
            feature_config: header.feature_config,
            mode: header.mode,
            dim: header.dim,
            weights,
        })
    }
}

/// Scale a dense vector to unit norm in place; returns the original norm.
/// A zero vector is left untouched.
pub(crate) fn l2_normalize_dense(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Encode a collection of utterances into one d-vector: a unit vector, or
/// all zeros when the collection produced no features.
pub fn encode_collection(model: &EmbeddingModel, utterances: &[&Utterance]) -> Result<Vec<f64>> {
    if utterances.is_empty() {
        return Err(Error::InvalidInput("cannot encode an empty collection".into()));
    }
    match model.mode {
        EncodeMode::Collection => {
            let mut x = sum_features(utterances, &model.feature_config);
            if x.is_zero() {
                return Ok(vec![0.0; model.dim]);
            }
            x.l2_normalize();
            let mut z = model.project(&x);
            l2_normalize_dense(&mut z);
            Ok(z)
        }
        EncodeMode::MeanPool => {
            let mut mean = vec![0.0; model.dim];
            for u in utterances {
                let mut x = extract_features(u, &model.feature_config);
                if x.is_zero() {
                    continue;
                }
                x.l2_normalize();
                let mut z = model.project(&x);
                l2_normalize_dense(&mut z);
                for (m, zi) in mean.iter_mut().zip(&z) {
                    *m += zi;
                }
            }
            let inv = 1.0 / utterances.len() as f64;
            for m in &mut mean {
                *m *= inv;
            }
            l2_normalize_dense(&mut mean);
            Ok(mean)
        }
    }
}

/// Cosine similarity; zero whenever either vector is the zero sentinel.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension { expected: u.len(), got: v.len() });
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(dot / (nu * nv))
}
