//! Candidate scorer: hashed token embeddings, neighborhood context
//! encoding, and a one-hidden-layer feed-forward score head.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attrib::candidates::CandidateMention;
use crate::attrib::context::{ContextSegment, ALTQUOTE_TOKEN, DEFAULT_WINDOW, QUOTE_TOKEN};
use crate::embed::features::feature_bucket;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, SeedPart};

pub const SCORER_MAGIC: &[u8] = b"QASCR1\n";

/// Score head inputs: masked context and mention only, or additionally the
/// candidate's character vector and the quote vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arity {
    ContextOnly,
    Augmented,
}

impl Arity {
    pub fn name(self) -> &'static str {
        match self {
            Arity::ContextOnly => "context-only",
            Arity::Augmented => "augmented",
        }
    }
}

/// Mention representation: first and last token vectors concatenated
/// (default), or the token mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MentionMode {
    FirstLast,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    /// Hashed vocabulary buckets; [QUOTE]/[ALTQUOTE] get two extra rows.
    pub vocab_dim: usize,
    /// Token embedding width.
    pub token_dim: usize,
    /// Hidden layer width of the score head.
    pub hidden: usize,
    /// Context window in tokens on each side of the quote.
    pub window: usize,
    /// Neighborhood radius of the context encoder.
    pub radius: usize,
    pub mention_mode: MentionMode,
    pub arity: Arity,
    /// Width of character and quote vectors in augmented mode.
    pub char_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            vocab_dim: 1 << 16,
            token_dim: 64,
            hidden: 512,
            window: DEFAULT_WINDOW,
            radius: 5,
            mention_mode: MentionMode::FirstLast,
            arity: Arity::ContextOnly,
            char_dim: crate::embed::DEFAULT_DIM,
            learning_rate: 5e-6,
            epochs: 20,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_dim == 0 || self.token_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidInput("scorer dimensions must be positive".into()));
        }
        if self.vocab_dim > u32::MAX as usize {
            return Err(Error::InvalidInput("vocab_dim exceeds the hash range".into()));
        }
        if self.arity == Arity::Augmented && self.char_dim == 0 {
            return Err(Error::InvalidInput("augmented scorer needs char_dim > 0".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidInput("learning rate must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn mention_dim(&self) -> usize {
        match self.mention_mode {
            MentionMode::FirstLast => 2 * self.token_dim,
            MentionMode::Mean => self.token_dim,
        }
    }

    /// Width of the score head input vector.
    pub fn input_dim(&self) -> usize {
        let base = self.token_dim + self.mention_dim();
        match self.arity {
            Arity::ContextOnly => base,
            Arity::Augmented => base + 2 * self.char_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    pub config: ScorerConfig,
    /// (vocab_dim + 2) rows of token_dim, row-major; the last two rows are
    /// the [QUOTE] and [ALTQUOTE] embeddings.
    pub(crate) emb: Vec<f64>,
    /// hidden rows of input_dim, row-major.
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: f64,
}

#[derive(Serialize, Deserialize)]
struct ScorerHeader {
    config: ScorerConfig,
}

impl ScorerModel {
    pub fn new_random(config: ScorerConfig, seed: u64) -> Result<ScorerModel> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, [SeedPart::Str("scorer-init")]));
        let emb_len = (config.vocab_dim + 2) * config.token_dim;
        let emb: Vec<f64> = (0..emb_len).map(|_| rng.random_range(-0.1..0.1)).collect();
        let in_dim = config.input_dim();
        let s1 = (6.0 / (in_dim + config.hidden) as f64).sqrt();
        let w1: Vec<f64> = (0..config.hidden * in_dim).map(|_| rng.random_range(-s1..s1)).collect();
        let s2 = (6.0 / (config.hidden + 1) as f64).sqrt();
        let w2: Vec<f64> = (0..config.hidden).map(|_| rng.random_range(-s2..s2)).collect();
        Ok(ScorerModel { b1: vec![0.0; config.hidden], b2: 0.0, config, emb, w1, w2 })
    }

    /// Augmented copy of a context-only scorer whose new input columns are
    /// zero; it scores exactly like the original until trained further.
    pub fn extended(&self, char_dim: usize) -> Result<ScorerModel> {
        if self.config.arity != Arity::ContextOnly {
            return Err(Error::InvalidInput("only a context-only scorer can be extended".into()));
        }
        if char_dim == 0 {
            return Err(Error::InvalidInput("augmented scorer needs char_dim > 0".into()));
        }
        let config = ScorerConfig { arity: Arity::Augmented, char_dim, ..self.config.clone() };
        let old_in = self.config.input_dim();
        let new_in = config.input_dim();
        let mut w1 = vec![0.0; config.hidden * new_in];
        for r in 0..config.hidden {
            w1[r * new_in..r * new_in + old_in].copy_from_slice(&self.w1[r * old_in..(r + 1) * old_in]);
        }
        Ok(ScorerModel {
            config,
            emb: self.emb.clone(),
            w1,
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2,
        })
    }

    /// Embedding row and sign for one segment token.
    pub(crate) fn token_row(&self, token: &str) -> (usize, f64) {
        if token == QUOTE_TOKEN {
            (self.config.vocab_dim, 1.0)
        } else if token == ALTQUOTE_TOKEN {
            (self.config.vocab_dim + 1, 1.0)
        } else {
            let (bucket, sign) = feature_bucket(&format!("tok:{}", token.to_lowercase()), self.config.vocab_dim);
            (bucket as usize, sign)
        }
    }

    pub(crate) fn emb_row(&self, row: usize) -> &[f64] {
        &self.emb[row * self.config.token_dim..(row + 1) * self.config.token_dim]
    }

    /// Neighborhood positions and normalized 1/(1+distance) weights,
    /// shared by the forward and backward passes.
    pub(crate) fn neighborhood(&self, p: usize, len: usize) -> Vec<(usize, f64)> {
        let r = self.config.radius as isize;
        let mut pairs = Vec::with_capacity(2 * self.config.radius + 1);
        let mut total = 0.0;
        for k in -r..=r {
            let idx = p as isize + k;
            if idx < 0 || idx >= len as isize {
                continue;
            }
            let w = 1.0 / (1.0 + k.abs() as f64);
            total += w;
            pairs.push((idx as usize, w));
        }
        for pair in &mut pairs {
            pair.1 /= total;
        }
        pairs
    }

    /// One vector per segment position: signed token embeddings averaged
    /// over the radius-`r` neighborhood with weight 1/(1+distance), so a
    /// position's representation depends only on its local surroundings
    /// and their arrangement.
    pub fn encode_context(&self, segment: &ContextSegment) -> Vec<Vec<f64>> {
        let d = self.config.token_dim;
        let rows: Vec<(usize, f64)> = segment.tokens.iter().map(|t| self.token_row(t)).collect();
        let mut h = vec![vec![0.0; d]; segment.tokens.len()];
        for (p, out) in h.iter_mut().enumerate() {
            for (idx, w) in self.neighborhood(p, segment.tokens.len()) {
                let (row, sign) = rows[idx];
                let e = self.emb_row(row);
                let c = w * sign;
                for (o, v) in out.iter_mut().zip(e) {
                    *o += c * v;
                }
            }
        }
        h
    }

    /// Assemble the score head input [H[q] | h_m] or [H[q] | h_m | v | u].
    pub(crate) fn score_input(
        &self,
        h: &[Vec<f64>],
        quote_pos: usize,
        candidate: &CandidateMention,
        v_entity: Option<&[f64]>,
        u_q: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        if quote_pos >= h.len() {
            return Err(Error::InvalidInput(format!(
                "quote position {quote_pos} outside segment of {} positions",
                h.len()
            )));
        }
        if candidate.seg_end > h.len() || candidate.seg_start >= candidate.seg_end {
            return Err(Error::InvalidInput(format!(
                "candidate span [{}, {}) outside segment of {} positions",
                candidate.seg_start,
                candidate.seg_end,
                h.len()
            )));
        }
        let mut x = Vec::with_capacity(self.config.input_dim());
        x.extend_from_slice(&h[quote_pos]);
        x.extend(mention_repr(h, candidate.seg_start, candidate.seg_end, self.config.mention_mode));
        match self.config.arity {
            Arity::ContextOnly => {
                if v_entity.is_some() || u_q.is_some() {
                    return Err(Error::InvalidInput(
                        "context-only scorer takes no character or quote vectors".into(),
                    ));
                }
            }
            Arity::Augmented => {
                let (v, u) = match (v_entity, u_q) {
                    (Some(v), Some(u)) => (v, u),
                    _ => {
                        return Err(Error::InvalidInput(
                            "augmented scorer needs both a character vector and a quote vector".into(),
                        ))
                    }
                };
                if v.len() != self.config.char_dim {
                    return Err(Error::Dimension { expected: self.config.char_dim, got: v.len() });
                }
                if u.len() != self.config.char_dim {
                    return Err(Error::Dimension { expected: self.config.char_dim, got: u.len() });
                }
                x.extend_from_slice(v);
                x.extend_from_slice(u);
            }
        }
        Ok(x)
    }

    /// Score one candidate against the encoded segment. `v_entity` and
    /// `u_q` must be provided exactly when the scorer is augmented.
    pub fn score(
        &self,
        h: &[Vec<f64>],
        quote_pos: usize,
        candidate: &CandidateMention,
        v_entity: Option<&[f64]>,
        u_q: Option<&[f64]>,
    ) -> Result<f64> {
        let x = self.score_input(h, quote_pos, candidate, v_entity, u_q)?;
        Ok(self.phi(&x).0)
    }

    /// Feed-forward head; returns the score and the hidden pre-activations.
    pub(crate) fn phi(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let in_dim = x.len();
        let mut z = self.b1.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            let row = &self.w1[r * in_dim..(r + 1) * in_dim];
            *zr += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        let mut s = self.b2;
        for (w, zr) in self.w2.iter().zip(&z) {
            s += w * zr.max(0.0);
        }
        (s, z)
    }

    /// Total number of parameters, in the flat order emb, w1, b1, w2, b2.
    pub fn param_len(&self) -> usize {
        self.emb.len() + self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn param(&self, i: usize) -> f64 {
        let mut i = i;
        for part in [&self.emb, &self.w1, &self.b1, &self.w2] {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        self.b2
    }

    pub fn param_mut(&mut self, i: usize) -> &mut f64 {
        let mut i = i;
        if i < self.emb.len() {
            return &mut self.emb[i];
        }
        i -= self.emb.len();
        if i < self.w1.len() {
            return &mut self.w1[i];
        }
        i -= self.w1.len();
        if i < self.b1.len() {
            return &mut self.b1[i];
        }
        i -= self.b1.len();
        if i < self.w2.len() {
            return &mut self.w2[i];
        }
        &mut self.b2
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(SCORER_MAGIC)?;
        let header = serde_json::to_string(&ScorerHeader { config: self.config.clone() })
            .map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(header.as_bytes())?;
        w.write_all(b"\n")?;
        for part in [&self.emb, &self.w1, &self.b1, &self.w2] {
            for &v in part.iter() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        w.write_all(&(self.b2 as f32).to_le_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ScorerModel> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 7];
        r.read_exact(&mut magic).map_err(|_| Error::Format("scorer file too short".into()))?;
        if magic != SCORER_MAGIC {
            return Err(Error::Format("not a scorer model file (bad magic)".into()));
        }
        let mut header_line = String::new();
        r.read_line(&mut header_line)?;
        let header: ScorerHeader =
            serde_json::from_str(header_line.trim_end()).map_err(|e| Error::Format(format!("scorer header: {e}")))?;
        header.config.validate()?;

        let emb_len = (header.config.vocab_dim + 2) * header.config.token_dim;
        let w1_len = header.config.hidden * header.config.input_dim();
        let total = emb_len + w1_len + 2 * header.config.hidden + 1;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != total * 4 {
            return Err(Error::Format(format!(
                "scorer payload holds {} bytes, expected {}",
                bytes.len(),
                total * 4
            )));
        }
        let mut vals = bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let part: Vec<f64> = vals.by_ref().take(n).collect();
            if part.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format("scorer weights contain non-finite values".into()));
            }
            Ok(part)
        };
        let emb = take(emb_len)?;
        let w1 = take(w1_len)?;
        let b1 = take(header.config.hidden)?;
        let w2 = take(header.config.hidden)?;
        let b2 = take(1)?[0];
        Ok(ScorerModel { config: header.config, emb, w1, b1, w2, b2 })
    }
}

/// Mention span representation over the encoded segment.
pub fn mention_repr(h: &[Vec<f64>], seg_start: usize, seg_end: usize, mode: MentionMode) -> Vec<f64> {
    match mode {
        MentionMode::FirstLast => {
            let mut out = h[seg_start].clone();
            out.extend_from_slice(&h[seg_end - 1]);
            out
        }
        MentionMode::Mean => {
            let d = h[seg_start].len();
            let mut out = vec![0.0; d];
            for v in &h[seg_start..seg_end] {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += x;
                }
            }
            let inv = 1.0 / (seg_end - seg_start) as f64;
            out.iter_mut().for_each(|o| *o *= inv);
            out
        }
    }
}
