//! Hashed stylometric features.
//!
//! Each utterance maps to a sparse count vector over `F` buckets via signed
//! feature hashing (single FNV-1a hash; low bits pick the bucket, the top
//! bit picks the sign). Channels are prefixed before hashing so a character
//! n-gram can never alias a function word at the name level:
//! `cg<n>:` character n-grams of lowercased word tokens, `fw:` function
//! words, `punct:` punctuation marks, `len:` token-count bucket.

use serde::{Deserialize, Serialize};

use crate::corpus::Utterance;
use crate::embed::function_words::function_word_set;
use crate::error::{Error, Result};
use crate::seed::hash_bytes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Character n-gram orders applied to each word token.
    pub ngram_orders: Vec<usize>,
    /// Hashed feature dimension F.
    pub feature_dim: usize,
    /// Function-word list id, resolved by `function_word_set`.
    pub function_words: String,
    /// Emit one feature per punctuation token.
    pub punct_features: bool,
    /// Token-count bucket boundaries (inclusive upper edges).
    pub length_bucket_edges: Vec<usize>,
    /// Utterances are truncated to this many tokens before extraction.
    pub max_tokens: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            ngram_orders: vec![1, 2, 3],
            feature_dim: 1 << 18,
            function_words: "builtin-en".to_string(),
            punct_features: true,
            length_bucket_edges: vec![1, 2, 4, 8, 16, 32, 64],
            max_tokens: 64,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::InvalidInput("feature_dim must be positive".into()));
        }
        if self.ngram_orders.is_empty() {
            return Err(Error::InvalidInput("ngram_orders must be non-empty".into()));
        }
        if self.ngram_orders.iter().any(|&n| n == 0) {
            return Err(Error::InvalidInput("ngram orders must be positive".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidInput("max_tokens must be positive".into()));
        }
        function_word_set(&self.function_words)?;
        Ok(())
    }
}

/// Sparse vector with sorted, distinct indices. Zero entries are pruned,
/// so an empty `idx` means the zero vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn is_zero(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scale to unit L2 norm; the zero vector stays zero.
    pub fn l2_normalize(&mut self) {
        let norm = self.l2_norm();
        if norm > 0.0 {
            for v in &mut self.val {
                *v /= norm;
            }
        }
    }
}

/// Accumulates (bucket, signed count) pairs, then flattens to a SparseVec.
#[derive(Default)]
pub struct FeatureAccumulator {
    entries: std::collections::BTreeMap<u32, f64>,
}

impl FeatureAccumulator {
    pub fn add_feature(&mut self, name: &str, dim: usize, count: f64) {
        let (bucket, sign) = feature_bucket(name, dim);
        *self.entries.entry(bucket).or_insert(0.0) += sign * count;
    }

    pub fn add_sparse(&mut self, v: &SparseVec) {
        for (&i, &x) in v.idx.iter().zip(v.val.iter()) {
            *self.entries.entry(i).or_insert(0.0) += x;
        }
    }

    pub fn finish(self) -> SparseVec {
        let mut out = SparseVec::default();
        for (i, x) in self.entries {
            if x != 0.0 {
                out.idx.push(i);
                out.val.push(x);
            }
        }
        out
    }
}

/// Bucket and sign assigned to a named feature. Exposed so tests can locate
/// where a specific feature lands.
pub fn feature_bucket(name: &str, dim: usize) -> (u32, f64) {
    let h = hash_bytes(name.as_bytes());
    let bucket = (h % dim as u64) as u32;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

/// Extract the hashed feature counts of one utterance, truncated to
/// `config.max_tokens` tokens. Deterministic; an utterance with no tokens
/// yields the zero vector.
pub fn extract_features(utterance: &Utterance, config: &FeatureConfig) -> SparseVec {
    let mut acc = FeatureAccumulator::default();
    let dim = config.feature_dim;
    let tokens = &utterance.tokens[..utterance.tokens.len().min(config.max_tokens)];
    let fw = function_word_set(&config.function_words).unwrap_or_else(|_| {
        // validate() rejects unknown ids before extraction; fall back to
        // the builtin list rather than panicking mid-training.
        function_word_set("builtin-en").expect("builtin list exists")
    });

    for token in tokens {
        if token.is_word {
            let word = token.text.to_lowercase();
            let chars: Vec<char> = word.chars().collect();
            for &order in &config.ngram_orders {
                if chars.len() < order {
                    continue;
                }
                let mut gram = String::with_capacity(order * 4 + 5);
                for window in chars.windows(order) {
                    gram.clear();
                    gram.push_str("cg");
                    gram.push_str(&order.to_string());
                    gram.push(':');
                    gram.extend(window.iter());
                    acc.add_feature(&gram, dim, 1.0);
                }
            }
            if fw.contains(word.as_str()) {
                acc.add_feature(&format!("fw:{word}"), dim, 1.0);
            }
        } else if config.punct_features {
            acc.add_feature(&format!("punct:{}", token.text), dim, 1.0);
        }
    }

    if !tokens.is_empty() {
        acc.add_feature(&length_bucket_name(tokens.len(), &config.length_bucket_edges), dim, 1.0);
    }
    acc.finish()
}

fn length_bucket_name(count: usize, edges: &[usize]) -> String {
    for &edge in edges {
        if count <= edge {
            return format!("len:<={edge}");
        }
    }
    match edges.last() {
        Some(last) => format!("len:>{last}"),
        None => "len:any".to_string(),
    }
}

/// Sum of per-utterance feature counts over a collection.
pub fn sum_features(utterances: &[&Utterance], config: &FeatureConfig) -> SparseVec {
    let mut acc = FeatureAccumulator::default();
    for u in utterances {
        acc.add_sparse(&extract_features(u, config));
    }
    acc.finish()
}
