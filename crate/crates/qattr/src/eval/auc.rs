//! Exact two-class AUC by pairwise counting, ties worth half.

use crate::error::{Error, Result};

/// AUC for a single positive score against negatives:
/// (#negatives strictly below + 0.5 * #ties) / #negatives.
pub fn auc(positive: f64, negatives: &[f64]) -> Result<f64> {
    if negatives.is_empty() {
        return Err(Error::InvalidInput("AUC undefined with zero negatives".into()));
    }
    Ok(pair_mass(positive, negatives) / negatives.len() as f64)
}

/// Mann-Whitney AUC for several positives: mean over all (positive,
/// negative) pairs of win=1, tie=0.5, loss=0.
pub fn auc_multi(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::InvalidInput("AUC undefined with zero positives".into()));
    }
    if negatives.is_empty() {
        return Err(Error::InvalidInput("AUC undefined with zero negatives".into()));
    }
    let total: f64 = positives.iter().map(|&p| pair_mass(p, negatives)).sum();
    Ok(total / (positives.len() * negatives.len()) as f64)
}

fn pair_mass(positive: f64, negatives: &[f64]) -> f64 {
    let mut mass = 0.0;
    for &n in negatives {
        if n < positive {
            mass += 1.0;
        } else if n == positive {
            mass += 0.5;
        }
    }
    mass
}
