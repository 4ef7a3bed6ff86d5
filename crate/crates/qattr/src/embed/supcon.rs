//! Supervised contrastive loss over a batch of embeddings.
//!
//! Multi-positive variant with the positive average outside the log: for
//! anchors V = {i : P(i) nonempty},
//!
//!   L = 1/|V| sum_{i in V} -1/|P(i)| sum_{p in P(i)}
//!         log( exp(s_ip/t) / sum_{a != i} exp(s_ia/t) )
//!
//! where s_ij is the dot product of embeddings i and j. The caller
//! restricts the batch to one segment unit, which is what confines
//! negatives to characters of the same scene or play.

use crate::error::{Error, Result};

/// Loss and its analytic gradient with respect to each embedding.
///
/// Anchors without a positive are excluded from the average; if no anchor
/// has a positive the loss is undefined and an error is returned.
pub fn supcon_loss(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    temperature: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("contrastive batch needs >= 2 embeddings, got {n}")));
    }
    if labels.len() != n {
        return Err(Error::InvalidInput(format!("{n} embeddings but {} labels", labels.len())));
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidInput(format!("temperature must be positive, got {temperature}")));
    }
    let dim = embeddings[0].len();
    for e in embeddings {
        if e.len() != dim {
            return Err(Error::Dimension { expected: dim, got: e.len() });
        }
    }

    let sim = |i: usize, j: usize| -> f64 {
        embeddings[i].iter().zip(&embeddings[j]).map(|(a, b)| a * b).sum()
    };

    let anchors: Vec<usize> = (0..n)
        .filter(|&i| labels.iter().enumerate().any(|(j, &l)| j != i && l == labels[i]))
        .collect();
    if anchors.is_empty() {
        return Err(Error::InvalidInput("no anchor has a positive in the batch".into()));
    }
    let inv_v = 1.0 / anchors.len() as f64;

    let mut loss = 0.0;
    // d(loss)/d(s_ij) for each ordered anchor/candidate pair.
    let mut sim_grad = vec![vec![0.0; n]; n];

    for &i in &anchors {
        let mut logits = vec![0.0; n];
        let mut max_logit = f64::NEG_INFINITY;
        for j in 0..n {
            if j == i {
                continue;
            }
            logits[j] = sim(i, j) / temperature;
            max_logit = max_logit.max(logits[j]);
        }
        let mut denom = 0.0;
        for j in 0..n {
            if j != i {
                denom += (logits[j] - max_logit).exp();
            }
        }
        let lse = max_logit + denom.ln();

        let positives: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        let inv_p = 1.0 / positives.len() as f64;
        for &p in &positives {
            loss += inv_v * inv_p * (lse - logits[p]);
        }
        for j in 0..n {
            if j == i {
                continue;
            }
            let softmax = (logits[j] - lse).exp();
            let pos_mass = if labels[j] == labels[i] { inv_p } else { 0.0 };
            sim_grad[i][j] = inv_v / temperature * (softmax - pos_mass);
        }
    }

    let mut grads = vec![vec![0.0; dim]; n];
    for &i in &anchors {
        for j in 0..n {
            let g = sim_grad[i][j];
            if g == 0.0 {
                continue;
            }
            for r in 0..dim {
                grads[i][r] += g * embeddings[j][r];
                grads[j][r] += g * embeddings[i][r];
            }
        }
    }

    Ok((loss, grads))
}
