//! Scorer training: per-quote candidate log-likelihood with SGD.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attrib::candidates::{enumerate_candidates, CandidateMention};
use crate::attrib::context::{build_context, ContextSegment};
use crate::attrib::scorer::{Arity, MentionMode, ScorerConfig, ScorerModel};
use crate::corpus::novel::AnnotatedNovel;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, SeedPart};

/// One trainable quote: its masked segment, candidates, which candidates
/// link to the gold speaker, and (for augmented scorers) the per-candidate
/// character vectors plus the quote vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerExample {
    pub quote_id: String,
    pub segment: ContextSegment,
    pub candidates: Vec<CandidateMention>,
    pub positives: Vec<usize>,
    pub augment: Option<(Vec<Vec<f64>>, Vec<f64>)>,
}

/// Build training examples from gold-annotated quotes. Quotes without a
/// gold speaker, without candidates, or without a positive candidate are
/// skipped: they carry no likelihood signal.
pub fn training_examples(
    novel: &AnnotatedNovel,
    config: &ScorerConfig,
    augment: Option<(&BTreeMap<String, Vec<f64>>, &BTreeMap<String, Vec<f64>>)>,
) -> Result<Vec<ScorerExample>> {
    if (config.arity == Arity::Augmented) != augment.is_some() {
        return Err(Error::InvalidInput(format!(
            "{} scorer config but augmented inputs were {}",
            config.arity.name(),
            if augment.is_some() { "provided" } else { "not provided" }
        )));
    }
    let mut out = Vec::new();
    for quote in &novel.quotes {
        let Some(gold) = &quote.speaker_id else { continue };
        let segment = build_context(novel, quote, config.window);
        let candidates = enumerate_candidates(novel, &segment);
        let positives: Vec<usize> = candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| &c.entity_id == gold)
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() || positives.is_empty() {
            continue;
        }
        let augment = match augment {
            None => None,
            Some((char_vectors, quote_vectors)) => {
                let vs: Vec<Vec<f64>> = candidates
                    .iter()
                    .map(|c| lookup_char_vector(char_vectors, &c.entity_id, config.char_dim))
                    .collect::<Result<_>>()?;
                let u = quote_vectors.get(&quote.id).cloned().ok_or_else(|| {
                    Error::InvalidInput(format!("no quote vector for \"{}\"", quote.id))
                })?;
                if u.len() != config.char_dim {
                    return Err(Error::Dimension { expected: config.char_dim, got: u.len() });
                }
                Some((vs, u))
            }
        };
        out.push(ScorerExample {
            quote_id: quote.id.clone(),
            segment,
            candidates,
            positives,
            augment,
        });
    }
    Ok(out)
}

/// Character vector with the zero-vector fallback for characters that were
/// never explicitly quoted (absent from the map counts as unquoted).
pub fn lookup_char_vector(
    char_vectors: &BTreeMap<String, Vec<f64>>,
    entity_id: &str,
    char_dim: usize,
) -> Result<Vec<f64>> {
    match char_vectors.get(entity_id) {
        None => Ok(vec![0.0; char_dim]),
        Some(v) if v.len() == char_dim => Ok(v.clone()),
        Some(v) => Err(Error::Dimension { expected: char_dim, got: v.len() }),
    }
}

/// Gradients aligned with `ScorerModel`'s flat parameter order
/// (emb, w1, b1, w2, b2); embedding rows are kept sparse.
#[derive(Debug, Clone)]
pub struct ScorerGradients {
    token_dim: usize,
    emb_len: usize,
    pub(crate) emb_rows: BTreeMap<usize, Vec<f64>>,
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: f64,
}

impl ScorerGradients {
    fn zeros(model: &ScorerModel) -> ScorerGradients {
        ScorerGradients {
            token_dim: model.config.token_dim,
            emb_len: (model.config.vocab_dim + 2) * model.config.token_dim,
            emb_rows: BTreeMap::new(),
            w1: vec![0.0; model.config.hidden * model.config.input_dim()],
            b1: vec![0.0; model.config.hidden],
            w2: vec![0.0; model.config.hidden],
            b2: 0.0,
        }
    }

    /// Gradient of the parameter at flat index `i` (see ScorerModel::param).
    pub fn param(&self, i: usize) -> f64 {
        let mut i = i;
        if i < self.emb_len {
            let row = i / self.token_dim;
            let col = i % self.token_dim;
            return self.emb_rows.get(&row).map_or(0.0, |v| v[col]);
        }
        i -= self.emb_len;
        for part in [&self.w1, &self.b1, &self.w2] {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        self.b2
    }
}

struct Forward {
    h: Vec<Vec<f64>>,
    xs: Vec<Vec<f64>>,
    zs: Vec<Vec<f64>>,
    scores: Vec<f64>,
}

fn forward(model: &ScorerModel, ex: &ScorerExample) -> Result<Forward> {
    if ex.candidates.is_empty() {
        return Err(Error::InvalidInput(format!("quote \"{}\" has no candidates", ex.quote_id)));
    }
    if (model.config.arity == Arity::Augmented) != ex.augment.is_some() {
        return Err(Error::InvalidInput(format!(
            "{} scorer scoring an example {} augmented inputs",
            model.config.arity.name(),
            if ex.augment.is_some() { "with" } else { "without" }
        )));
    }
    let h = model.encode_context(&ex.segment);
    let mut xs = Vec::with_capacity(ex.candidates.len());
    let mut zs = Vec::with_capacity(ex.candidates.len());
    let mut scores = Vec::with_capacity(ex.candidates.len());
    for (i, cand) in ex.candidates.iter().enumerate() {
        let (v, u) = match &ex.augment {
            Some((vs, u)) => (Some(vs[i].as_slice()), Some(u.as_slice())),
            None => (None, None),
        };
        let x = model.score_input(&h, ex.segment.quote_pos, cand, v, u)?;
        let (s, z) = model.phi(&x);
        xs.push(x);
        zs.push(z);
        scores.push(s);
    }
    Ok(Forward { h, xs, zs, scores })
}

/// Stable softmax plus the summed probability mass of the positives.
fn softmax_and_positive_mass(scores: &[f64], positives: &[usize]) -> Result<(Vec<f64>, f64)> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
    if positives.is_empty() {
        return Err(Error::InvalidInput("example has no positive candidate".into()));
    }
    let mut mass = 0.0;
    for &p in positives {
        let prob = probs.get(p).ok_or_else(|| {
            Error::InvalidInput(format!("positive index {p} outside {} candidates", probs.len()))
        })?;
        mass += prob;
    }
    Ok((probs, mass))
}

/// Negative log of the summed positive probability.
pub fn example_loss(model: &ScorerModel, ex: &ScorerExample) -> Result<f64> {
    let fwd = forward(model, ex)?;
    let (_, mass) = softmax_and_positive_mass(&fwd.scores, &ex.positives)?;
    Ok(-mass.ln())
}

/// Loss and its gradient with respect to every scorer parameter. Character
/// and quote vectors are inputs, not parameters, and receive no gradient.
pub fn example_gradient(model: &ScorerModel, ex: &ScorerExample) -> Result<(f64, ScorerGradients)> {
    let fwd = forward(model, ex)?;
    let (probs, mass) = softmax_and_positive_mass(&fwd.scores, &ex.positives)?;
    let loss = -mass.ln();

    let positive: BTreeSet<usize> = ex.positives.iter().copied().collect();
    let mut g = ScorerGradients::zeros(model);
    let d = model.config.token_dim;
    let in_dim = model.config.input_dim();
    let mention_dim = model.config.mention_dim();
    let mut dh = vec![vec![0.0; d]; fwd.h.len()];
    let mut touched: BTreeSet<usize> = BTreeSet::new();

    for (i, cand) in ex.candidates.iter().enumerate() {
        let mut ds = probs[i];
        if positive.contains(&i) {
            ds -= probs[i] / mass;
        }
        if ds == 0.0 {
            continue;
        }
        let z = &fwd.zs[i];
        let x = &fwd.xs[i];
        g.b2 += ds;
        let mut dx = vec![0.0; in_dim];
        for r in 0..model.config.hidden {
            g.w2[r] += ds * z[r].max(0.0);
            if z[r] <= 0.0 {
                continue;
            }
            let dz = ds * model.w2[r];
            g.b1[r] += dz;
            let w1_row = &model.w1[r * in_dim..(r + 1) * in_dim];
            let g1_row = &mut g.w1[r * in_dim..(r + 1) * in_dim];
            for j in 0..in_dim {
                g1_row[j] += dz * x[j];
                dx[j] += dz * w1_row[j];
            }
        }

        // Split dx into the H[q] part, the mention part, and the frozen tail.
        for (k, v) in dx[..d].iter().enumerate() {
            dh[ex.segment.quote_pos][k] += v;
        }
        touched.insert(ex.segment.quote_pos);
        let dm = &dx[d..d + mention_dim];
        match model.config.mention_mode {
            MentionMode::FirstLast => {
                let first = cand.seg_start;
                let last = cand.seg_end - 1;
                for k in 0..d {
                    dh[first][k] += dm[k];
                    dh[last][k] += dm[d + k];
                }
                touched.insert(first);
                touched.insert(last);
            }
            MentionMode::Mean => {
                let inv = 1.0 / (cand.seg_end - cand.seg_start) as f64;
                for p in cand.seg_start..cand.seg_end {
                    for k in 0..d {
                        dh[p][k] += inv * dm[k];
                    }
                    touched.insert(p);
                }
            }
        }
    }

    // Push dH back through the neighborhood averaging into embedding rows.
    let rows: Vec<(usize, f64)> = ex.segment.tokens.iter().map(|t| model.token_row(t)).collect();
    for &p in &touched {
        for (idx, w) in model.neighborhood(p, ex.segment.tokens.len()) {
            let (row, sign) = rows[idx];
            let acc = g.emb_rows.entry(row).or_insert_with(|| vec![0.0; d]);
            let c = w * sign;
            for k in 0..d {
                acc[k] += c * dh[p][k];
            }
        }
    }
    Ok((loss, g))
}

impl ScorerModel {
    pub(crate) fn apply_gradients(&mut self, g: &ScorerGradients, lr: f64) {
        let d = self.config.token_dim;
        for (&row, grad) in &g.emb_rows {
            let base = row * d;
            for k in 0..d {
                self.emb[base + k] -= lr * grad[k];
            }
        }
        for (w, gw) in self.w1.iter_mut().zip(&g.w1) {
            *w -= lr * gw;
        }
        for (b, gb) in self.b1.iter_mut().zip(&g.b1) {
            *b -= lr * gb;
        }
        for (w, gw) in self.w2.iter_mut().zip(&g.w2) {
            *w -= lr * gw;
        }
        self.b2 -= lr * g.b2;
    }
}

/// Train a fresh scorer on the examples; returns the model and per-epoch
/// mean loss. Examples without candidates or positives are skipped; zero
/// epochs returns the initial model.
pub fn train_scorer(
    examples: &[ScorerExample],
    config: &ScorerConfig,
    seed: u64,
) -> Result<(ScorerModel, Vec<f64>)> {
    config.validate()?;
    let trainable: Vec<&ScorerExample> = examples
        .iter()
        .filter(|e| !e.candidates.is_empty() && !e.positives.is_empty())
        .collect();
    if trainable.is_empty() {
        return Err(Error::InvalidInput("no trainable quote in the corpus".into()));
    }
    let mut model = ScorerModel::new_random(config.clone(), seed)?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..trainable.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            [SeedPart::Str("scorer-order"), SeedPart::Num(epoch as u64)],
        ));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &i in &order {
            let (loss, grads) = example_gradient(&model, trainable[i])?;
            loss_sum += loss;
            if config.learning_rate > 0.0 {
                model.apply_gradients(&grads, config.learning_rate);
            }
        }
        history.push(loss_sum / trainable.len() as f64);
    }
    Ok((model, history))
}
