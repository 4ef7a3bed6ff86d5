//! Release gate: each test checks one end-to-end requirement with its
//! tolerances and time budget pinned in the assertions. Mathematical
//! results are verified against independent oracles written here, not
//! against the library's own implementation. `UPDATE_GOLDEN=1` rewrites
//! the golden report files instead of comparing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qattr::attrib::train::{example_gradient, example_loss};
use qattr::attrib::{
    attribute, build_character_embeddings, build_context, enumerate_candidates,
    evaluate_attribution, metrics_table, quote_vectors, train_scorer, training_examples, Arity,
    AttributionMetrics, AttributionOutcome, CharSource, ScorerConfig, ScorerModel, ALTQUOTE_TOKEN,
    QUOTE_TOKEN,
};
use qattr::corpus::{AnnotatedNovel, Character, CorpusStats, QuoteType, SplitStats};
use qattr::dataset::{
    build_eval_querysets, build_segment_table, build_train_instances, split_corpus, SegmentUnit,
    Split,
};
use qattr::embed::train::{instance_gradient, instance_loss};
use qattr::embed::{train, EmbeddingModel, EncodeMode, FeatureConfig, TrainSettings};
use qattr::eval::report::stats_table;
use qattr::eval::{auc, auc_multi, eval_corpus, AucReport, Protocol};
use qattr::synth::{
    attrib_novel, attrib_novel_raw, attrib_novels, av_corpus, av_play_markup, random_novel,
    unanswerable_novel, AttribSpec, AvSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn budget(t0: Instant, limit: Duration, label: &str) {
    let elapsed = t0.elapsed();
    assert!(elapsed < limit, "{label} took {elapsed:?}, budget {limit:?}");
}

/// AUC agrees exactly with integer pair counting (ties worth half) on a
/// thousand random score sets, half of them quantized to force ties.
#[test]
fn auc_matches_exhaustive_pair_counting() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for set in 0..1000 {
        let quantized = set % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if quantized {
                rng.random_range(0..=12) as f64 / 4.0
            } else {
                rng.random_range(-3.0..3.0)
            }
        };
        let n_neg = rng.random_range(1..=40);
        let positive = draw(&mut rng);
        let negatives: Vec<f64> = (0..n_neg).map(|_| draw(&mut rng)).collect();

        let mut wins = 0u64;
        let mut ties = 0u64;
        for &n in &negatives {
            if n < positive {
                wins += 1;
            } else if n == positive {
                ties += 1;
            }
        }
        let expect = (wins as f64 + 0.5 * ties as f64) / n_neg as f64;
        assert_eq!(auc(positive, &negatives).unwrap(), expect, "set {set}");

        let positives: Vec<f64> = (0..rng.random_range(1..=5)).map(|_| draw(&mut rng)).collect();
        let mut wins = 0u64;
        let mut ties = 0u64;
        for &p in &positives {
            for &n in &negatives {
                if n < p {
                    wins += 1;
                } else if n == p {
                    ties += 1;
                }
            }
        }
        let expect =
            (wins as f64 + 0.5 * ties as f64) / (positives.len() * negatives.len()) as f64;
        assert_eq!(auc_multi(&positives, &negatives).unwrap(), expect, "set {set}");
    }
    budget(t0, Duration::from_secs(5), "AUC oracle");
    println!("PASS auc vs pair counting: 1000 sets exact, {:?}", t0.elapsed());
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Analytic gradients of both training losses match central finite
/// differences at the largest-magnitude coordinates of each instance.
#[test]
fn training_gradients_match_finite_differences() {
    let t0 = Instant::now();
    const TOL: f64 = 1e-4;

    // Contrastive loss over the embedder weights.
    let spec = AvSpec { plays: 2, characters: 3, scenes: 3, ..AvSpec::default() };
    let plays = av_corpus(&spec, 5).unwrap();
    let table = build_segment_table(&plays, SegmentUnit::Scene);
    let fc = FeatureConfig { feature_dim: 512, ..FeatureConfig::default() };
    let mut model = EmbeddingModel::new_random(fc, EncodeMode::Collection, 8, 5, 1e-2).unwrap();
    let mut embed_checked = 0;
    for round in 0..9u64 {
        for (seg_ref, segment) in &table.entries {
            let instances = build_train_instances(seg_ref, segment, 1000 + round);
            let Some(inst) = instances.first() else { continue };
            let (loss, grads) = instance_gradient(&model, segment, inst, 0.1).unwrap();
            assert!((instance_loss(&model, segment, inst, 0.1).unwrap() - loss).abs() < 1e-12);

            let mut coords: Vec<(u32, usize, f64)> = grads
                .iter()
                .flat_map(|(f, col)| col.iter().enumerate().map(move |(r, &g)| (*f, r, g)))
                .collect();
            coords.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()));
            for &(feature, row, g) in coords.iter().take(3) {
                let orig = model.weight(row, feature as usize);
                let eps = 1e-5 * orig.abs().max(1.0);
                model.set_weight(row, feature as usize, orig + eps);
                let up = instance_loss(&model, segment, inst, 0.1).unwrap();
                model.set_weight(row, feature as usize, orig - eps);
                let down = instance_loss(&model, segment, inst, 0.1).unwrap();
                model.set_weight(row, feature as usize, orig);
                let fd = (up - down) / (2.0 * eps);
                let rel = rel_err(g, fd);
                assert!(rel < TOL, "embed grad ({feature},{row}): {g} vs fd {fd}, rel {rel:.2e}");
            }
            embed_checked += 1;
        }
    }
    assert!(embed_checked >= 50, "only {embed_checked} contrastive instances");

    // Scorer log-likelihood over every scorer parameter block.
    let novels = attrib_novels(&AttribSpec { rounds: 2, ..AttribSpec::default() }, 3, 7).unwrap();
    let ctx_cfg = ScorerConfig {
        vocab_dim: 256,
        token_dim: 8,
        hidden: 16,
        window: 9,
        radius: 3,
        arity: Arity::ContextOnly,
        char_dim: 0,
        ..ScorerConfig::default()
    };
    let aug_cfg = ScorerConfig { arity: Arity::Augmented, char_dim: 8, ..ctx_cfg.clone() };
    let emb_fc = FeatureConfig { feature_dim: 512, ..FeatureConfig::default() };
    let embedder = EmbeddingModel::new_random(emb_fc, EncodeMode::Collection, 8, 7, 1e-2).unwrap();

    let mut scorer_checked = 0;
    for cfg in [&ctx_cfg, &aug_cfg] {
        let scorer = ScorerModel::new_random(cfg.clone(), 7).unwrap();
        for novel in &novels {
            let augment = match cfg.arity {
                Arity::ContextOnly => None,
                Arity::Augmented => Some((
                    build_character_embeddings(novel, &embedder, CharSource::Gold, None).unwrap(),
                    quote_vectors(novel, &embedder).unwrap(),
                )),
            };
            let examples =
                training_examples(novel, cfg, augment.as_ref().map(|(c, q)| (c, q))).unwrap();
            for ex in &examples {
                let (loss, grads) = example_gradient(&scorer, ex).unwrap();
                assert!((example_loss(&scorer, ex).unwrap() - loss).abs() < 1e-12);

                let mut scorer = scorer.clone();
                let mut coords: Vec<(usize, f64)> =
                    (0..scorer.param_len()).map(|i| (i, grads.param(i))).collect();
                coords.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
                for &(i, g) in coords.iter().take(4) {
                    let orig = scorer.param(i);
                    let eps = 1e-5 * orig.abs().max(1.0);
                    *scorer.param_mut(i) = orig + eps;
                    let up = example_loss(&scorer, ex).unwrap();
                    *scorer.param_mut(i) = orig - eps;
                    let down = example_loss(&scorer, ex).unwrap();
                    *scorer.param_mut(i) = orig;
                    let fd = (up - down) / (2.0 * eps);
                    let rel = rel_err(g, fd);
                    assert!(
                        rel < TOL,
                        "{} grad [{i}]: {g} vs fd {fd}, rel {rel:.2e}",
                        cfg.arity.name()
                    );
                }
                scorer_checked += 1;
            }
        }
    }
    assert!(scorer_checked >= 50, "only {scorer_checked} scorer examples");

    budget(t0, Duration::from_secs(30), "gradient checks");
    println!(
        "PASS gradient checks: {embed_checked} contrastive + {scorer_checked} scorer instances, {:?}",
        t0.elapsed()
    );
}

/// A context-only scorer extended with zero-filled character/quote input
/// weights scores and attributes exactly like the original when fed zero
/// vectors: the augmentation is a strict superset of the context model.
#[test]
fn zero_padded_augmented_scorer_equals_context_only() {
    let novel = attrib_novel(&AttribSpec::default(), 0, 3).unwrap();
    let cfg = ScorerConfig {
        vocab_dim: 1 << 10,
        token_dim: 16,
        hidden: 32,
        window: 9,
        radius: 4,
        arity: Arity::ContextOnly,
        char_dim: 0,
        ..ScorerConfig::default()
    };
    let ctx = ScorerModel::new_random(cfg, 9).unwrap();
    let aug = ctx.extended(16).unwrap();
    let zero = vec![0.0; 16];

    let mut scored = 0;
    for quote in &novel.quotes {
        let seg = build_context(&novel, quote, ctx.config.window);
        let candidates = enumerate_candidates(&novel, &seg);
        let h_ctx = ctx.encode_context(&seg);
        let h_aug = aug.encode_context(&seg);
        assert_eq!(h_ctx, h_aug);
        for cand in &candidates {
            let s_ctx = ctx.score(&h_ctx, seg.quote_pos, cand, None, None).unwrap();
            let s_aug = aug.score(&h_aug, seg.quote_pos, cand, Some(&zero), Some(&zero)).unwrap();
            assert_eq!(s_ctx.to_bits(), s_aug.to_bits(), "quote {}", quote.id);
            scored += 1;
        }
    }
    assert!(scored > 20, "fixture produced only {scored} scored candidates");

    let chars: BTreeMap<String, Vec<f64>> =
        novel.characters.iter().map(|c| (c.id.clone(), zero.clone())).collect();
    let quotes: BTreeMap<String, Vec<f64>> =
        novel.quotes.iter().map(|q| (q.id.clone(), zero.clone())).collect();
    let out_ctx = attribute(&ctx, &novel, None).unwrap();
    let out_aug = attribute(&aug, &novel, Some((&chars, &quotes))).unwrap();
    assert_eq!(out_ctx, out_aug);
    println!("PASS zero-padded augmentation: {scored} candidate scores bit-identical");
}

/// Resolve a mention surface the way annotation-free mentions must be:
/// case-insensitive alias match, unique character or nothing.
fn alias_oracle(characters: &[Character], surface: &str) -> Option<String> {
    let needle = surface.to_lowercase();
    let ids: BTreeSet<&str> = characters
        .iter()
        .filter(|c| c.aliases.iter().any(|a| a.to_lowercase() == needle))
        .map(|c| c.id.as_str())
        .collect();
    (ids.len() == 1).then(|| ids.into_iter().next().unwrap().to_string())
}

/// Masking completeness and candidate soundness, re-derived from the raw
/// annotations on 500 randomized novels at three window widths.
#[test]
fn masking_and_candidates_hold_on_randomized_novels() {
    for seed in 0..500u64 {
        let novel = random_novel(seed).unwrap();
        for quote in &novel.quotes {
            for w in [3usize, 9, 100] {
                let seg = build_context(&novel, quote, w);
                let (lo, hi) = seg.window;
                assert_eq!(lo, quote.start_tok.saturating_sub(w));
                assert_eq!(hi, (quote.end_tok + w).min(novel.tokens.len()));

                // The segment tiles the window; a position is masked iff it
                // covers quote material, and unmasked positions are single
                // document tokens copied verbatim.
                let mut cursor = lo;
                for (i, &(s, e)) in seg.doc_spans.iter().enumerate() {
                    assert_eq!(s, cursor, "seed {seed} quote {} w {w}", quote.id);
                    assert!(e > s);
                    cursor = e;
                    let masked =
                        seg.tokens[i] == QUOTE_TOKEN || seg.tokens[i] == ALTQUOTE_TOKEN;
                    for d in s..e {
                        let in_quote =
                            novel.quotes.iter().any(|q| d >= q.start_tok && d < q.end_tok);
                        assert_eq!(masked, in_quote, "seed {seed} doc token {d}");
                    }
                    if !masked {
                        assert_eq!(e, s + 1);
                        assert_eq!(seg.tokens[i], novel.tokens[s].text);
                    }
                }
                assert_eq!(cursor, hi);

                // Exactly one focal mask covering the focal overlap, one
                // alternate mask per other quote reaching the window.
                let focal: Vec<usize> =
                    (0..seg.tokens.len()).filter(|&i| seg.tokens[i] == QUOTE_TOKEN).collect();
                assert_eq!(focal, vec![seg.quote_pos], "seed {seed} quote {}", quote.id);
                assert_eq!(
                    seg.doc_spans[seg.quote_pos],
                    (quote.start_tok.max(lo), quote.end_tok.min(hi))
                );
                let alt = seg.tokens.iter().filter(|t| *t == ALTQUOTE_TOKEN).count();
                let expected_alt = novel
                    .quotes
                    .iter()
                    .filter(|q| q.id != quote.id && q.start_tok < hi && q.end_tok > lo)
                    .count();
                assert_eq!(alt, expected_alt, "seed {seed} quote {} w {w}", quote.id);

                // Candidates are exactly the resolvable, quote-free mentions
                // fully inside the window, and they map back verbatim.
                let candidates = enumerate_candidates(&novel, &seg);
                let mut expected: Vec<(usize, String)> = Vec::new();
                for (idx, m) in novel.mentions.iter().enumerate() {
                    if m.start_tok < lo || m.end_tok > hi {
                        continue;
                    }
                    let in_quote = novel
                        .quotes
                        .iter()
                        .any(|q| m.start_tok < q.end_tok && q.start_tok < m.end_tok);
                    if in_quote {
                        continue;
                    }
                    let entity = m.entity_id.clone().or_else(|| {
                        let first = &novel.tokens[m.start_tok];
                        let last = &novel.tokens[m.end_tok - 1];
                        alias_oracle(&novel.characters, &novel.text[first.char_start..last.char_end])
                    });
                    if let Some(e) = entity {
                        expected.push((idx, e));
                    }
                }
                let got: Vec<(usize, String)> = candidates
                    .iter()
                    .map(|c| (c.mention_index, c.entity_id.clone()))
                    .collect();
                let mut got_sorted = got.clone();
                got_sorted.sort();
                assert_eq!(got_sorted, expected, "seed {seed} quote {} w {w}", quote.id);
                for c in &candidates {
                    let m = &novel.mentions[c.mention_index];
                    assert_eq!(c.seg_end - c.seg_start, m.end_tok - m.start_tok);
                    for k in 0..(m.end_tok - m.start_tok) {
                        assert_eq!(seg.tokens[c.seg_start + k], novel.tokens[m.start_tok + k].text);
                    }
                }
            }
        }
    }
    println!("PASS masking/candidate properties: 500 novels x 3 windows");
}

fn seg_mean(report: &AucReport) -> f64 {
    report.per_segment.iter().map(|(_, a)| a).sum::<f64>() / report.per_segment.len() as f64
}

/// Training separates forty synthetic plays with per-character style
/// signatures: untrained random projection sits at chance, the trained
/// embedder verifies held-out segments at >= 0.90 mean AUC.
#[test]
fn embedder_separates_synthetic_styles() {
    let t0 = Instant::now();
    let seed = 11;
    let plays = av_corpus(&AvSpec::default(), seed).unwrap();
    assert_eq!(plays.len(), 40);
    let splits = split_corpus(plays, (0.7, 0.1, 0.2), seed).unwrap();
    let fc = FeatureConfig { feature_dim: 1 << 14, ..FeatureConfig::default() };
    let train_table = build_segment_table(&splits.train, SegmentUnit::Scene);
    let test_table = build_segment_table(&splits.test, SegmentUnit::Scene);
    let (querysets, _) = build_eval_querysets(&test_table, SegmentUnit::Scene, seed);

    let mut model =
        EmbeddingModel::new_random(fc, EncodeMode::Collection, 512, seed, 1e-3).unwrap();
    let untrained =
        eval_corpus(&model, &splits.test, &test_table, &querysets, Protocol::Scene).unwrap();
    let untrained_mean = seg_mean(&untrained);
    assert!(
        (0.45..=0.55).contains(&untrained_mean),
        "untrained projection should verify at chance, got {untrained_mean:.4}"
    );

    let settings = TrainSettings { seed, ..TrainSettings::for_unit(SegmentUnit::Scene) };
    train(&mut model, &train_table, &settings).unwrap();
    let trained =
        eval_corpus(&model, &splits.test, &test_table, &querysets, Protocol::Scene).unwrap();
    let trained_mean = seg_mean(&trained);
    assert!(trained_mean >= 0.90, "trained segment AUC {trained_mean:.4} < 0.90");

    budget(t0, Duration::from_secs(300), "verification end-to-end");
    println!(
        "PASS synthetic verification: untrained {untrained_mean:.4}, trained {trained_mean:.4}, {:?}",
        t0.elapsed()
    );
}

fn attrib_scorer_config() -> ScorerConfig {
    ScorerConfig {
        vocab_dim: 1 << 12,
        token_dim: 32,
        hidden: 64,
        window: 9,
        learning_rate: 0.02,
        epochs: 30,
        arity: Arity::ContextOnly,
        char_dim: 0,
        ..ScorerConfig::default()
    }
}

struct AttribModels {
    test: Vec<AnnotatedNovel>,
    ctx: ScorerModel,
    aug: ScorerModel,
    embedder: EmbeddingModel,
}

/// Train context-only and augmented scorers on six synthetic novels,
/// holding out two. Character and quote vectors come from an untrained
/// random-projection embedder; only the scorers learn.
fn train_attrib_models() -> AttribModels {
    let seed = 11;
    let novels = attrib_novels(&AttribSpec::default(), 8, seed).unwrap();
    let (train_n, test_n) = novels.split_at(6);

    let ctx_cfg = attrib_scorer_config();
    let mut examples = Vec::new();
    for n in train_n {
        examples.extend(training_examples(n, &ctx_cfg, None).unwrap());
    }
    let (ctx, _) = train_scorer(&examples, &ctx_cfg, seed).unwrap();

    let fc = FeatureConfig { feature_dim: 1 << 12, ..FeatureConfig::default() };
    let embedder = EmbeddingModel::new_random(fc, EncodeMode::Collection, 64, seed, 1e-3).unwrap();
    let aug_cfg = ScorerConfig { arity: Arity::Augmented, char_dim: 64, ..attrib_scorer_config() };
    let mut aug_examples = Vec::new();
    for n in train_n {
        let chars = build_character_embeddings(n, &embedder, CharSource::Gold, None).unwrap();
        let quotes = quote_vectors(n, &embedder).unwrap();
        aug_examples.extend(training_examples(n, &aug_cfg, Some((&chars, &quotes))).unwrap());
    }
    let (aug, _) = train_scorer(&aug_examples, &aug_cfg, seed).unwrap();

    AttribModels { test: test_n.to_vec(), ctx, aug, embedder }
}

fn pooled_metrics(groups: &[Vec<AttributionOutcome>]) -> AttributionMetrics {
    let refs: Vec<&[AttributionOutcome]> = groups.iter().map(|g| g.as_slice()).collect();
    evaluate_attribution(&refs, 10, None)
}

fn attribute_augmented(
    m: &AttribModels,
    source: CharSource,
    base: Option<&ScorerModel>,
) -> Vec<Vec<AttributionOutcome>> {
    m.test
        .iter()
        .map(|n| {
            let chars = build_character_embeddings(n, &m.embedder, source, base).unwrap();
            let quotes = quote_vectors(n, &m.embedder).unwrap();
            attribute(&m.aug, n, Some((&chars, &quotes))).unwrap()
        })
        .collect()
}

/// On held-out novels whose implicit quotes are only separable by speaker
/// style, the trained context-only scorer solves explicit quotes while the
/// style-augmented scorer beats it on implicit ones by >= 10 points.
#[test]
fn augmented_scorer_beats_context_only_on_implicit() {
    let t0 = Instant::now();
    let m = train_attrib_models();

    let ctx_groups: Vec<Vec<AttributionOutcome>> =
        m.test.iter().map(|n| attribute(&m.ctx, n, None).unwrap()).collect();
    let ctx = pooled_metrics(&ctx_groups);
    let aug = pooled_metrics(&attribute_augmented(&m, CharSource::Gold, None));

    let ctx_explicit = ctx.per_type[&QuoteType::Explicit].accuracy().unwrap();
    let ctx_implicit = ctx.per_type[&QuoteType::Implicit].accuracy().unwrap();
    let aug_implicit = aug.per_type[&QuoteType::Implicit].accuracy().unwrap();
    assert_eq!(ctx_explicit, 1.0, "context-only must solve explicit quotes");
    assert!(
        aug_implicit >= ctx_implicit + 0.10,
        "implicit accuracy {aug_implicit:.3} must beat context-only {ctx_implicit:.3} by 10 points"
    );

    budget(t0, Duration::from_secs(600), "attribution end-to-end");
    println!(
        "PASS synthetic attribution: explicit {:.0}%, implicit {:.0}% -> {:.0}%, {:?}",
        100.0 * ctx_explicit,
        100.0 * ctx_implicit,
        100.0 * aug_implicit,
        t0.elapsed()
    );
}

/// When the context-only scorer is near-perfect on explicit quotes, the
/// character collections it predicts match the gold ones, so augmented
/// accuracy is unchanged whichever source built them.
#[test]
fn gold_and_predicted_collections_agree_when_explicit_is_solved() {
    let m = train_attrib_models();
    let ctx_groups: Vec<Vec<AttributionOutcome>> =
        m.test.iter().map(|n| attribute(&m.ctx, n, None).unwrap()).collect();
    let ctx = pooled_metrics(&ctx_groups);
    let ctx_explicit = ctx.per_type[&QuoteType::Explicit].accuracy().unwrap();
    assert!(ctx_explicit >= 0.99, "precondition: explicit accuracy {ctx_explicit:.3} < 0.99");

    let gold = pooled_metrics(&attribute_augmented(&m, CharSource::Gold, None));
    let predicted = pooled_metrics(&attribute_augmented(&m, CharSource::Predicted, Some(&m.ctx)));
    let g = gold.overall.accuracy().unwrap();
    let p = predicted.overall.accuracy().unwrap();
    assert!(
        (g - p).abs() <= 0.01 + 1e-12,
        "gold-source {g:.4} and predicted-source {p:.4} differ by more than one point"
    );
    println!(
        "PASS gold vs predicted collections: overall {:.1}% vs {:.1}%",
        100.0 * g,
        100.0 * p
    );
}

/// Quotes whose gold speaker never appears among the window candidates are
/// reported as exactly k/N unanswerable, and they cap overall accuracy at
/// 1 - k/N no matter what the scorer does.
#[test]
fn unanswerable_rate_is_exact_and_bounds_accuracy() {
    for (total, missing, seed) in [(20usize, 5usize, 13u64), (21, 7, 29)] {
        let novel = unanswerable_novel(total, missing, seed).unwrap();
        let cfg = ScorerConfig {
            vocab_dim: 1 << 10,
            token_dim: 16,
            hidden: 32,
            window: 9,
            arity: Arity::ContextOnly,
            char_dim: 0,
            ..ScorerConfig::default()
        };
        let scorer = ScorerModel::new_random(cfg, seed).unwrap();
        let outcomes = attribute(&scorer, &novel, None).unwrap();
        assert_eq!(outcomes.len(), total);
        for (i, o) in outcomes.iter().enumerate() {
            assert_eq!(o.unanswerable, i < missing, "quote {i}");
        }

        let metrics = evaluate_attribution(&[outcomes.as_slice()], 1, None);
        assert_eq!(metrics.overall.evaluated, total);
        assert_eq!(metrics.unanswerable, missing);
        assert_eq!(metrics.unanswerable_fraction(), missing as f64 / total as f64);
        assert!(
            metrics.overall.accuracy().unwrap() <= 1.0 - metrics.unanswerable_fraction(),
            "accuracy must be capped by the unanswerable mass"
        );
    }
    println!("PASS unanswerable semantics: exact fraction, accuracy bound holds");
}

fn qattr_cmd(args: &[String]) {
    let out = Command::new(env!("CARGO_BIN_EXE_qattr")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "qattr {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn snapshot_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

/// Every subcommand, run twice with identical inputs and seed, writes
/// byte-identical artifacts.
#[test]
fn cli_runs_are_byte_identical() {
    let work = tempfile::tempdir().unwrap();
    let plays_dir = work.path().join("plays");
    let novels_dir = work.path().join("novels");
    std::fs::create_dir(&plays_dir).unwrap();
    std::fs::create_dir(&novels_dir).unwrap();

    let spec = AvSpec { plays: 9, characters: 3, scenes: 3, ..AvSpec::default() };
    for i in 0..spec.plays {
        let markup = av_play_markup(&spec, i, 21);
        std::fs::write(plays_dir.join(format!("play-{i:02}.xml")), markup).unwrap();
    }
    let nspec = AttribSpec { rounds: 2, ..AttribSpec::default() };
    for i in 0..3 {
        let (text, annotation) = attrib_novel_raw(&nspec, i, 21);
        std::fs::write(novels_dir.join(format!("novel-{i}.txt")), text).unwrap();
        std::fs::write(novels_dir.join(format!("novel-{i}.json")), annotation).unwrap();
    }

    let out_root = work.path().join("out");
    let s = |p: &Path| p.display().to_string();
    let run_pipeline = || {
        let corpus = out_root.join("corpus");
        let ncorpus = out_root.join("ncorpus");
        let embed = out_root.join("embed");
        let av = out_root.join("av");
        let scorer = out_root.join("scorer");
        let attrib = out_root.join("attrib");
        let report = out_root.join("report");
        let args: Vec<Vec<String>> = vec![
            vec![
                "build-corpus".into(),
                "--input".into(), s(&plays_dir),
                "--kind".into(), "plays".into(),
                "--unit".into(), "scene".into(),
                "--ratios".into(), "0.6,0.2,0.2".into(),
                "--seed".into(), "21".into(),
                "--out".into(), s(&corpus),
            ],
            vec![
                "build-corpus".into(),
                "--input".into(), s(&novels_dir),
                "--kind".into(), "novels".into(),
                "--out".into(), s(&ncorpus),
            ],
            vec![
                "train-embed".into(),
                "--corpus".into(), s(&corpus.join("corpus.json")),
                "--unit".into(), "scene".into(),
                "--dim".into(), "32".into(),
                "--feature-dim".into(), "4096".into(),
                "--epochs".into(), "4".into(),
                "--seed".into(), "21".into(),
                "--out".into(), s(&embed),
            ],
            vec![
                "eval-av".into(),
                "--corpus".into(), s(&corpus.join("corpus.json")),
                "--model".into(), s(&embed.join("model.qaemb")),
                "--protocol".into(), "scene".into(),
                "--split".into(), "test".into(),
                "--seed".into(), "21".into(),
                "--out".into(), s(&av),
            ],
            vec![
                "train-attrib".into(),
                "--novels".into(), s(&ncorpus.join("novels.json")),
                "--window".into(), "9".into(),
                "--vocab-dim".into(), "4096".into(),
                "--token-dim".into(), "16".into(),
                "--hidden".into(), "32".into(),
                "--learning-rate".into(), "0.02".into(),
                "--epochs".into(), "6".into(),
                "--seed".into(), "21".into(),
                "--out".into(), s(&scorer),
            ],
            vec![
                "eval-attrib".into(),
                "--novels".into(), s(&ncorpus.join("novels.json")),
                "--scorers".into(), s(&scorer),
                "--seed".into(), "21".into(),
                "--out".into(), s(&attrib),
            ],
            vec![
                "report".into(),
                "--stats".into(), s(&corpus.join("stats.json")),
                "--auc".into(), s(&av.join("auc_scene.json")),
                "--metrics".into(), s(&attrib.join("metrics.json")),
                "--compare-metrics".into(),
                s(&attrib.join("metrics.json")),
                s(&attrib.join("metrics.json")),
                "--seed".into(), "21".into(),
                "--out".into(), s(&report),
            ],
        ];
        for cmd in &args {
            qattr_cmd(cmd);
        }
    };

    run_pipeline();
    let first = snapshot_tree(&out_root);
    assert!(first.len() >= 25, "pipeline should write artifacts, found {}", first.len());
    std::fs::remove_dir_all(&out_root).unwrap();
    run_pipeline();
    let second = snapshot_tree(&out_root);

    assert_eq!(
        first.keys().collect::<Vec<_>>(),
        second.keys().collect::<Vec<_>>(),
        "file sets differ between identical runs"
    );
    for (path, bytes) in &first {
        assert!(bytes == &second[path], "{path} differs between identical runs");
    }
    println!("PASS determinism: {} artifacts byte-identical across reruns", first.len());
}

fn check_golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| {
        panic!("{}: {e} (run with UPDATE_GOLDEN=1 to create it)", path.display())
    });
    assert!(
        want == actual,
        "{name} drifted from its golden file\n--- golden\n{want}\n--- actual\n{actual}"
    );
}

fn golden_outcome(i: usize, t: QuoteType, predicted: Option<&str>) -> AttributionOutcome {
    AttributionOutcome {
        quote_id: format!("q{i}"),
        quote_type: t,
        gold: Some("a".to_string()),
        predicted: predicted.map(str::to_string),
        unanswerable: predicted.is_none(),
        candidates: predicted.is_some() as usize,
    }
}

/// A block of `n` outcomes of one type: `ok` correct, `missing`
/// unanswerable, the rest wrong.
fn golden_block(
    out: &mut Vec<AttributionOutcome>,
    t: QuoteType,
    n: usize,
    ok: usize,
    missing: usize,
) {
    for i in 0..n {
        let id = out.len();
        let predicted =
            if i < ok { Some("a") } else if i < ok + missing { None } else { Some("b") };
        out.push(golden_outcome(id, t, predicted));
    }
}

/// The corpus-statistics and attribution-accuracy tables keep their column
/// layout and cell formatting, byte for byte.
#[test]
fn report_tables_match_golden_files() {
    let mut per_split = BTreeMap::new();
    per_split.insert(
        Split::Train,
        SplitStats { segments: 541, utterances: 39294, queries: 532, mean_targets_per_query: 4.81 },
    );
    per_split.insert(
        Split::Val,
        SplitStats { segments: 66, utterances: 4841, queries: 64, mean_targets_per_query: 4.63 },
    );
    per_split.insert(
        Split::Test,
        SplitStats { segments: 70, utterances: 5190, queries: 68, mean_targets_per_query: 4.77 },
    );
    let stats = CorpusStats { unit: SegmentUnit::Scene, per_split };
    let table = stats_table(&stats);
    assert_eq!(table.columns, ["split", "segments", "utterances", "queries", "targets/query"]);
    check_golden("stats.csv", &table.to_csv().unwrap());
    check_golden("stats.txt", &table.to_text());

    let mut ctx = Vec::new();
    golden_block(&mut ctx, QuoteType::Explicit, 20, 20, 0);
    golden_block(&mut ctx, QuoteType::Anaphoric, 10, 7, 0);
    golden_block(&mut ctx, QuoteType::Implicit, 20, 7, 3);
    let mut aug = Vec::new();
    golden_block(&mut aug, QuoteType::Explicit, 20, 20, 0);
    golden_block(&mut aug, QuoteType::Anaphoric, 10, 9, 0);
    golden_block(&mut aug, QuoteType::Implicit, 20, 14, 3);
    let m_ctx = evaluate_attribution(&[ctx.as_slice()], 1, None);
    let m_aug = evaluate_attribution(&[aug.as_slice()], 1, None);
    let table = metrics_table(&[("context-only", &m_ctx), ("augmented/gold", &m_aug)]);
    assert_eq!(
        table.columns,
        ["run", "overall", "non-explicit", "explicit", "anaphoric", "implicit", "unanswerable %"]
    );
    check_golden("metrics.csv", &table.to_csv().unwrap());
    check_golden("metrics.txt", &table.to_text());
    println!("PASS report tables: stats and metrics match golden files");
}
