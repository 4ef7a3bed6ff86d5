use std::collections::BTreeMap;
use std::path::PathBuf;

use qattr::attrib::{train_scorer, training_examples, MentionMode, ScorerConfig};
use qattr::corpus::AnnotatedNovel;
use serde::Serialize;

use crate::attrib_common::{load_folds, parse_arity, partition, AugmentArgs, AugmentProvider};
use crate::config::{FileConfig, Manifest};
use crate::util::{ensure_out_dir, fail, read_json, thread_cap, write_json, CmdResult};

#[derive(clap::Args)]
pub struct Args {
    /// novels.json from build-corpus.
    #[arg(long)]
    pub novels: PathBuf,
    /// Cross-validation fold file; omitted = one fold over everything.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    /// context-only | augmented.
    #[arg(long)]
    pub arity: Option<String>,
    /// Context window w in tokens on each side of the quote.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub vocab_dim: Option<usize>,
    #[arg(long)]
    pub token_dim: Option<usize>,
    /// Neighborhood radius of the context encoder.
    #[arg(long)]
    pub radius: Option<usize>,
    /// first-last | mean.
    #[arg(long)]
    pub mention_mode: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Effective {
    scorer: ScorerConfig,
    char_source: Option<String>,
    folds: Vec<String>,
}

pub fn resolve_scorer_config(
    args_arity: Option<&str>,
    window: Option<usize>,
    hidden: Option<usize>,
    vocab_dim: Option<usize>,
    token_dim: Option<usize>,
    radius: Option<usize>,
    mention_mode: Option<&str>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    cfg: &FileConfig,
) -> Result<ScorerConfig, Vec<String>> {
    let defaults = ScorerConfig::default();
    let arity = parse_arity(args_arity.unwrap_or("context-only"))?;
    let mention_mode = match mention_mode {
        None => defaults.mention_mode,
        Some("first-last") => MentionMode::FirstLast,
        Some("mean") => MentionMode::Mean,
        Some(other) => return fail(format!("unknown mention mode \"{other}\" (use first-last or mean)")),
    };
    Ok(ScorerConfig {
        vocab_dim: vocab_dim.or(cfg.scorer.vocab_dim).unwrap_or(defaults.vocab_dim),
        token_dim: token_dim.or(cfg.scorer.token_dim).unwrap_or(defaults.token_dim),
        hidden: hidden.or(cfg.scorer.hidden).unwrap_or(defaults.hidden),
        window: window.or(cfg.scorer.window).unwrap_or(defaults.window),
        radius: radius.or(cfg.scorer.radius).unwrap_or(defaults.radius),
        mention_mode,
        arity,
        char_dim: 0,
        learning_rate: learning_rate.or(cfg.scorer.learning_rate).unwrap_or(defaults.learning_rate),
        epochs: epochs.or(cfg.scorer.epochs).unwrap_or(defaults.epochs),
    })
}

pub fn run(args: &Args) -> CmdResult {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    ensure_out_dir(&args.out)?;

    let novels: Vec<AnnotatedNovel> = read_json(&args.novels)?;
    let folds = load_folds(args.folds.as_deref(), &novels)?;

    let mut scorer_config = resolve_scorer_config(
        args.arity.as_deref(),
        args.window,
        args.hidden,
        args.vocab_dim,
        args.token_dim,
        args.radius,
        args.mention_mode.as_deref(),
        args.learning_rate,
        args.epochs,
        &cfg,
    )?;
    let (provider, source_label, char_dim) =
        AugmentProvider::resolve(scorer_config.arity, &args.augment)?;
    scorer_config.char_dim = char_dim;

    let mut losses: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for fold in &folds {
        let (train_novels, _test) = partition(fold, &novels);
        if train_novels.is_empty() {
            return fail(format!("fold \"{}\" has no training novels", fold.name));
        }
        let mut examples = Vec::new();
        for novel in &train_novels {
            let augment = provider.for_novel(novel)?;
            let novel_examples =
                training_examples(novel, &scorer_config, augment.as_ref().map(|(c, q)| (c, q)))
                    .map_err(|e| vec![format!("{}: {e}", novel.id)])?;
            examples.extend(novel_examples);
        }
        let (model, history) = train_scorer(&examples, &scorer_config, seed)
            .map_err(|e| vec![format!("fold \"{}\": {e}", fold.name)])?;
        model
            .save(&args.out.join(format!("scorer-{}.qascr", fold.name)))
            .map_err(|e| vec![e.to_string()])?;
        losses.insert(fold.name.clone(), history);
    }
    write_json(&args.out.join("train_report.json"), &losses)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("novels", args.novels.display().to_string());
    if let Some(p) = &args.folds {
        inputs.insert("folds", p.display().to_string());
    }
    if let Some(p) = &args.augment.embedder {
        inputs.insert("embedder", p.display().to_string());
    }
    if let Some(p) = &args.augment.base_scorer {
        inputs.insert("base_scorer", p.display().to_string());
    }
    Manifest {
        command: "train-attrib",
        seed,
        threads: thread_cap(),
        inputs,
        effective: Effective {
            scorer: scorer_config,
            char_source: source_label,
            folds: folds.iter().map(|f| f.name.clone()).collect(),
        },
    }
    .write(&args.out)
}
