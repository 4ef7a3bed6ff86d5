use std::collections::BTreeMap;
use std::path::PathBuf;

use qattr::dataset::{build_segment_table, CorpusSplits};
use qattr::embed::{train, EmbeddingModel, EncodeMode, FeatureConfig, TrainSettings, DEFAULT_DIM, DEFAULT_INIT_SCALE};
use serde::Serialize;

use crate::build_corpus::parse_unit;
use crate::config::{FileConfig, Manifest};
use crate::util::{ensure_out_dir, read_json, thread_cap, write_json, CmdResult};

#[derive(clap::Args)]
pub struct Args {
    /// corpus.json from build-corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Segmentation unit: scene | play.
    #[arg(long)]
    pub unit: Option<String>,
    /// Embedding width d.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Hashed feature space size.
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Segments drawn per training batch.
    #[arg(long)]
    pub batch_segments: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Effective {
    unit: String,
    dim: usize,
    feature_dim: usize,
    learning_rate: f64,
    epochs: usize,
    temperature: f64,
    batch_segments: usize,
    init_scale: f64,
}

pub fn run(args: &Args) -> CmdResult {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let unit_name = args.unit.clone().or(cfg.unit.clone()).unwrap_or_else(|| "scene".into());
    let unit = parse_unit(&unit_name)?;
    ensure_out_dir(&args.out)?;

    let splits: CorpusSplits = read_json(&args.corpus)?;

    let defaults = TrainSettings::for_unit(unit);
    let settings = TrainSettings {
        learning_rate: args.learning_rate.or(cfg.embed.learning_rate).unwrap_or(defaults.learning_rate),
        epochs: args.epochs.or(cfg.embed.epochs).unwrap_or(defaults.epochs),
        temperature: args.temperature.or(cfg.embed.temperature).unwrap_or(defaults.temperature),
        batch_segments: args
            .batch_segments
            .or(cfg.embed.batch_segments)
            .unwrap_or(defaults.batch_segments),
        seed,
    };
    let feature_config = FeatureConfig {
        feature_dim: args.feature_dim.or(cfg.embed.feature_dim).unwrap_or_else(|| FeatureConfig::default().feature_dim),
        ..FeatureConfig::default()
    };
    let dim = args.dim.or(cfg.embed.dim).unwrap_or(DEFAULT_DIM);

    let effective = Effective {
        unit: unit_name,
        dim,
        feature_dim: feature_config.feature_dim,
        learning_rate: settings.learning_rate,
        epochs: settings.epochs,
        temperature: settings.temperature,
        batch_segments: settings.batch_segments,
        init_scale: DEFAULT_INIT_SCALE,
    };

    let mut model =
        EmbeddingModel::new_random(feature_config, EncodeMode::Collection, dim, seed, DEFAULT_INIT_SCALE)
            .map_err(|e| vec![e.to_string()])?;
    let table = build_segment_table(&splits.train, unit);
    let report = train(&mut model, &table, &settings).map_err(|e| vec![e.to_string()])?;

    model.save(&args.out.join("model.qaemb")).map_err(|e| vec![e.to_string()])?;
    write_json(&args.out.join("train_report.json"), &report)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("corpus", args.corpus.display().to_string());
    Manifest { command: "train-embed", seed, threads: thread_cap(), inputs, effective }
        .write(&args.out)
}
