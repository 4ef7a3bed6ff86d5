use std::collections::BTreeMap;
use std::path::PathBuf;

use qattr::corpus::AnnotatedNovel;
use qattr::dataset::{build_eval_querysets, build_segment_table, CorpusSplits, SegmentUnit, Split};
use qattr::embed::{load_vectors, EmbeddingModel};
use qattr::eval::report::{auc_summary_table, per_play_table, Table};
use qattr::eval::{eval_cc, eval_corpus, eval_corpus_vectors, eval_cq, Protocol};
use serde::Serialize;

use crate::config::{FileConfig, Manifest};
use crate::util::{ensure_out_dir, fail, read_json, thread_cap, write_json, write_table, CmdResult};

#[derive(clap::Args)]
pub struct Args {
    /// corpus.json from build-corpus (scene/play protocols).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// novels.json from build-corpus (CC/CQ protocols).
    #[arg(long)]
    pub novels: Option<PathBuf>,
    /// Trained embedder file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Imported collection vectors instead of a model (scene/play only).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// scene | play | cc | cq
    #[arg(long)]
    pub protocol: String,
    /// Corpus split to evaluate: train | val | test.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Effective {
    protocol: String,
    split: Option<String>,
    source: &'static str,
}

#[derive(Serialize)]
struct NovelAucReport {
    protocol: Protocol,
    per_novel: Vec<(String, f64)>,
    mean: f64,
}

fn parse_split(name: &str) -> Result<Split, Vec<String>> {
    match name {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => fail(format!("unknown split \"{other}\" (use train, val, or test)")),
    }
}

pub fn run(args: &Args) -> CmdResult {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    ensure_out_dir(&args.out)?;

    match args.protocol.as_str() {
        "scene" => eval_plays(args, seed, Protocol::Scene, SegmentUnit::Scene),
        "play" => eval_plays(args, seed, Protocol::Play, SegmentUnit::Play),
        "cc" => eval_novels(args, seed, Protocol::CC),
        "cq" => eval_novels(args, seed, Protocol::CQ),
        other => fail(format!("unknown protocol \"{other}\" (use scene, play, cc, or cq)")),
    }
}

fn eval_plays(args: &Args, seed: u64, protocol: Protocol, unit: SegmentUnit) -> CmdResult {
    let Some(corpus_path) = &args.corpus else {
        return fail(format!("--corpus is required for the {} protocol", protocol.name()));
    };
    let split_name = args.split.clone().unwrap_or_else(|| "test".into());
    let split = parse_split(&split_name)?;
    let splits: CorpusSplits = read_json(corpus_path)?;
    let plays = splits.get(split);
    let table = build_segment_table(plays, unit);
    let (querysets, _skipped) = build_eval_querysets(&table, unit, seed);

    let (report, source) = match (&args.model, &args.vectors) {
        (Some(model_path), None) => {
            let model = EmbeddingModel::load(model_path).map_err(|e| vec![e.to_string()])?;
            let report = eval_corpus(&model, plays, &table, &querysets, protocol)
                .map_err(|e| vec![e.to_string()])?;
            (report, "model")
        }
        (None, Some(vec_path)) => {
            let vectors = load_vectors(vec_path).map_err(|e| vec![e.to_string()])?;
            let report = eval_corpus_vectors(&vectors, plays, &querysets, protocol)
                .map_err(|e| vec![e.to_string()])?;
            (report, "vectors")
        }
        _ => return fail("exactly one of --model or --vectors is required".into()),
    };

    let stem = format!("auc_{}", protocol.name().to_lowercase());
    write_json(&args.out.join(format!("{stem}.json")), &report)?;
    write_table(&args.out, "auc_summary", &auc_summary_table(&[&report]))?;
    write_table(&args.out, &format!("per_play_{}", protocol.name().to_lowercase()), &per_play_table(&report))?;

    let mut inputs = BTreeMap::new();
    inputs.insert("corpus", corpus_path.display().to_string());
    if let Some(p) = &args.model {
        inputs.insert("model", p.display().to_string());
    }
    if let Some(p) = &args.vectors {
        inputs.insert("vectors", p.display().to_string());
    }
    Manifest {
        command: "eval-av",
        seed,
        threads: thread_cap(),
        inputs,
        effective: Effective {
            protocol: args.protocol.clone(),
            split: Some(split_name),
            source,
        },
    }
    .write(&args.out)
}

fn eval_novels(args: &Args, seed: u64, protocol: Protocol) -> CmdResult {
    let Some(novels_path) = &args.novels else {
        return fail(format!("--novels is required for the {} protocol", protocol.name()));
    };
    let Some(model_path) = &args.model else {
        return fail(format!("--model is required for the {} protocol", protocol.name()));
    };
    let novels: Vec<AnnotatedNovel> = read_json(novels_path)?;
    let model = EmbeddingModel::load(model_path).map_err(|e| vec![e.to_string()])?;

    let mut per_novel = Vec::new();
    for novel in &novels {
        let auc = match protocol {
            Protocol::CC => eval_cc(&model, novel),
            Protocol::CQ => eval_cq(&model, novel),
            _ => unreachable!("novel protocols only"),
        }
        .map_err(|e| vec![format!("{}: {e}", novel.id)])?;
        per_novel.push((novel.id.clone(), auc));
    }
    if per_novel.is_empty() {
        return fail("no novels to evaluate".into());
    }
    let mean = per_novel.iter().map(|(_, a)| a).sum::<f64>() / per_novel.len() as f64;
    let report = NovelAucReport { protocol, per_novel, mean };

    let stem = format!("auc_{}", protocol.name().to_lowercase());
    write_json(&args.out.join(format!("{stem}.json")), &report)?;
    let mut table = Table::new(
        &format!("Novel AUC ({} protocol)", protocol.name()),
        &["novel", "AUC (%)"],
    );
    for (id, auc) in &report.per_novel {
        table.push_row(vec![id.clone(), format!("{:.1}", 100.0 * auc)]).map_err(|e| vec![e.to_string()])?;
    }
    table.push_row(vec!["mean".into(), format!("{:.1}", 100.0 * report.mean)]).map_err(|e| vec![e.to_string()])?;
    write_table(&args.out, &stem, &table)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("novels", novels_path.display().to_string());
    inputs.insert("model", model_path.display().to_string());
    Manifest {
        command: "eval-av",
        seed,
        threads: thread_cap(),
        inputs,
        effective: Effective { protocol: args.protocol.clone(), split: None, source: "model" },
    }
    .write(&args.out)
}
