use std::collections::BTreeMap;
use std::path::PathBuf;

use qattr::corpus::{corpus_stats, parse_novel, parse_play, AnnotatedNovel, Play, QuoteType};
use qattr::dataset::{build_eval_querysets, build_segment_table, split_corpus, QuerySet, SegmentUnit, Split};
use qattr::eval::report::{stats_table, Table};
use serde::Serialize;

use crate::config::{FileConfig, Manifest};
use crate::util::{
    ensure_out_dir, fail, file_label, files_with_ext, read_to_string, thread_cap, write_json,
    write_table, write_text, CmdResult,
};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of .xml play files or .txt/.json novel pairs.
    #[arg(long)]
    pub input: PathBuf,
    /// Input kind: plays | novels.
    #[arg(long)]
    pub kind: String,
    /// Segmentation unit for plays: scene | play.
    #[arg(long)]
    pub unit: Option<String>,
    /// Comma-separated train,val,test fractions (plays only).
    #[arg(long)]
    pub ratios: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_unit(name: &str) -> Result<SegmentUnit, Vec<String>> {
    match name {
        "scene" => Ok(SegmentUnit::Scene),
        "play" => Ok(SegmentUnit::Play),
        other => fail(format!("unknown unit \"{other}\" (use scene or play)")),
    }
}

fn parse_ratios(text: &str) -> Result<(f64, f64, f64), Vec<String>> {
    let parts: Vec<f64> = text.split(',').filter_map(|p| p.trim().parse().ok()).collect();
    if parts.len() != 3 || text.split(',').count() != 3 {
        return fail(format!("ratios \"{text}\" must be three comma-separated numbers"));
    }
    Ok((parts[0], parts[1], parts[2]))
}

#[derive(Serialize)]
struct Effective {
    kind: String,
    unit: Option<String>,
    ratios: Option<(f64, f64, f64)>,
}

#[derive(Serialize)]
struct QuerysetAudit {
    unit: SegmentUnit,
    /// Segments with too few eligible characters, per split.
    skipped: BTreeMap<&'static str, usize>,
    per_split: BTreeMap<&'static str, Vec<QuerySet>>,
}

pub fn run(args: &Args) -> CmdResult {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    ensure_out_dir(&args.out)?;
    match args.kind.as_str() {
        "plays" => build_plays(args, &cfg, seed),
        "novels" => build_novels(args, seed),
        other => fail(format!("unknown corpus kind \"{other}\" (use plays or novels)")),
    }
}

fn build_plays(args: &Args, cfg: &FileConfig, seed: u64) -> CmdResult {
    let unit_name = args.unit.clone().or(cfg.unit.clone()).unwrap_or_else(|| "scene".into());
    let unit = parse_unit(&unit_name)?;
    let ratios = match &args.ratios {
        Some(text) => parse_ratios(text)?,
        None => cfg.ratios.unwrap_or((0.8, 0.1, 0.1)),
    };

    let files = files_with_ext(&args.input, "xml")?;
    if files.is_empty() {
        return fail(format!("no .xml plays under {}", args.input.display()));
    }
    let mut plays = Vec::new();
    let mut failures = Vec::new();
    for path in &files {
        match read_to_string(path).and_then(|s| parse_play(&s).map_err(|e| vec![e.to_string()])) {
            Ok(play) => plays.push(play),
            Err(errs) => failures.extend(errs.into_iter().map(|e| format!("{}: {e}", file_label(path)))),
        }
    }
    if !failures.is_empty() {
        return Err(failures);
    }

    // Under scene segmentation a play without scene or act markup cannot
    // contribute segments; drop it and say so.
    let mut excluded: Vec<String> = Vec::new();
    if unit == SegmentUnit::Scene {
        let (keep, drop): (Vec<Play>, Vec<Play>) =
            plays.into_iter().partition(|p| p.scene_split_eligible);
        plays = keep;
        excluded = drop.into_iter().map(|p| p.id).collect();
        for id in &excluded {
            eprintln!("excluding {id}: no scene or act markup under scene segmentation");
        }
    }
    write_text(&args.out.join("excluded.txt"), &excluded.iter().fold(String::new(), |mut s, id| {
        s.push_str(id);
        s.push('\n');
        s
    }))?;

    let splits = split_corpus(plays, ratios, seed).map_err(|e| vec![e.to_string()])?;

    let mut audit = QuerysetAudit { unit, skipped: BTreeMap::new(), per_split: BTreeMap::new() };
    let mut stats_input: Vec<(Split, &[Play])> = Vec::new();
    let mut query_input: Vec<(Split, Vec<QuerySet>)> = Vec::new();
    for split in Split::ALL {
        let plays = splits.get(split);
        let table = build_segment_table(plays, unit);
        let (querysets, skipped) = build_eval_querysets(&table, unit, seed);
        audit.skipped.insert(split.name(), skipped);
        audit.per_split.insert(split.name(), querysets.clone());
        stats_input.push((split, plays));
        query_input.push((split, querysets));
    }
    let query_refs: Vec<(Split, &[QuerySet])> =
        query_input.iter().map(|(s, q)| (*s, q.as_slice())).collect();
    let stats = corpus_stats(&stats_input, &query_refs, unit);

    write_json(&args.out.join("corpus.json"), &splits)?;
    write_json(&args.out.join("querysets.json"), &audit)?;
    write_json(&args.out.join("stats.json"), &stats)?;
    write_table(&args.out, "stats", &stats_table(&stats))?;

    let mut inputs = BTreeMap::new();
    inputs.insert("input", args.input.display().to_string());
    Manifest {
        command: "build-corpus",
        seed,
        threads: thread_cap(),
        inputs,
        effective: Effective {
            kind: "plays".into(),
            unit: Some(unit_name),
            ratios: Some(ratios),
        },
    }
    .write(&args.out)
}

fn build_novels(args: &Args, seed: u64) -> CmdResult {
    let files = files_with_ext(&args.input, "txt")?;
    if files.is_empty() {
        return fail(format!("no .txt novels under {}", args.input.display()));
    }
    let mut novels: Vec<AnnotatedNovel> = Vec::new();
    let mut failures = Vec::new();
    for path in &files {
        let annotation = path.with_extension("json");
        let parsed = read_to_string(path).and_then(|text| {
            let ann = read_to_string(&annotation)?;
            parse_novel(&text, &ann).map_err(|e| vec![e.to_string()])
        });
        match parsed {
            Ok(novel) => {
                if novels.iter().any(|n| n.id == novel.id) {
                    failures.push(format!("{}: duplicate novel id \"{}\"", file_label(path), novel.id));
                } else {
                    novels.push(novel);
                }
            }
            Err(errs) => failures.extend(errs.into_iter().map(|e| format!("{}: {e}", file_label(path)))),
        }
    }
    if !failures.is_empty() {
        return Err(failures);
    }

    let mut table = Table::new(
        "Novel corpus",
        &["novel", "characters", "quotes", "explicit", "anaphoric", "implicit"],
    );
    for novel in &novels {
        let count =
            |t: QuoteType| novel.quotes.iter().filter(|q| q.quote_type == t).count().to_string();
        table
            .push_row(vec![
                novel.id.clone(),
                novel.characters.len().to_string(),
                novel.quotes.len().to_string(),
                count(QuoteType::Explicit),
                count(QuoteType::Anaphoric),
                count(QuoteType::Implicit),
            ])
            .map_err(|e| vec![e.to_string()])?;
    }

    write_json(&args.out.join("novels.json"), &novels)?;
    write_table(&args.out, "novel_stats", &table)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("input", args.input.display().to_string());
    Manifest {
        command: "build-corpus",
        seed,
        threads: thread_cap(),
        inputs,
        effective: Effective { kind: "novels".into(), unit: None, ratios: None },
    }
    .write(&args.out)
}
