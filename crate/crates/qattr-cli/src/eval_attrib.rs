use std::collections::BTreeMap;
use std::path::PathBuf;

use qattr::attrib::{
    attribute, evaluate_attribution, metrics_table, predictions_table, AttributionMetrics,
    AttributionOutcome, ScorerModel,
};
use qattr::corpus::AnnotatedNovel;
use serde::{Deserialize, Serialize};

use crate::attrib_common::{load_folds, partition, AugmentArgs, AugmentProvider};
use crate::config::{FileConfig, Manifest};
use crate::util::{ensure_out_dir, fail, read_json, thread_cap, write_json, write_table, CmdResult};

#[derive(clap::Args)]
pub struct Args {
    /// novels.json from build-corpus.
    #[arg(long)]
    pub novels: PathBuf,
    /// Cross-validation fold file matching the training run.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    /// Directory of scorer-<fold>.qascr files from train-attrib.
    #[arg(long)]
    pub scorers: Option<PathBuf>,
    /// One scorer file used for every fold.
    #[arg(long)]
    pub scorer: Option<PathBuf>,
    /// Minimum gold quotes a speaker needs to enter the evaluation.
    #[arg(long)]
    pub min_quotes: Option<usize>,
    /// Drop novels whose unanswerable fraction exceeds this.
    #[arg(long)]
    pub max_unanswerable: Option<f64>,
    /// Row label in the metrics table.
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Stored metrics for one evaluation run; `report` renders and compares
/// these.
#[derive(Serialize, Deserialize)]
pub struct MetricsFile {
    pub label: String,
    pub arity: String,
    pub char_source: Option<String>,
    pub min_quotes: usize,
    pub max_unanswerable: Option<f64>,
    pub all: AttributionMetrics,
    pub folds: BTreeMap<String, AttributionMetrics>,
}

#[derive(Serialize)]
struct Effective {
    label: String,
    arity: String,
    char_source: Option<String>,
    min_quotes: usize,
    max_unanswerable: Option<f64>,
    folds: Vec<String>,
}

pub fn run(args: &Args) -> CmdResult {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let min_quotes = args.min_quotes.unwrap_or(10);
    ensure_out_dir(&args.out)?;

    let novels: Vec<AnnotatedNovel> = read_json(&args.novels)?;
    let folds = load_folds(args.folds.as_deref(), &novels)?;

    let scorer_for_fold = |name: &str| -> Result<ScorerModel, Vec<String>> {
        let path = match (&args.scorer, &args.scorers) {
            (Some(file), None) => file.clone(),
            (None, Some(dir)) => dir.join(format!("scorer-{name}.qascr")),
            _ => return fail("exactly one of --scorer or --scorers is required".into()),
        };
        ScorerModel::load(&path).map_err(|e| vec![format!("{}: {e}", path.display())])
    };

    let first_scorer = scorer_for_fold(&folds[0].name)?;
    let arity = first_scorer.config.arity;
    let (provider, source_label, _char_dim) = AugmentProvider::resolve(arity, &args.augment)?;

    let mut groups: Vec<Vec<AttributionOutcome>> = Vec::new();
    let mut fold_metrics: BTreeMap<String, AttributionMetrics> = BTreeMap::new();
    for (i, fold) in folds.iter().enumerate() {
        let scorer = if i == 0 { first_scorer.clone() } else { scorer_for_fold(&fold.name)? };
        if scorer.config.arity != arity {
            return fail(format!(
                "fold \"{}\" scorer arity {} differs from {}",
                fold.name,
                scorer.config.arity.name(),
                arity.name()
            ));
        }
        let (_train, test_novels) = partition(fold, &novels);
        if test_novels.is_empty() {
            return fail(format!("fold \"{}\" has no test novels", fold.name));
        }
        let mut fold_groups: Vec<Vec<AttributionOutcome>> = Vec::new();
        let mut predictions = Vec::new();
        for novel in &test_novels {
            let augment = provider.for_novel(novel)?;
            let outcomes = attribute(&scorer, novel, augment.as_ref().map(|(c, q)| (c, q)))
                .map_err(|e| vec![format!("{}: {e}", novel.id)])?;
            predictions.extend(outcomes.iter().cloned());
            fold_groups.push(outcomes);
        }
        write_table(
            &args.out,
            &format!("predictions-{}", fold.name),
            &predictions_table(&predictions),
        )?;
        let refs: Vec<&[AttributionOutcome]> = fold_groups.iter().map(|g| g.as_slice()).collect();
        fold_metrics.insert(
            fold.name.clone(),
            evaluate_attribution(&refs, min_quotes, args.max_unanswerable),
        );
        groups.extend(fold_groups);
    }

    let refs: Vec<&[AttributionOutcome]> = groups.iter().map(|g| g.as_slice()).collect();
    let all = evaluate_attribution(&refs, min_quotes, args.max_unanswerable);

    let label = args.label.clone().unwrap_or_else(|| match &source_label {
        Some(source) => format!("{}/{source}", arity.name()),
        None => arity.name().to_string(),
    });

    let mut rows: Vec<(String, &AttributionMetrics)> = vec![(label.clone(), &all)];
    if folds.len() > 1 {
        for (name, m) in &fold_metrics {
            rows.push((format!("{label} [{name}]"), m));
        }
    }
    let row_refs: Vec<(&str, &AttributionMetrics)> =
        rows.iter().map(|(l, m)| (l.as_str(), *m)).collect();
    write_table(&args.out, "metrics", &metrics_table(&row_refs))?;

    let metrics_file = MetricsFile {
        label: label.clone(),
        arity: arity.name().to_string(),
        char_source: source_label.clone(),
        min_quotes,
        max_unanswerable: args.max_unanswerable,
        all,
        folds: fold_metrics,
    };
    write_json(&args.out.join("metrics.json"), &metrics_file)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("novels", args.novels.display().to_string());
    if let Some(p) = &args.folds {
        inputs.insert("folds", p.display().to_string());
    }
    if let Some(p) = &args.scorer {
        inputs.insert("scorer", p.display().to_string());
    }
    if let Some(p) = &args.scorers {
        inputs.insert("scorers", p.display().to_string());
    }
    if let Some(p) = &args.augment.embedder {
        inputs.insert("embedder", p.display().to_string());
    }
    if let Some(p) = &args.augment.base_scorer {
        inputs.insert("base_scorer", p.display().to_string());
    }
    Manifest {
        command: "eval-attrib",
        seed,
        threads: thread_cap(),
        inputs,
        effective: Effective {
            label,
            arity: arity.name().to_string(),
            char_source: source_label,
            min_quotes,
            max_unanswerable: args.max_unanswerable,
            folds: folds.iter().map(|f| f.name.clone()).collect(),
        },
    }
    .write(&args.out)
}
