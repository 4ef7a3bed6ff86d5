use std::collections::BTreeMap;
use std::path::PathBuf;

use qattr::attrib::{metrics_table, AttributionMetrics};
use qattr::corpus::{CorpusStats, QuoteType};
use qattr::eval::report::{auc_summary_table, per_play_table, significance_table, stats_table, Table};
use qattr::eval::{paired_ttest, AucReport};
use serde::Serialize;

use crate::config::{FileConfig, Manifest};
use crate::eval_attrib::MetricsFile;
use crate::util::{ensure_out_dir, fail, file_label, read_json, thread_cap, write_json, write_table, CmdResult};

#[derive(clap::Args)]
pub struct Args {
    /// stats.json from build-corpus.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// AUC report files; summarized together, broken out per play.
    #[arg(long)]
    pub auc: Vec<PathBuf>,
    /// Two AUC report files; paired t-test over their shared plays.
    #[arg(long, num_args = 2)]
    pub compare_auc: Option<Vec<PathBuf>>,
    /// metrics.json files from eval-attrib.
    #[arg(long)]
    pub metrics: Vec<PathBuf>,
    /// Two metrics.json files; per-type accuracy deltas.
    #[arg(long, num_args = 2)]
    pub compare_metrics: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Effective {
    sections: Vec<&'static str>,
}

fn pct(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.1}", 100.0 * v),
        None => "-".into(),
    }
}

fn delta(a: Option<f64>, b: Option<f64>) -> String {
    match (a, b) {
        (Some(a), Some(b)) => format!("{:+.1}", 100.0 * (b - a)),
        _ => "-".into(),
    }
}

/// Accuracy deltas between two runs, one row per measure, in points.
fn delta_table(a: &MetricsFile, b: &MetricsFile) -> Result<Table, Vec<String>> {
    let mut t = Table::new(
        "Accuracy delta (points)",
        &["measure", &a.label, &b.label, "delta"],
    );
    let mut push = |measure: &str, av: Option<f64>, bv: Option<f64>| {
        t.push_row(vec![measure.to_string(), pct(av), pct(bv), delta(av, bv)])
            .map_err(|e| vec![e.to_string()])
    };
    push("overall", a.all.overall.accuracy(), b.all.overall.accuracy())?;
    push("non-explicit", a.all.non_explicit.accuracy(), b.all.non_explicit.accuracy())?;
    for quote_type in QuoteType::ALL {
        let acc = |m: &AttributionMetrics| m.per_type.get(&quote_type).and_then(|x| x.accuracy());
        push(quote_type.label(), acc(&a.all), acc(&b.all))?;
    }
    push(
        "unanswerable %",
        Some(a.all.unanswerable_fraction()),
        Some(b.all.unanswerable_fraction()),
    )?;
    Ok(t)
}

pub fn run(args: &Args) -> CmdResult {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    ensure_out_dir(&args.out)?;
    let mut sections = Vec::new();

    if let Some(stats_path) = &args.stats {
        let stats: CorpusStats = read_json(stats_path)?;
        write_table(&args.out, "stats", &stats_table(&stats))?;
        sections.push("stats");
    }

    if !args.auc.is_empty() {
        let reports: Vec<AucReport> =
            args.auc.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
        let refs: Vec<&AucReport> = reports.iter().collect();
        write_table(&args.out, "auc_summary", &auc_summary_table(&refs))?;
        for (i, report) in reports.iter().enumerate() {
            write_table(&args.out, &format!("per_play_{i}"), &per_play_table(report))?;
        }
        sections.push("auc");
    }

    if let Some(pair) = &args.compare_auc {
        let a: AucReport = read_json(&pair[0])?;
        let b: AucReport = read_json(&pair[1])?;
        let by_id: BTreeMap<&str, f64> =
            b.per_play.iter().map(|p| (p.play_id.as_str(), p.auc)).collect();
        let pairs: Vec<(f64, f64)> = a
            .per_play
            .iter()
            .filter_map(|p| by_id.get(p.play_id.as_str()).map(|&bv| (p.auc, bv)))
            .collect();
        if pairs.len() < 2 {
            return fail("--compare-auc needs at least two plays shared by both reports".into());
        }
        let result = paired_ttest(&pairs).map_err(|e| vec![e.to_string()])?;
        let label = format!("{} vs {}", file_label(&pair[0]), file_label(&pair[1]));
        write_table(&args.out, "significance", &significance_table(&[(label, result)]))?;
        write_json(&args.out.join("ttest.json"), &result)?;
        sections.push("compare-auc");
    }

    if !args.metrics.is_empty() {
        let files: Vec<MetricsFile> =
            args.metrics.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
        let rows: Vec<(&str, &AttributionMetrics)> =
            files.iter().map(|f| (f.label.as_str(), &f.all)).collect();
        write_table(&args.out, "metrics", &metrics_table(&rows))?;
        sections.push("metrics");
    }

    if let Some(pair) = &args.compare_metrics {
        let a: MetricsFile = read_json(&pair[0])?;
        let b: MetricsFile = read_json(&pair[1])?;
        write_table(&args.out, "metrics_delta", &delta_table(&a, &b)?)?;
        sections.push("compare-metrics");
    }

    if sections.is_empty() {
        return fail("nothing to report: pass --stats, --auc, --metrics, or a comparison".into());
    }

    let mut inputs = BTreeMap::new();
    if let Some(p) = &args.stats {
        inputs.insert("stats", p.display().to_string());
    }
    if !args.auc.is_empty() {
        inputs.insert(
            "auc",
            args.auc.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","),
        );
    }
    if !args.metrics.is_empty() {
        inputs.insert(
            "metrics",
            args.metrics.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","),
        );
    }
    Manifest { command: "report", seed, threads: thread_cap(), inputs, effective: Effective { sections } }
        .write(&args.out)
}
