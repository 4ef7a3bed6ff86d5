//! Tabular report rendering: the same table emitted as CSV or as an
//! aligned plain-text block.

use crate::corpus::CorpusStats;
use crate::dataset::Split;
use crate::error::{Error, Result};
use crate::eval::ttest::TTestResult;
use crate::eval::AucReport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Table {
            title: title.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "table \"{}\" expects {} columns, row has {}",
                self.title,
                self.columns.len(),
                row.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Header plus rows; the title is not part of the CSV body.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(|e| Error::Format(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| Error::Format(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    /// Title, header, rule, and space-aligned rows. Columns whose body
    /// cells all parse as numbers are right-aligned.
    pub fn to_text(&self) -> String {
        let ncols = self.columns.len();
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
        let numeric: Vec<bool> = (0..ncols)
            .map(|i| !self.rows.is_empty() && self.rows.iter().all(|r| r[i].parse::<f64>().is_ok()))
            .collect();

        let render = |cells: &[String], out: &mut String| {
            for (i, cell) in cells.iter().enumerate() {
                if i > 0 {
                    out.push_str("  ");
                }
                let pad = widths[i] - cell.chars().count();
                if numeric[i] {
                    out.extend(std::iter::repeat_n(' ', pad));
                    out.push_str(cell);
                } else if i + 1 == ncols {
                    out.push_str(cell);
                } else {
                    out.push_str(cell);
                    out.extend(std::iter::repeat_n(' ', pad));
                }
            }
            out.push('\n');
        };

        let mut out = String::new();
        out.push_str(&self.title);
        out.push('\n');
        render(&self.columns, &mut out);
        let rule_len = widths.iter().sum::<usize>() + 2 * ncols.saturating_sub(1);
        out.extend(std::iter::repeat_n('-', rule_len));
        out.push('\n');
        for row in &self.rows {
            render(row, &mut out);
        }
        out
    }
}

fn fmt(x: f64, places: usize) -> String {
    format!("{x:.places$}")
}

/// Per-split corpus statistics.
pub fn stats_table(stats: &CorpusStats) -> Table {
    let mut t = Table::new(
        &format!("Corpus statistics ({} segments)", stats.unit.name()),
        &["split", "segments", "utterances", "queries", "targets/query"],
    );
    for split in Split::ALL {
        if let Some(s) = stats.per_split.get(&split) {
            t.push_row(vec![
                split.name().to_string(),
                s.segments.to_string(),
                s.utterances.to_string(),
                s.queries.to_string(),
                fmt(s.mean_targets_per_query, 2),
            ])
            .expect("fixed arity");
        }
    }
    t
}

/// One summary row per protocol report: mean AUC (%) with std.
pub fn auc_summary_table(reports: &[&AucReport]) -> Table {
    let mut t = Table::new("Verification AUC", &["protocol", "plays", "mean AUC (%)", "std"]);
    for r in reports {
        t.push_row(vec![
            r.protocol.name().to_string(),
            r.per_play.len().to_string(),
            fmt(100.0 * r.mean, 1),
            fmt(100.0 * r.std, 1),
        ])
        .expect("fixed arity");
    }
    t
}

/// Per-play breakdown of one report: play, author, AUC (%).
pub fn per_play_table(report: &AucReport) -> Table {
    let mut t = Table::new(
        &format!("Per-play AUC ({} protocol)", report.protocol.name()),
        &["play", "author", "segments", "AUC (%)"],
    );
    for p in &report.per_play {
        t.push_row(vec![
            p.title.clone(),
            p.author.clone(),
            p.segments_scored.to_string(),
            fmt(100.0 * p.auc, 1),
        ])
        .expect("fixed arity");
    }
    t
}

/// Paired-comparison significance rows.
pub fn significance_table(comparisons: &[(String, TTestResult)]) -> Table {
    let mut t = Table::new("Paired t-tests", &["comparison", "t", "p", "df", "degenerate"]);
    for (label, r) in comparisons {
        t.push_row(vec![
            label.clone(),
            fmt(r.t, 4),
            fmt(r.p, 4),
            r.df.to_string(),
            r.degenerate.to_string(),
        ])
        .expect("fixed arity");
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{PlayAuc, Protocol};

    fn sample_report() -> AucReport {
        AucReport {
            protocol: Protocol::Scene,
            per_segment: vec![("p1:0".into(), 0.6), ("p2:0".into(), 0.8)],
            per_play: vec![
                PlayAuc {
                    play_id: "p1".into(),
                    title: "The First".into(),
                    author: "Ames".into(),
                    segments_scored: 1,
                    auc: 0.6,
                },
                PlayAuc {
                    play_id: "p2".into(),
                    title: "A Second Play".into(),
                    author: "Brook".into(),
                    segments_scored: 1,
                    auc: 0.8,
                },
            ],
            mean: 0.7,
            std: 0.1,
        }
    }

    #[test]
    fn text_layout_is_stable() {
        let report = sample_report();
        let got = per_play_table(&report).to_text();
        let want = "\
Per-play AUC (scene protocol)
play           author  segments  AUC (%)
----------------------------------------
The First      Ames           1     60.0
A Second Play  Brook          1     80.0
";
        assert_eq!(got, want);
    }

    #[test]
    fn csv_round_trips_awkward_cells() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push_row(vec!["has, comma".into(), "has \"quote\"".into()]).unwrap();
        t.push_row(vec!["plain".into(), "line\nbreak".into()]).unwrap();
        let csv_text = t.to_csv().unwrap();
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows[0].get(0), Some("has, comma"));
        assert_eq!(rows[0].get(1), Some("has \"quote\""));
        assert_eq!(rows[1].get(1), Some("line\nbreak"));
    }

    #[test]
    fn summary_row_scales_to_percent() {
        let report = sample_report();
        let t = auc_summary_table(&[&report]);
        assert_eq!(t.rows[0], vec!["scene", "2", "70.0", "10.0"]);
    }

    #[test]
    fn arity_mismatch_rejected() {
        let mut t = Table::new("x", &["a", "b"]);
        assert!(t.push_row(vec!["only one".into()]).is_err());
    }

    #[test]
    fn significance_rows_render() {
        let t = significance_table(&[(
            "with vs without".to_string(),
            TTestResult { t: 4.9135, p: 0.0390, df: 2, degenerate: false },
        )]);
        assert_eq!(t.rows[0], vec!["with vs without", "4.9135", "0.0390", "2", "false"]);
    }
}
