//! Evaluation report: per-model metric summaries plus run metadata, written
//! as JSON or as an aligned plain-text table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sem: Option<f64>,
    pub n: usize,
}

impl From<Stats> for MetricSummary {
    fn from(s: Stats) -> Self {
        Self {
            mean: s.mean,
            sem: s.sem,
            n: s.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub tool_version: String,
    pub schema_version: u32,
    pub phenomenon: String,
    /// `local`, `aggregate` or `both`.
    pub mode: String,
    /// SHA-256 over the canonical JSONL of samples then predictions.
    pub corpus_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub samples: usize,
    pub predictions: usize,
    /// Token F1 counts repeated tokens (multiset overlap).
    pub f1_variant: String,
    /// Standard errors: over samples for local metrics, over forecasts for
    /// aggregate ones.
    pub sem_basis: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: ReportMetadata,
    /// model -> metric -> summary
    pub rows: BTreeMap<String, BTreeMap<String, MetricSummary>>,
    /// model -> mode -> scored units whose SPACE score is undefined
    pub undefined: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Column order for the text table; other metrics follow alphabetically.
const METRIC_ORDER: &[&str] = &[
    "space_local.s",
    "space_local.s_m",
    "space_local.r_c",
    "space_aggregate.s",
    "space_aggregate.s_m",
    "space_aggregate.r_c",
    "rouge_l",
    "token_f1",
];

impl Report {
    pub fn to_json(&self, pretty: bool) -> String {
        let mut s = if pretty {
            serde_json::to_string_pretty(self)
        } else {
            serde_json::to_string(self)
        }
        .expect("report serializes");
        s.push('\n');
        s
    }

    fn metric_columns(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for metrics in self.rows.values() {
            for m in metrics.keys() {
                if !seen.contains(m) {
                    seen.push(m.clone());
                }
            }
        }
        let rank = |m: &str| METRIC_ORDER.iter().position(|x| *x == m).unwrap_or(usize::MAX);
        seen.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
        seen
    }

    /// Models as rows, metrics as `mean ± sem` columns.
    pub fn to_table(&self) -> String {
        let columns = self.metric_columns();
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["model".to_string()];
        header.extend(columns.iter().cloned());
        header.push("undefined".into());
        grid.push(header);
        for (model, metrics) in &self.rows {
            let mut row = vec![model.clone()];
            for c in &columns {
                row.push(match metrics.get(c) {
                    Some(m) => match m.sem {
                        Some(sem) => format!("{:.4} ± {:.4}", m.mean, sem),
                        None => format!("{:.4}", m.mean),
                    },
                    None => "-".into(),
                });
            }
            let undefined = self
                .undefined
                .get(model)
                .map(|u| {
                    u.iter()
                        .map(|(mode, n)| format!("{mode}={n}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .unwrap_or_default();
            row.push(undefined);
            grid.push(row);
        }

        let widths: Vec<usize> = (0..grid[0].len())
            .map(|i| grid.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} | mode {} | corpus {} | n={}",
            self.metadata.phenomenon,
            self.metadata.tool_version,
            self.metadata.mode,
            &self.metadata.corpus_sha256[..12.min(self.metadata.corpus_sha256.len())],
            self.metadata.samples
        );
        for (r, row) in grid.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| {
                    let pad = w - cell.chars().count();
                    if i == 0 || i == row.len() - 1 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if r == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
        }
        out
    }
}
