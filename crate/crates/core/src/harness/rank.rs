//! Competition ranking of samplers per dataset and metric.
//!
//! Values are rounded to two decimals first; equal rounded values share the
//! best rank of their block and the next distinct value is ranked one past the
//! number of strictly better entries (1, 1, 3, ...).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::experiment::EvaluationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Sdl,
    Ras,
    Mae,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Sdl, Metric::Ras, Metric::Mae];

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Mae)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sdl => "mean_sdl",
            Metric::Ras => "mean_ras",
            Metric::Mae => "mae_hours",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Sdl => "Mean SDL",
            Metric::Ras => "Mean RAS",
            Metric::Mae => "Remaining time MAE (h)",
        }
    }
}

/// Hundredths, so ties are decided on integers.
fn hundredths(v: f64) -> i64 {
    (v * 100.0).round() as i64
}

/// Competition ranks (1-based) of `values` after rounding to two decimals.
pub fn competition_ranks(values: &[f64], higher_is_better: bool) -> Vec<usize> {
    let keys: Vec<i64> = values
        .iter()
        .map(|&v| if higher_is_better { -hundredths(v) } else { hundredths(v) })
        .collect();
    keys.iter()
        .map(|k| 1 + keys.iter().filter(|other| *other < k).count())
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankRow {
    pub dataset: String,
    pub metric: Metric,
    /// Unrounded metric values, one per policy.
    pub values: Vec<f64>,
    pub ranks: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankTable {
    pub policies: Vec<String>,
    pub rows: Vec<RankRow>,
}

/// Ranks every report's policies per metric. All reports must cover the same policy set.
pub fn rank_table(reports: &[(&str, &EvaluationReport)]) -> Result<RankTable> {
    let Some((_, first)) = reports.first() else {
        return Err(Error::InvalidParameter("rank table needs at least one report".into()));
    };
    let policies: Vec<String> = first.policies.iter().map(|p| p.policy.to_string()).collect();
    let mut sorted_reference = policies.clone();
    sorted_reference.sort();

    let mut rows = Vec::new();
    for (dataset, report) in reports {
        let mut names: Vec<String> = report.policies.iter().map(|p| p.policy.to_string()).collect();
        names.sort();
        if names != sorted_reference {
            return Err(Error::MismatchedPolicies(format!(
                "`{dataset}` has [{}], expected [{}]",
                names.join(", "),
                sorted_reference.join(", ")
            )));
        }
        for metric in Metric::ALL {
            let values: Vec<f64> = policies
                .iter()
                .map(|name| {
                    let p = report
                        .policies
                        .iter()
                        .find(|p| p.policy.to_string() == *name)
                        .expect("policy sets checked above");
                    match metric {
                        Metric::Sdl => p.summary.mean_sdl,
                        Metric::Ras => p.summary.mean_ras,
                        Metric::Mae => p.summary.mae_hours,
                    }
                })
                .collect();
            rows.push(RankRow {
                dataset: dataset.to_string(),
                metric,
                ranks: competition_ranks(&values, metric.higher_is_better()),
                values,
            });
        }
    }
    Ok(RankTable { policies, rows })
}

impl RankTable {
    pub fn row(&self, dataset: &str, metric: Metric) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.metric == metric)
    }

    /// Policies ranked first for `metric` on `dataset`.
    pub fn winners(&self, dataset: &str, metric: Metric) -> Vec<&str> {
        self.row(dataset, metric)
            .map(|row| {
                row.ranks
                    .iter()
                    .zip(&self.policies)
                    .filter(|(r, _)| **r == 1)
                    .map(|(_, p)| p.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// `dataset,metric,<policy>...` with ranks as cells.
    pub fn to_csv(&self) -> String {
        let mut out = format!("dataset,metric,{}\n", self.policies.join(","));
        for row in &self.rows {
            let ranks: Vec<String> = row.ranks.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{},{},{}", row.dataset, row.metric.name(), ranks.join(","));
        }
        out
    }

    /// One aligned table per metric, datasets as rows.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for metric in Metric::ALL {
            let rows: Vec<&RankRow> = self.rows.iter().filter(|r| r.metric == metric).collect();
            if rows.is_empty() {
                continue;
            }
            let mut header = vec!["Dataset".to_string()];
            header.extend(self.policies.iter().cloned());
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut cells = vec![r.dataset.clone()];
                    cells.extend(r.ranks.iter().map(usize::to_string));
                    cells
                })
                .collect();
            let _ = writeln!(out, "{}\n", metric.title());
            out.push_str(&markdown_table(&header, &body));
            out.push('\n');
        }
        out
    }
}

/// Pipe table with every column padded to its widest cell.
pub fn markdown_table(header: &[String], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len().max(3)).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for row in body {
        out.push_str(&line(row));
    }
    out
}
