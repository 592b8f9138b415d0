//! Report serialization: the per-sampler CSV and a human-readable summary.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::harness::experiment::EvaluationReport;
use crate::harness::rank::markdown_table;

pub const REPORT_HEADER: [&str; 9] = [
    "dataset", "sampler", "n_pairs", "mean_sdl", "mean_ras", "mae_hours", "order", "alpha", "seed",
];

/// One row per (dataset, sampler). Contains no timing data, so equal inputs
/// give byte-identical files.
pub fn write_report_csv<W: Write>(reports: &[EvaluationReport], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(REPORT_HEADER)?;
    for report in reports {
        for p in &report.policies {
            out.write_record([
                report.dataset.name.clone(),
                p.policy.to_string(),
                p.summary.n_pairs.to_string(),
                format!("{:.6}", p.summary.mean_sdl),
                format!("{:.6}", p.summary.mean_ras),
                format!("{:.6}", p.summary.mae_hours),
                report.order.to_string(),
                report.alpha.to_string(),
                report.seed.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Markdown summary: dataset facts, chosen hyperparameters, and the metric table.
pub fn summary_markdown(report: &EvaluationReport) -> String {
    let d = &report.dataset;
    let mut out = String::new();
    let _ = writeln!(out, "## {}\n", d.name);
    let tuning = match &report.search {
        Some(s) => format!(" (validation MAE {:.3} h over {} trials)", s.validation_mae_hours, s.trials.len()),
        None => " (pre-trained)".to_string(),
    };
    let _ = writeln!(
        out,
        "{} traces ({} train / {} test), {} activities; n-gram order {}, alpha {}{}; \
         seed {}; generation cap {} steps.\n",
        d.n_traces,
        d.n_train,
        d.n_test,
        d.n_activities,
        report.order,
        report.alpha,
        tuning,
        report.seed,
        report.max_steps,
    );
    let header: Vec<String> = ["Sampler", "Pairs", "Mean SDL", "Mean RAS", "MAE (h)", "Run-length L1", "Capped"]
        .map(String::from)
        .to_vec();
    let body: Vec<Vec<String>> = report
        .policies
        .iter()
        .map(|p| {
            let capped = p.outcomes.iter().filter(|o| !o.terminated_by_eoc).count();
            vec![
                p.policy.to_string(),
                p.summary.n_pairs.to_string(),
                format!("{:.4}", p.summary.mean_sdl),
                format!("{:.4}", p.summary.mean_ras),
                format!("{:.3}", p.summary.mae_hours),
                format!("{:.4}", report.profile_distance(p)),
                capped.to_string(),
            ]
        })
        .collect();
    out.push_str(&markdown_table(&header, &body));
    out
}
