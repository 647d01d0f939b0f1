use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::campaign::{CampaignResult, SummaryRow};
use crate::error::{Error, Result};
use crate::metrics::SummaryStats;
use crate::optim::Algorithm;

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `iteration,repeat_0,..` CSV of every repeat's learning curve on one
/// plant. A failed repeat leaves its column empty.
pub fn learning_curve_csv(result: &CampaignResult, algorithm: Algorithm, variant: usize) -> String {
    let curves: Vec<Option<&[f64]>> = (0..result.n_repeats)
        .map(|r| result.cell(algorithm, variant, r).and_then(|c| c.record()).map(|rec| rec.learning_curve.as_slice()))
        .collect();
    let rows = curves.iter().flatten().map(|c| c.len()).max().unwrap_or(0);
    let mut out = String::from("iteration");
    for r in 0..result.n_repeats {
        let _ = write!(out, ",repeat_{r}");
    }
    out.push('\n');
    for i in 0..rows {
        let _ = write!(out, "{i}");
        for c in &curves {
            out.push(',');
            if let Some(v) = c.and_then(|c| c.get(i)) {
                let _ = write!(out, "{v}");
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `curves/<algorithm>_variant<v>.csv` for every configuration.
pub fn emit_learning_curves(result: &CampaignResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if result.cells.is_empty() {
        return Err(Error::invalid("campaign has no cells"));
    }
    let dir = dir.as_ref().join("curves");
    let mut written = Vec::new();
    for &algorithm in &result.algorithms {
        for &variant in &result.variants {
            let path = dir.join(format!("{algorithm}_variant{variant}.csv"));
            write_text(&path, &learning_curve_csv(result, algorithm, variant))?;
            written.push(path);
        }
    }
    Ok(written)
}

pub const SUMMARY_CSV_HEADER: &str = "technique,runs,not_settled,\
rise_min_ps,rise_max_ps,rise_mean_ps,rise_std_ps,\
settle_min_ps,settle_max_ps,settle_mean_ps,settle_std_ps,\
overshoot_min_pct,overshoot_max_pct,overshoot_mean_pct,overshoot_std_pct";

/// `min, max, mean, std` fields in display units. The maximum becomes
/// NOT_SETTLED when `not_settled` runs were excluded.
fn stat_fields(s: Option<&SummaryStats>, scale: f64, not_settled: usize) -> [Option<f64>; 4] {
    match s {
        None => [None; 4],
        Some(s) => {
            let max = if not_settled > 0 { None } else { Some(s.max * scale) };
            [Some(s.min * scale), max, Some(s.mean * scale), Some(s.std * scale)]
        }
    }
}

fn row_fields(row: &SummaryRow) -> Vec<Option<f64>> {
    let mut fields = Vec::with_capacity(12);
    fields.extend(stat_fields(row.rise.as_ref(), 1e12, 0));
    fields.extend(stat_fields(row.settle.as_ref(), 1e12, row.not_settled));
    fields.extend(stat_fields(row.overshoot.as_ref(), 1.0, 0));
    fields
}

/// CSV summary, one row per technique; NOT_SETTLED is an empty field.
pub fn summary_csv(result: &CampaignResult) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for row in &result.summaries {
        let _ = write!(out, "{},{},{}", row.technique, row.runs, row.not_settled);
        for f in row_fields(row) {
            out.push(',');
            if let Some(v) = f {
                let _ = write!(out, "{v}");
            }
        }
        out.push('\n');
    }
    out
}

/// The summary as an aligned table; NOT_SETTLED renders as `-`.
pub fn summary_text(result: &CampaignResult) -> String {
    let mut table: Vec<Vec<String>> = vec![vec![
        "technique".into(),
        "rise ps (min|max|mean|std)".into(),
        "settle ps (min|max|mean|std)".into(),
        "overshoot % (min|max|mean|std)".into(),
        "not settled".into(),
    ]];
    for row in &result.summaries {
        let fields = row_fields(row);
        let group = |chunk: &[Option<f64>], prec: usize| {
            chunk
                .iter()
                .map(|f| f.map(|v| format!("{v:.prec$}")).unwrap_or_else(|| "-".into()))
                .collect::<Vec<_>>()
                .join(" | ")
        };
        table.push(vec![
            row.technique.clone(),
            group(&fields[0..4], 0),
            group(&fields[4..8], 0),
            group(&fields[8..12], 2),
            format!("{}/{}", row.not_settled, row.runs),
        ]);
    }
    let widths: Vec<usize> =
        (0..table[0].len()).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Writes `summary.csv` and `summary.txt`.
pub fn emit_summary_table(result: &CampaignResult, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    let csv = dir.join("summary.csv");
    let txt = dir.join("summary.txt");
    write_text(&csv, &summary_csv(result))?;
    write_text(&txt, &summary_text(result))?;
    Ok((csv, txt))
}

/// Persists everything a campaign produced: per-cell records, the error
/// list, learning curves, cost spreads, step references and the summary.
pub fn write_campaign(result: &CampaignResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    let mut errors = String::from("algorithm,variant,repeat,seed,error\n");
    for cell in &result.cells {
        match &cell.outcome {
            Ok(record) => {
                let path = dir.join("records").join(format!("{}_variant{}_repeat{}.json", cell.algorithm, cell.variant, cell.repeat));
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                record.write_json(&path)?;
                written.push(path);
            }
            Err(e) => {
                let _ = writeln!(errors, "{},{},{},{},\"{}\"", cell.algorithm, cell.variant, cell.repeat, cell.seed, e.replace('"', "'"));
            }
        }
    }
    let path = dir.join("errors.csv");
    write_text(&path, &errors)?;
    written.push(path);

    let mut spreads = String::from("algorithm,variant,spread_pct\n");
    for s in &result.spreads {
        let _ = writeln!(spreads, "{},{},{}", s.algorithm, s.variant, s.spread_pct.map(|v| v.to_string()).unwrap_or_default());
    }
    let path = dir.join("spreads.csv");
    write_text(&path, &spreads)?;
    written.push(path);

    let mut steps = format!("variant,{}\n", crate::metrics::MetricsReport::CSV_HEADER);
    for (variant, report) in &result.step_reports {
        let _ = writeln!(steps, "{variant},{}", report.csv_row());
    }
    let path = dir.join("step_reference.csv");
    write_text(&path, &steps)?;
    written.push(path);

    written.extend(emit_learning_curves(result, dir)?);
    let (csv, txt) = emit_summary_table(result, dir)?;
    written.push(csv);
    written.push(txt);
    Ok(written)
}
