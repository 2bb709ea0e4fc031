//! Metric reports as JSON or single-row CSV.
//!
//! Both formats use the keys `pred_total, pred_valid_tp, missing_fn,
//! expansion, map, kl` in that order. Unset fields are `null` in JSON and
//! empty in CSV.

use std::path::Path;

use crate::evaluation::MetricsReport;

use super::IoError;

pub const CSV_COLUMNS: [&str; 6] = [
    "pred_total",
    "pred_valid_tp",
    "missing_fn",
    "expansion",
    "map",
    "kl",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsFormat {
    Json,
    Csv,
}

fn fields(report: &MetricsReport) -> [Option<f64>; 6] {
    [
        report.pred_total,
        report.pred_valid_tp,
        report.missing_fn,
        report.expansion,
        report.map,
        report.kl,
    ]
}

fn check_finite(report: &MetricsReport) -> Result<(), IoError> {
    for (name, v) in CSV_COLUMNS.iter().zip(fields(report)) {
        if let Some(v) = v {
            if !v.is_finite() {
                return Err(IoError::Format(format!("{name} is not finite ({v})")));
            }
        }
    }
    Ok(())
}

pub fn metrics_to_json(report: &MetricsReport) -> Result<String, IoError> {
    check_finite(report)?;
    let mut s = serde_json::to_string_pretty(report).map_err(|e| IoError::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn metrics_to_csv(report: &MetricsReport) -> Result<String, IoError> {
    check_finite(report)?;
    let row: Vec<String> = fields(report)
        .iter()
        .map(|v| v.map(|v| format!("{v}")).unwrap_or_default())
        .collect();
    Ok(format!("{}\n{}\n", CSV_COLUMNS.join(","), row.join(",")))
}

pub fn metrics_from_json(text: &str) -> Result<MetricsReport, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Format(e.to_string()))
}

pub fn metrics_from_csv(text: &str) -> Result<MetricsReport, IoError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != CSV_COLUMNS.join(",") {
        return Err(IoError::Format(format!("unexpected CSV header {header:?}")));
    }
    let row = lines
        .next()
        .ok_or_else(|| IoError::Format("missing CSV data row".into()))?;
    let cells: Vec<&str> = row.split(',').collect();
    if cells.len() != CSV_COLUMNS.len() {
        return Err(IoError::Format(format!(
            "expected {} CSV columns, found {}",
            CSV_COLUMNS.len(),
            cells.len()
        )));
    }
    let mut vals = [None; 6];
    for (slot, cell) in vals.iter_mut().zip(cells) {
        if !cell.is_empty() {
            *slot = Some(
                cell.parse::<f64>()
                    .map_err(|_| IoError::Format(format!("bad CSV number {cell:?}")))?,
            );
        }
    }
    let [pred_total, pred_valid_tp, missing_fn, expansion, map, kl] = vals;
    Ok(MetricsReport {
        pred_total,
        pred_valid_tp,
        missing_fn,
        expansion,
        map,
        kl,
    })
}

pub fn write_metrics(report: &MetricsReport, path: &Path, format: MetricsFormat) -> Result<(), IoError> {
    let text = match format {
        MetricsFormat::Json => metrics_to_json(report)?,
        MetricsFormat::Csv => metrics_to_csv(report)?,
    };
    std::fs::write(path, text).map_err(|e| IoError::io(path, e))
}
