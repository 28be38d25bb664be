//! Rendering sweep results as CSV tables and a machine-readable audit trail.
//!
//! The CSV layout mirrors the published result grids: one row per step size,
//! one column per shift range, error rates as full-precision floats so a
//! rendered table can be diffed bit-for-bit across reruns.

use crate::harness::{SweepCell, SweepReport};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("audit file {path}: {message}")]
    Audit { path: PathBuf, message: String },
    #[error("report has no cells")]
    Empty,
}

/// Format a step size the way the result tables label their rows: exact
/// dyadic fractions as `1/32` … `1/2`, everything else as a plain float.
pub fn step_label(step: f64) -> String {
    if step > 0.0 && step < 1.0 {
        let denom = 1.0 / step;
        if denom.fract() == 0.0 && denom <= 4096.0 {
            return format!("1/{}", denom as u64);
        }
    }
    format!("{step}")
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = values.collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| a.to_bits() == b.to_bits());
    out
}

fn cell_at(report: &SweepReport, step: f64, range: f64) -> Option<&SweepCell> {
    report
        .cells
        .iter()
        .find(|c| c.step.to_bits() == step.to_bits() && c.range.to_bits() == range.to_bits())
}

fn grid_csv(
    report: &SweepReport,
    value: impl Fn(&SweepCell) -> String,
) -> Result<String, ReportError> {
    if report.cells.is_empty() {
        return Err(ReportError::Empty);
    }
    let steps = sorted_unique(report.cells.iter().map(|c| c.step));
    let ranges = sorted_unique(report.cells.iter().map(|c| c.range));
    let mut out = String::from("step_vs_range");
    for r in &ranges {
        write!(out, ",{r}").unwrap();
    }
    out.push('\n');
    for s in &steps {
        out.push_str(&step_label(*s));
        for r in &ranges {
            out.push(',');
            if let Some(cell) = cell_at(report, *s, *r) {
                out.push_str(&value(cell));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Test-set error rates (pooled over folds) as a step × range grid.
pub fn error_csv(report: &SweepReport) -> Result<String, ReportError> {
    grid_csv(report, |c| format!("{}", c.test_error))
}

/// Training-set (augmented) error rates as a step × range grid.
pub fn train_error_csv(report: &SweepReport) -> Result<String, ReportError> {
    grid_csv(report, |c| format!("{}", c.train_error_augmented))
}

/// Enlargement factors as a step × range grid of integers.
pub fn enlargement_csv(report: &SweepReport) -> Result<String, ReportError> {
    grid_csv(report, |c| format!("{}", c.enlargement_factor))
}

/// Cells where the closed-form ceiling estimate disagrees with the actual
/// grid cardinality. An empty body (header only) means full agreement.
pub fn enlargement_discrepancy_csv(report: &SweepReport) -> Result<String, ReportError> {
    if report.cells.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut out = String::from("step,range,grid_count,ceiling_estimate\n");
    for cell in &report.cells {
        if cell.enlargement_factor != cell.enlargement_factor_ceiling {
            writeln!(
                out,
                "{},{},{},{}",
                step_label(cell.step),
                cell.range,
                cell.enlargement_factor,
                cell.enlargement_factor_ceiling
            )
            .unwrap();
        }
    }
    Ok(out)
}

/// One audit line: the full sweep report plus identifying metadata, written
/// as JSONL so later tooling can re-render tables without recomputing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub label: String,
    pub report: SweepReport,
}

/// Append reports to `audit.jsonl` in `dir`, one record per line.
pub fn write_audit(dir: &Path, records: &[AuditRecord]) -> Result<PathBuf, ReportError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("audit.jsonl");
    let mut text = String::new();
    for record in records {
        text.push_str(&serde_json::to_string(record).map_err(|e| ReportError::Audit {
            path: path.clone(),
            message: e.to_string(),
        })?);
        text.push('\n');
    }
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Read every record from an audit file.
pub fn read_audit(path: &Path) -> Result<Vec<AuditRecord>, ReportError> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(line).map_err(|e| ReportError::Audit {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })?,
        );
    }
    Ok(records)
}

/// File stem for a report's rendered tables: `<kind>-<mode>-k<symmetry>`.
pub fn table_stem(report: &SweepReport, kind: &str) -> String {
    format!("{kind}-{}-k{}", report.mode.name(), report.symmetry)
}

/// Render every table for every report into `dir` and return the paths.
pub fn render_tables(dir: &Path, reports: &[SweepReport]) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for report in reports {
        for (kind, body) in [
            ("test-error", error_csv(report)?),
            ("train-error", train_error_csv(report)?),
            ("enlargement", enlargement_csv(report)?),
            ("enlargement-discrepancy", enlargement_discrepancy_csv(report)?),
        ] {
            let path = dir.join(format!("{}.csv", table_stem(report, kind)));
            std::fs::write(&path, body)?;
            written.push(path);
        }
    }
    Ok(written)
}
