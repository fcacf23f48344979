//! CSV ingestion, saved-fit serialization, and table rendering for the CLI.

use crate::changepoint::{ChangePointError, SegmentMethod};
use crate::model::{ChangePointFit, Dataset, ModelError, SegmentFit};
use crate::simulation::MetricsReport;
use crate::solver::SolverError;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("row {row}, column {col}: {reason}")]
    Parse { row: usize, col: String, reason: String },
    #[error("{0}")]
    EmptyFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("cannot read CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Search(#[from] ChangePointError),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    /// Exit-code taxonomy: 1 parse/input, 2 infeasible search, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Search(ChangePointError::Solver(SolverError::Model(_))) => 1,
            CliError::Search(ChangePointError::Solver(_)) => 3,
            CliError::Search(_) => 2,
            CliError::Invalid(_) => 3,
        }
    }
}

/// Reads a header-row CSV with one `y` column; every other column is a
/// numeric covariate, in header order.
pub fn ingest_csv(path: &Path) -> Result<Dataset, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IoError::EmptyFile(format!("cannot read header of {}: {e}", path.display())))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| IoError::EmptyFile("no column named 'y' in header".into()))?;
    let p = headers.len() - 1;
    if p == 0 {
        return Err(IoError::EmptyFile(
            "no covariate columns (need y plus at least one)".into(),
        ));
    }
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (ri, record) in reader.records().enumerate() {
        let row = ri + 2; // 1-based, after the header line
        let record = record.map_err(|e| IoError::Parse {
            row,
            col: "-".into(),
            reason: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(IoError::Parse {
                row,
                col: "-".into(),
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (ci, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| IoError::Parse {
                row,
                col: headers[ci].clone(),
                reason: if field.is_empty() {
                    "missing value".into()
                } else {
                    format!("not a number: {field:?}")
                },
            })?;
            if !value.is_finite() {
                return Err(IoError::Parse {
                    row,
                    col: headers[ci].clone(),
                    reason: format!("non-finite value {value}"),
                });
            }
            if ci == y_col {
                y.push(value);
            } else {
                x.push(value);
            }
        }
    }
    if y.is_empty() {
        return Err(IoError::EmptyFile(format!(
            "{} has a header but no data rows",
            path.display()
        )));
    }
    Ok(Dataset::new(y, x, p)?)
}

/// Lossless machine format for a fitted model; embeds the dataset so the
/// fit can be re-certified without external inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedFit {
    pub format_version: u32,
    pub method: SegmentMethod,
    pub k: usize,
    pub min_segment: usize,
    pub breaks: Vec<usize>,
    pub total_objective: f64,
    pub segments: Vec<SegmentFit>,
    pub data: Dataset,
}

pub const SAVED_FIT_VERSION: u32 = 1;

impl SavedFit {
    pub fn new(
        method: &SegmentMethod,
        min_segment: usize,
        fit: &ChangePointFit,
        data: &Dataset,
    ) -> Self {
        Self {
            format_version: SAVED_FIT_VERSION,
            method: method.clone(),
            k: fit.segmentation.breaks.len(),
            min_segment,
            breaks: fit.segmentation.breaks.clone(),
            total_objective: fit.total_objective,
            segments: fit.segment_fits.clone(),
            data: data.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self, IoError> {
        Ok(serde_json::from_reader(r)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
    Json,
}

fn fmt_cell(v: f64) -> String {
    format!("{v:.6}")
}

/// Renders a fit as one row per segment: range, objective, KKT residual,
/// then the coefficient columns.
pub fn render_fit(
    method: &SegmentMethod,
    min_segment: usize,
    fit: &ChangePointFit,
    data: &Dataset,
    format: OutputFormat,
) -> Result<String, IoError> {
    let p = data.p();
    match format {
        OutputFormat::Json => SavedFit::new(method, min_segment, fit, data).to_json(),
        OutputFormat::Csv | OutputFormat::Markdown => {
            let mut header = vec![
                "segment".to_string(),
                "start".to_string(),
                "end".to_string(),
                "objective".to_string(),
                "kkt_residual".to_string(),
                "active".to_string(),
            ];
            header.extend((0..p).map(|j| format!("coef_{}", j + 1)));
            let rows: Vec<Vec<String>> = fit
                .segment_fits
                .iter()
                .enumerate()
                .map(|(r, f)| {
                    let mut row = vec![
                        (r + 1).to_string(),
                        f.range.0.to_string(),
                        f.range.1.to_string(),
                        fmt_cell(f.objective),
                        format!("{:.3e}", f.kkt_residual),
                        f.active_set
                            .iter()
                            .map(|j| (j + 1).to_string())
                            .collect::<Vec<_>>()
                            .join(" "),
                    ];
                    row.extend(f.coefficients.iter().map(|&c| fmt_cell(c)));
                    row
                })
                .collect();
            Ok(render_table(&header, &rows, format))
        }
    }
}

/// Study-table layout (metrics as rows, methods as columns) plus the
/// per-segment estimation-error block.
pub fn render_metrics(report: &MetricsReport, format: OutputFormat) -> Result<String, IoError> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(report)?),
        OutputFormat::Csv | OutputFormat::Markdown => {
            let mut header = vec!["metric".to_string()];
            header.extend(report.methods.iter().map(|m| m.method.clone()));
            let mut rows: Vec<Vec<String>> = Vec::new();
            let metric_row = |name: &str, f: &dyn Fn(&crate::simulation::MethodMetrics) -> String| {
                let mut row = vec![name.to_string()];
                row.extend(report.methods.iter().map(f));
                row
            };
            rows.push(metric_row("median_break_1", &|m| {
                format!("{}", m.median_breaks[0])
            }));
            rows.push(metric_row("median_break_2", &|m| {
                format!("{}", m.median_breaks[1])
            }));
            rows.push(metric_row("true_zero_pct", &|m| {
                format!("{:.1}", m.true_zero_pct)
            }));
            rows.push(metric_row("false_zero_pct", &|m| {
                format!("{:.1}", m.false_zero_pct)
            }));
            for r in 0..3 {
                rows.push(metric_row(&format!("l1_error_segment_{}", r + 1), &|m| {
                    format!("{:.4}", m.l1_error_per_segment[r])
                }));
            }
            rows.push(metric_row("replications_used", &|m| {
                m.replications_used.to_string()
            }));
            rows.push(metric_row("failures", &|m| m.failures.to_string()));
            rows.push(metric_row("valid", &|m| (!m.invalid).to_string()));
            let mut out = format!(
                "# law={} n={} reps={} seed={} tau={:.5} true_breaks={:?}\n",
                report.law, report.n, report.reps, report.seed, report.tau_star, report.true_breaks
            );
            if format == OutputFormat::Markdown {
                out = format!(
                    "law: {}, n: {}, reps: {}, seed: {}, tau: {:.5}, true breaks: {:?}\n\n",
                    report.law, report.n, report.reps, report.seed, report.tau_star,
                    report.true_breaks
                );
            }
            out.push_str(&render_table(&header, &rows, format));
            Ok(out)
        }
    }
}

fn render_table(header: &[String], rows: &[Vec<String>], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            w.write_record(header).unwrap();
            for row in rows {
                w.write_record(row).unwrap();
            }
            String::from_utf8(w.into_inner().unwrap()).unwrap()
        }
        OutputFormat::Markdown => {
            let mut out = String::new();
            out.push_str(&format!("| {} |\n", header.join(" | ")));
            out.push_str(&format!(
                "|{}|\n",
                header.iter().map(|_| " --- ").collect::<Vec<_>>().join("|")
            ));
            for row in rows {
                out.push_str(&format!("| {} |\n", row.join(" | ")));
            }
            out
        }
        OutputFormat::Json => unreachable!("JSON handled by the callers"),
    }
}
