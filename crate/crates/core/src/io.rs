//! File formats: numeric CSV matrices (optional auto-detected header row)
//! and the JSON/CSV report schema.
//!
//! Reports are plain serde structs with fixed field order and no timestamps,
//! so a rerun with the same seed and config produces byte-identical output.
//! Floats go through the shortest round-trip encoding: reading a report back
//! recovers every value exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ExperimentTable;
use crate::matrix::DataMatrix;
use crate::stepwise::SelectionLedger;

/// Read a rectangular numeric CSV into a matrix. A single header row is
/// auto-detected (non-numeric first row) and captured as column names.
/// NaN/inf and ragged rows are rejected with 1-based coordinates.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = idx + 1;
        if let Some(w) = width {
            if record.len() != w {
                return Err(Error::CsvCell {
                    row: row_no,
                    column: record.len().min(w) + 1,
                    message: format!("ragged row: {} fields, expected {w}", record.len()),
                });
            }
        } else {
            width = Some(record.len());
        }
        let mut row = Vec::with_capacity(record.len());
        let mut failed: Option<(usize, String)> = None;
        for (col, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(v) => {
                    failed = Some((col + 1, format!("non-finite value {v}")));
                    break;
                }
                Err(_) => {
                    failed = Some((col + 1, format!("not a number: {field:?}")));
                    break;
                }
            }
        }
        match failed {
            None => rows.push(row),
            Some((col, message)) => {
                // A non-numeric first row is a header.
                if idx == 0 && names.is_none() {
                    names = Some(record.iter().map(|s| s.to_string()).collect());
                } else {
                    return Err(Error::CsvCell {
                        row: row_no,
                        column: col,
                        message,
                    });
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Degenerate(format!("{}: no data rows", path.display())));
    }
    let mut matrix = DataMatrix::from_rows(rows)?;
    if let Some(names) = names {
        matrix.set_column_names(names)?;
    }
    Ok(matrix)
}

/// Write a matrix as numeric CSV (with a header row when column names are
/// present).
pub fn write_matrix_csv(path: impl AsRef<Path>, matrix: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_writer(Vec::new());
    if let Some(names) = matrix.column_names() {
        writer.write_record(names)?;
    }
    for i in 0..matrix.nrows() {
        let row: Vec<String> = matrix.row(i).iter().map(|v| format!("{v}")).collect();
        writer.write_record(&row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One selected coefficient, 0-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportTriple {
    pub feature: usize,
    pub response: usize,
    pub value: f64,
}

/// Report written by every command: method identifier, parameters, metrics,
/// optional support and ledger, and enough provenance (seed, config hash,
/// version) to rerun bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Report {
    pub method: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub metrics: BTreeMap<String, serde_json::Value>,
    /// Selected coefficients; empty selections serialize as an empty array.
    #[serde(default)]
    pub support: Vec<SupportTriple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<SelectionLedger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<ExperimentTable>,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl Report {
    pub fn new(method: impl Into<String>, seed: u64) -> Self {
        Self {
            method: method.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            ..Self::default()
        }
    }

    pub fn with_config_hash(mut self, canonical_config: &str) -> Self {
        self.config_hash = fnv1a_hex(canonical_config.as_bytes());
        self
    }
}

/// FNV-1a over the canonical config text; enough to detect config drift
/// between a report and a rerun.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{hash:016x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Serialize a report. JSON is the full schema; CSV renders the experiment
/// table (one row per method, "mean±stderr" cells) and falls back to the
/// flat metrics map for single runs.
pub fn render_report(report: &Report, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => render_report_csv(report),
    }
}

fn format_aggregate(agg: Option<crate::harness::Aggregate>) -> String {
    match agg {
        Some(a) => format!("{:.4}±{:.4}", a.mean, a.stderr),
        None => "—".to_string(),
    }
}

fn render_report_csv(report: &Report) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if let Some(table) = &report.table {
        writer.write_record([
            "method",
            "test_error",
            "train_error",
            "coeff_precision",
            "coeff_recall",
            "feat_precision",
            "feat_recall",
            "n_coeff_selected",
            "n_feat_selected",
        ])?;
        for m in &table.methods {
            writer.write_record([
                m.method.clone(),
                format_aggregate(m.test_error),
                format_aggregate(m.train_error),
                format_aggregate(m.coeff_precision),
                format_aggregate(m.coeff_recall),
                format_aggregate(m.feat_precision),
                format_aggregate(m.feat_recall),
                format_aggregate(m.n_coeff_selected),
                format_aggregate(m.n_feat_selected),
            ])?;
        }
    } else {
        writer.write_record(["metric", "value"])?;
        for (key, value) in &report.metrics {
            writer.write_record([key.clone(), value.to_string()])?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv encoding: {e}")))
}

/// Write a report to disk in the requested format.
pub fn write_report(report: &Report, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rendered = render_report(report, format)?;
    fs::write(path, rendered).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "micsel-io-{}-{}",
            std::process::id(),
            std::thread::current().name().unwrap_or("t").replace("::", "-")
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn csv_roundtrip_with_header() {
        let dir = tmpdir();
        let path = dir.join("m.csv");
        fs::write(&path, "f1,f2\n1.5,2\n-3,4e-2\n").unwrap();
        let m = read_matrix_csv(&path).unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.ncols(), 2);
        assert_eq!(m.get(0, 0), 1.5);
        assert_eq!(m.get(1, 1), 0.04);
        assert_eq!(m.column_names().unwrap()[1], "f2");
        write_matrix_csv(&path, &m).unwrap();
        let again = read_matrix_csv(&path).unwrap();
        assert_eq!(m, again);
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn plain_numeric_csv_has_no_header() {
        let dir = tmpdir();
        let path = dir.join("plain.csv");
        fs::write(&path, "1,2\n3,4\n").unwrap();
        let m = read_matrix_csv(&path).unwrap();
        assert_eq!(m.nrows(), 2);
        assert!(m.column_names().is_none());
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn nan_cell_is_located() {
        let dir = tmpdir();
        let path = dir.join("bad.csv");
        fs::write(&path, "1,2\n3,NaN\n").unwrap();
        match read_matrix_csv(&path) {
            Err(Error::CsvCell { row, column, .. }) => {
                assert_eq!((row, column), (2, 2));
            }
            other => panic!("expected a cell error, got {other:?}"),
        }
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn ragged_row_is_located() {
        let dir = tmpdir();
        let path = dir.join("ragged.csv");
        fs::write(&path, "1,2\n3\n").unwrap();
        match read_matrix_csv(&path) {
            Err(Error::CsvCell { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected a cell error, got {other:?}"),
        }
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn text_cell_after_header_is_an_error() {
        let dir = tmpdir();
        let path = dir.join("text.csv");
        fs::write(&path, "a,b\n1,2\n3,oops\n").unwrap();
        match read_matrix_csv(&path) {
            Err(Error::CsvCell { row, column, .. }) => {
                assert_eq!((row, column), (3, 2));
            }
            other => panic!("expected a cell error, got {other:?}"),
        }
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn report_json_roundtrip_is_exact() {
        let dir = tmpdir();
        let path = dir.join("report.json");
        let mut report = Report::new("demo", 42).with_config_hash("config-text");
        report
            .metrics
            .insert("rmse".into(), serde_json::json!(0.1234567890123456789));
        report.support.push(SupportTriple {
            feature: 3,
            response: 1,
            value: -1.5e-17,
        });
        write_report(&report, ReportFormat::Json, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back.metrics["rmse"], report.metrics["rmse"]);
        assert_eq!(back.support, report.support);
        assert_eq!(back.config_hash, report.config_hash);
        // Byte-identical on re-serialization.
        let a = render_report(&report, ReportFormat::Json).unwrap();
        let b = render_report(&back, ReportFormat::Json).unwrap();
        assert_eq!(a, b);
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn empty_selection_serializes_as_empty_array() {
        let report = Report::new("select", 1);
        let json = render_report(&report, ReportFormat::Json).unwrap();
        assert!(json.contains("\"support\": []"));
        let parsed: Report = serde_json::from_str(&json).unwrap();
        assert!(parsed.support.is_empty());
    }

    #[test]
    fn experiment_csv_has_method_rows() {
        use crate::harness::{Aggregate, ExperimentTable, MethodSummary};
        let table = ExperimentTable {
            methods: (0..2)
                .map(|i| MethodSummary {
                    method: format!("m{i}"),
                    test_error: Some(Aggregate {
                        mean: 0.1 * (i + 1) as f64,
                        stderr: 0.01,
                        count: 5,
                    }),
                    train_error: None,
                    coeff_precision: None,
                    coeff_recall: None,
                    feat_precision: None,
                    feat_recall: None,
                    n_coeff_selected: None,
                    n_feat_selected: None,
                })
                .collect(),
            replicates: 5,
            errors: vec![],
        };
        let mut report = Report::new("experiment", 0);
        report.table = Some(table);
        let csv = render_report(&report, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("m0,0.1000±0.0100"));
        assert!(lines[2].contains("—"));
    }
}
