//! CSV/JSON report types and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

pub const CSV_HEADER: &str = "n,e_proj,e_init,e_fp,e_total,c_n,iters,contraction,h3,h4,h5,h6,h7,h8";

/// 12 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

/// A simple table: header plus rows of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes `<stem>.csv` and/or `<stem>.json` under the configured directory.
pub fn write_outputs<T: Serialize>(config: &ExperimentConfig, stem: &str, csv: &str, json: &T) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if config.output_format.csv() {
        let p = config.output_path(&format!("{stem}.csv"));
        write_atomic(&p, csv)?;
        written.push(p);
    }
    if config.output_format.json() {
        let p = config.output_path(&format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(json).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        text.push('\n');
        write_atomic(&p, &text)?;
        written.push(p);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub e_proj: f64,
    pub e_init: f64,
    pub e_fp: f64,
    pub e_total: f64,
    pub c_n: f64,
    pub iters: usize,
    pub contraction: f64,
    pub h3: f64,
    pub h4: f64,
    /// Sampled operator-norm estimate.
    pub h5: f64,
    pub h6: f64,
    /// Sampled operator-norm estimate.
    pub h7: f64,
    /// Sampled operator-norm estimate over the probe ball.
    pub h8: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReportRow {
    pub fn csv_line(&self) -> String {
        let mut cells = vec![self.n.to_string()];
        cells.extend([self.e_proj, self.e_init, self.e_fp, self.e_total, self.c_n].map(fmt_float));
        cells.push(self.iters.to_string());
        cells.extend([self.contraction, self.h3, self.h4, self.h5, self.h6, self.h7, self.h8].map(fmt_float));
        cells.join(",")
    }

    /// `e_total ≤ e_proj + e_fp` (up to 1e-12).
    pub fn triangle_ok(&self) -> bool {
        self.e_total <= self.e_proj + self.e_fp + 1e-12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    pub n_ref: usize,
    pub reference_substeps: usize,
    pub reference_residual: f64,
    pub reference_iterations: usize,
    pub seed: u64,
    /// Columns h5, h7 and h8 are sampled lower-bound estimates.
    pub estimated_columns: Vec<String>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn row(&self, n: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn write(&self, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        write_outputs(config, "sweep", &self.to_csv(), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize) -> ReportRow {
        ReportRow {
            n,
            e_proj: 0.1,
            e_init: 0.2,
            e_fp: 0.05,
            e_total: 0.12,
            c_n: 1e-3,
            iters: 6,
            contraction: 0.02,
            h3: 0.1,
            h4: 0.0,
            h5: 1.0 / 3.0,
            h6: 2.5e-7,
            h7: 0.4,
            h8: 0.5,
            error: None,
        }
    }

    #[test]
    fn float_format_has_twelve_significant_digits() {
        assert_eq!(fmt_float(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_float(0.0), "0.00000000000e0");
        assert_eq!(fmt_float(-1234.5), "-1.23450000000e3");
    }

    #[test]
    fn csv_layout() {
        let report = ConvergenceReport {
            rows: vec![row(4), row(8)],
            n_ref: 32,
            reference_substeps: 4,
            reference_residual: 1e-11,
            reference_iterations: 5,
            seed: 7,
            estimated_columns: vec![],
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.split('\n').collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "");
        assert!(!csv.contains('\r'));
        assert!(lines[1].starts_with("4,1.00000000000e-1,"));
        assert_eq!(lines[1].split(',').count(), 14);
        assert!(report.rows.iter().all(ReportRow::triangle_ok));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.csv");
        write_atomic(&p, "a\n").unwrap();
        write_atomic(&p, "b\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "b\n");
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }
}
