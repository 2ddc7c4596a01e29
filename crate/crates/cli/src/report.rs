//! JSON and CSV output.
//!
//! Everything except `header.timestamp` is a function of the configuration
//! and seed, so two runs produce identical files apart from that field.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use wigner_core::control::DecayReport;
use wigner_core::verify::{CheckRecord, VerificationReport};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::experiment::{CertificateSummary, Outcome, PointRow};
use crate::LabError;

pub const REPORT_JSON: &str = "report.json";
pub const POINTS_CSV: &str = "points.csv";

#[derive(Debug, Serialize)]
pub struct Header {
    pub generator: String,
    /// Seconds since the Unix epoch; the only nondeterministic field.
    pub timestamp: u64,
}

impl Header {
    pub fn now() -> Self {
        Self {
            generator: format!("wigner-lab {}", env!("CARGO_PKG_VERSION")),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub pass: bool,
    pub no_data: bool,
    pub points: usize,
    pub points_passing: usize,
    pub evaluated: usize,
    pub failed_checks: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub header: Header,
    pub summary: Summary,
    pub config: &'a ExperimentConfig,
    pub certificate: Option<&'a CertificateSummary>,
    pub checks: &'a [CheckRecord],
    pub phi_conditions: &'a DecayReport,
}

impl<'a> RunReport<'a> {
    pub fn new(o: &'a Outcome) -> Self {
        Self {
            header: Header::now(),
            summary: Summary {
                pass: o.pass(),
                no_data: o.no_data(),
                points: o.rows.len(),
                points_passing: o.rows.iter().filter(|r| r.pass).count(),
                evaluated: o.evaluated,
                failed_checks: failed(&o.report),
            },
            config: &o.resolved.config,
            certificate: o.certificate.as_ref(),
            checks: &o.report.records,
            phi_conditions: &o.decay,
        }
    }
}

/// Report of the standalone `check-algebra` and `check-phi` commands.
#[derive(Debug, Serialize)]
pub struct SuiteReport<'a, T: Serialize> {
    pub header: Header,
    pub pass: bool,
    pub failed_checks: Vec<String>,
    pub checks: &'a [CheckRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<&'a T>,
}

pub fn failed(r: &VerificationReport) -> Vec<String> {
    r.records
        .iter()
        .filter(|c| c.applicable && !c.pass)
        .map(|c| c.name.clone())
        .collect()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn rows_to_csv(rows: &[PointRow]) -> Result<Vec<u8>, LabError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "point_id",
            "norm_x",
            "iso_residual",
            "dist",
            "sqrt_phi",
            "h_orth",
            "subseq_len",
            "pass",
        ])
        .map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| LabError::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(std::io::Error::other(e))
}

/// Writes the selected files into `dir`, returning their paths.
pub fn emit(o: &Outcome, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, LabError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.json() {
        let p = dir.join(REPORT_JSON);
        fs::write(&p, to_json(&RunReport::new(o)))?;
        written.push(p);
    }
    if format.csv() {
        let p = dir.join(POINTS_CSV);
        fs::write(&p, rows_to_csv(&o.rows)?)?;
        written.push(p);
    }
    Ok(written)
}

/// One line per check, for the terminal.
pub fn summary_lines(r: &VerificationReport) -> Vec<String> {
    r.records
        .iter()
        .map(|c| {
            let status = match (c.applicable, c.pass) {
                (false, _) => "n/a ",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            let mut line = format!(
                "{status} {:<24} worst {:>11.3e}  threshold {:.1e}  checked {}",
                c.name, c.worst_residual, c.threshold, c.checked
            );
            if c.skipped > 0 {
                line.push_str(&format!("  skipped {}", c.skipped));
            }
            if c.vacuous > 0 {
                line.push_str(&format!("  vacuous {}", c.vacuous));
            }
            if !c.pass {
                if let Some(w) = &c.witness {
                    line.push_str(&format!("  witness {w:?}"));
                }
            }
            line
        })
        .collect()
}
