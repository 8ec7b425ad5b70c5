//! Study results and their CSV form.
//!
//! One row per (sweep value, resolution, observer) cell. Numbers are written
//! with Rust's shortest round-trip formatting, so reading a CSV back gives
//! bit-identical values. A cell whose evaluation failed carries `failed` in
//! the `auc` column and leaves the other figures empty.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{file_error, ExperimentError, Result};

pub const CSV_HEADER: [&str; 11] = [
    "study",
    "sweep_value",
    "resolution",
    "observer",
    "auc",
    "ci_lo",
    "ci_hi",
    "mse",
    "psnr",
    "ssim",
    "seed",
];

const FAILED: &str = "failed";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Hr,
    Lr,
    Sr,
}

impl Resolution {
    pub const ALL: [Resolution; 3] = [Resolution::Hr, Resolution::Lr, Resolution::Sr];

    pub fn name(self) -> &'static str {
        match self {
            Resolution::Hr => "HR",
            Resolution::Lr => "LR",
            Resolution::Sr => "SR",
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Resolution {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        Resolution::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ExperimentError::Format(format!("unknown resolution {s:?}")))
    }
}

/// AUC with its confidence interval, or the reason the cell has none.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Auc { auc: f64, ci_lo: f64, ci_hi: f64 },
    Failed(String),
}

impl Outcome {
    pub fn auc(&self) -> Option<f64> {
        match self {
            Outcome::Auc { auc, .. } => Some(*auc),
            Outcome::Failed(_) => None,
        }
    }

    pub fn ci(&self) -> Option<(f64, f64)> {
        match self {
            Outcome::Auc { ci_lo, ci_hi, .. } => Some((*ci_lo, *ci_hi)),
            Outcome::Failed(_) => None,
        }
    }
}

/// Ensemble image-quality figures against the HR reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IqSummary {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub study: String,
    pub sweep_value: f64,
    pub resolution: Resolution,
    pub observer: String,
    pub outcome: Outcome,
    pub iq: Option<IqSummary>,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn find(
        &self,
        sweep_value: f64,
        resolution: Resolution,
        observer: &str,
    ) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.sweep_value == sweep_value && r.resolution == resolution && r.observer == observer
        })
    }

    pub fn failed(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows
            .iter()
            .filter(|r| matches!(r.outcome, Outcome::Failed(_)))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv_to(w: impl Write, report: &Report) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in &report.rows {
        let (auc, lo, hi) = match &r.outcome {
            Outcome::Auc { auc, ci_lo, ci_hi } => {
                (auc.to_string(), ci_lo.to_string(), ci_hi.to_string())
            }
            Outcome::Failed(_) => (FAILED.to_string(), String::new(), String::new()),
        };
        out.write_record([
            r.study.clone(),
            r.sweep_value.to_string(),
            r.resolution.to_string(),
            r.observer.clone(),
            auc,
            lo,
            hi,
            opt(r.iq.map(|q| q.mse)),
            opt(r.iq.map(|q| q.psnr)),
            opt(r.iq.map(|q| q.ssim)),
            r.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(report: &Report, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(file_error(path))?;
    write_csv_to(std::io::BufWriter::new(f), report)
}

fn parse_f64(field: &str, line: u64) -> Result<f64> {
    field
        .parse()
        .map_err(|_| ExperimentError::Format(format!("line {line}: {field:?} is not a number")))
}

fn parse_opt(field: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, line).map(Some)
    }
}

/// Reads a report written by [`write_csv`]. Failure messages are not
/// stored in the file and come back empty.
pub fn read_csv_from(r: impl Read) -> Result<Report> {
    let mut input = csv::Reader::from_reader(r);
    let header = input.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(ExperimentError::Format(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    let mut report = Report::default();
    for record in input.records() {
        let rec = record?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| rec.get(i).unwrap_or("");
        let outcome = if f(4) == FAILED {
            Outcome::Failed(String::new())
        } else {
            Outcome::Auc {
                auc: parse_f64(f(4), line)?,
                ci_lo: parse_f64(f(5), line)?,
                ci_hi: parse_f64(f(6), line)?,
            }
        };
        let iq = match (
            parse_opt(f(7), line)?,
            parse_opt(f(8), line)?,
            parse_opt(f(9), line)?,
        ) {
            (Some(mse), Some(psnr), Some(ssim)) => Some(IqSummary { mse, psnr, ssim }),
            (None, None, None) => None,
            _ => {
                return Err(ExperimentError::Format(format!(
                    "line {line}: incomplete image-quality columns"
                )))
            }
        };
        report.push(ReportRow {
            study: f(0).to_string(),
            sweep_value: parse_f64(f(1), line)?,
            resolution: f(2).parse()?,
            observer: f(3).to_string(),
            outcome,
            iq,
            seed: f(10).parse().map_err(|_| {
                ExperimentError::Format(format!("line {line}: bad seed {:?}", f(10)))
            })?,
        });
    }
    Ok(report)
}

pub fn read_csv(path: &Path) -> Result<Report> {
    let f = std::fs::File::open(path).map_err(file_error(path))?;
    read_csv_from(std::io::BufReader::new(f))
}

/// Singular values of an observer covariance, one row per retained value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpectrumTable {
    pub rows: Vec<(f64, usize, f64)>,
}

pub const SPECTRA_HEADER: [&str; 3] = ["depth", "index", "singular_value"];

pub fn write_spectra(table: &SpectrumTable, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(file_error(path))?;
    let mut out = csv::Writer::from_writer(std::io::BufWriter::new(f));
    out.write_record(SPECTRA_HEADER)?;
    for (depth, index, sv) in &table.rows {
        out.write_record([depth.to_string(), index.to_string(), sv.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64, res: Resolution, outcome: Outcome, iq: Option<IqSummary>) -> ReportRow {
        ReportRow {
            study: "rayleigh-length".into(),
            sweep_value: v,
            resolution: res,
            observer: "RHO".into(),
            outcome,
            iq,
            seed: u64::MAX,
        }
    }

    fn csv_text(report: &Report) -> String {
        let mut buf = Vec::new();
        write_csv_to(&mut buf, report).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(
            csv_text(&Report::default()),
            format!("{}\n", CSV_HEADER.join(","))
        );
    }

    #[test]
    fn values_survive_a_round_trip() {
        let mut report = Report::default();
        report.push(row(
            5.0,
            Resolution::Hr,
            Outcome::Auc {
                auc: 0.1 + 0.2,
                ci_lo: 1.0 / 3.0,
                ci_hi: 0.999_999_999_999_9,
            },
            None,
        ));
        report.push(row(
            6.0,
            Resolution::Sr,
            Outcome::Auc {
                auc: 0.5,
                ci_lo: 0.4,
                ci_hi: 0.6,
            },
            Some(IqSummary {
                mse: 1e-300,
                psnr: f64::INFINITY,
                ssim: -0.25,
            }),
        ));
        report.push(row(
            7.0,
            Resolution::Lr,
            Outcome::Failed(String::new()),
            None,
        ));
        let back = read_csv_from(csv_text(&report).as_bytes()).unwrap();
        assert_eq!(back, report);
        assert!(csv_text(&report)
            .lines()
            .nth(3)
            .unwrap()
            .contains(",failed,,,"));
    }

    #[test]
    fn foreign_header_is_rejected() {
        assert!(read_csv_from("a,b\n1,2\n".as_bytes()).is_err());
    }
}
