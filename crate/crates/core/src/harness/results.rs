//! Aggregated result tables and their CSV form.
//!
//! Numbers are written in Rust's shortest round-trip notation so a parsed
//! table equals the one that was written. `inf` marks the noiseless SNR point
//! and an empty field marks a metric that does not apply to a method.

use std::io::Write;
use std::path::Path;

use super::runner::TrialRecord;
use super::Method;
use crate::{Error, Result};

pub const RESULT_HEADER: [&str; 10] = [
    "method",
    "snr_db",
    "nmse_hr_db",
    "nmse_hs_db",
    "nmse_x_db",
    "mean_als_iters",
    "mean_bigamp_iters",
    "trials_used",
    "failures",
    "wall_time",
];

pub const PER_TRIAL_HEADER: [&str; 11] = [
    "trial",
    "method",
    "snr_db",
    "nmse_hr",
    "nmse_hs",
    "nmse_x",
    "als_iters",
    "bigamp_iters",
    "failed",
    "bigamp_stop",
    "error",
];

/// Shortest representation that parses back to the same value; infinities
/// are written as `inf` / `-inf`.
pub fn format_real(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn parse_real(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse::<f64>().ok().filter(|v| !v.is_nan()),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub snr_db: f64,
    pub nmse_hr_db: Option<f64>,
    pub nmse_hs_db: Option<f64>,
    pub nmse_x_db: Option<f64>,
    pub mean_als_iters: Option<f64>,
    pub mean_bigamp_iters: Option<f64>,
    /// Trials that produced metrics (including flagged ones that returned a
    /// best iterate).
    pub trials_used: usize,
    /// Trials flagged as failed: errors plus divergent BiG-AMP runs.
    pub failures: usize,
    /// Summed seconds across trials, when timing is recorded.
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    /// Method-major, then SNR in grid order.
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn row(&self, method: Method, snr_db: f64) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.method == method && r.snr_db == snr_db)
    }

    /// Rows for one method in grid order.
    pub fn series(&self, method: Method) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method);
            }
        }
        out
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(RESULT_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.method.as_str().to_string(),
                format_real(r.snr_db),
                opt(r.nmse_hr_db),
                opt(r.nmse_hs_db),
                opt(r.nmse_x_db),
                opt(r.mean_als_iters),
                opt(r.mean_bigamp_iters),
                r.trials_used.to_string(),
                r.failures.to_string(),
                opt(r.wall_time),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV fields are ASCII"))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.iter().ne(RESULT_HEADER.iter().copied()) {
            return Err(Error::InvalidValue(format!(
                "unexpected results header: {}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let bad = |what: &str| Error::InvalidValue(format!("row {}: bad {what}", i + 1));
            let real = |j: usize, what: &str| -> Result<Option<f64>> {
                let f = &rec[j];
                if f.is_empty() {
                    Ok(None)
                } else {
                    parse_real(f).map(Some).ok_or_else(|| bad(what))
                }
            };
            let count = |j: usize, what: &str| -> Result<usize> { rec[j].parse().map_err(|_| bad(what)) };
            rows.push(ResultRow {
                method: rec[0].parse().map_err(|_| bad("method"))?,
                snr_db: real(1, "snr_db")?.ok_or_else(|| bad("snr_db"))?,
                nmse_hr_db: real(2, "nmse_hr_db")?,
                nmse_hs_db: real(3, "nmse_hs_db")?,
                nmse_x_db: real(4, "nmse_x_db")?,
                mean_als_iters: real(5, "mean_als_iters")?,
                mean_bigamp_iters: real(6, "mean_bigamp_iters")?,
                trials_used: count(7, "trials_used")?,
                failures: count(8, "failures")?,
                wall_time: real(9, "wall_time")?,
            });
        }
        Ok(ResultTable { rows })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidValue(format!("CSV: {other:?}")),
    }
}

/// One row per (trial, SNR, method) with linear NMSE values.
pub fn write_per_trial_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(PER_TRIAL_HEADER).map_err(csv_err)?;
    for r in records {
        let o = &r.outcome;
        w.write_record([
            r.trial.to_string(),
            r.method.as_str().to_string(),
            format_real(r.snr_db),
            opt(o.nmse_hr),
            opt(o.nmse_hs),
            opt(o.nmse_x),
            o.als_iters.map(|v| v.to_string()).unwrap_or_default(),
            o.bigamp_iters.map(|v| v.to_string()).unwrap_or_default(),
            o.failed.to_string(),
            o.bigamp_stop.clone().unwrap_or_default(),
            o.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    inner.flush()?;
    Ok(())
}
