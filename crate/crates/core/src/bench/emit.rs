//! Result files.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `algo` | algorithm id |
//! | `memory_kb` | memory budget in KiB |
//! | `lambda` | effective eviction parameter, empty when not applicable |
//! | `threshold` | heavy-hitter threshold in packets |
//! | `n_packets` | trace length |
//! | `n_true_hh` | number of true heavy hitters |
//! | `aae`, `are` | average absolute / relative error |
//! | `pr`, `rr`, `f1` | precision, recall, F1 |
//! | `mpps_mean`, `mpps_std` | insertion throughput, empty when not measured |
//! | `seed` | sketch hash seed |
//! | `report_ms` | time to produce the report |
//! | `config_hash` | names the CDF files and identifies the configuration |
//!
//! Next to the main file `<stem>.<ext>`, every row gets
//! `<stem>.<config_hash>.ae_cdf.csv` and `<stem>.<config_hash>.re_cdf.csv`
//! with `value,fraction` step points.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::runner::ResultRow;
use crate::error::{Error, Result};
use crate::metrics::cdf;

pub const CSV_HEADER: &str = "algo,memory_kb,lambda,threshold,n_packets,n_true_hh,aae,are,pr,rr,f1,mpps_mean,mpps_std,seed,report_ms,config_hash";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::param(
                "format",
                format!("unknown output format `{other}`"),
            )),
        }
    }
}

pub(crate) fn csv_row(row: &ResultRow) -> String {
    let (mean, std) = row
        .throughput
        .as_ref()
        .map_or((String::new(), String::new()), |t| {
            (t.mean_mpps.to_string(), t.std_mpps.to_string())
        });
    let a = &row.accuracy;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        row.config.algo,
        row.config.memory_kb,
        row.lambda.map_or(String::new(), |l| l.as_f64().to_string()),
        row.threshold,
        row.n_packets,
        a.n_true,
        a.aae,
        a.are,
        a.pr,
        a.rr,
        a.f1,
        mean,
        std,
        row.config.seed,
        row.report_ms,
        row.config_hash,
    )
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&csv_row(row));
        out.push('\n');
    }
    out
}

fn cdf_csv(samples: &[f64]) -> String {
    let mut out = String::from("value,fraction\n");
    for (v, f) in cdf(samples) {
        let _ = writeln!(out, "{v},{f}");
    }
    out
}

fn sibling(path: &Path, hash: &str, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("results");
    path.with_file_name(format!("{stem}.{hash}.{suffix}"))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the results file and the per-row CDF files. Returns every path
/// written, the main file first.
pub fn emit(
    rows: &[ResultRow],
    format: OutputFormat,
    path: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let body = match format {
        OutputFormat::Csv => to_csv(rows),
        OutputFormat::Json => serde_json::to_string_pretty(rows).expect("rows serialize") + "\n",
    };
    write(path, &body)?;
    let mut written = vec![path.to_owned()];
    for row in rows {
        for (suffix, samples) in [
            ("ae_cdf.csv", &row.accuracy.ae_samples),
            ("re_cdf.csv", &row.accuracy.re_samples),
        ] {
            let p = sibling(path, &row.config_hash, suffix);
            write(&p, &cdf_csv(samples))?;
            written.push(p);
        }
    }
    Ok(written)
}
