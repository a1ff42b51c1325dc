use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::Estimator;
use crate::error::{Error, Result};

use super::aggregate::{aggregate, AggregateRow, Metric};
use super::config::RunConfig;
use super::trial::TrialLog;

pub const RAW_FILE: &str = "raw.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "run.json";

/// Marker for a missing value in the CSV files.
pub const MISSING: &str = "NA";

pub const RAW_HEADER: [&str; 10] = [
    "config_hash",
    "trial",
    "k",
    "shots",
    "estimator",
    "infidelity",
    "quadratic_loss",
    "trace_distance",
    "ess",
    "cond_number",
];

pub const AGGREGATE_HEADER: [&str; 9] =
    ["k", "shots", "estimator", "metric", "n", "mean", "median", "q16", "q84"];

/// One line of the raw per-trial table. `ess` is the smallest effective
/// sample size seen up to `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRow {
    pub config_hash: String,
    pub trial: usize,
    pub k: u64,
    pub shots: u64,
    pub estimator: Estimator,
    pub infidelity: Option<f64>,
    pub quadratic_loss: Option<f64>,
    pub trace_distance: Option<f64>,
    pub ess: Option<f64>,
    pub cond_number: Option<f64>,
}

/// Plain decimal for moderate magnitudes, scientific notation otherwise.
/// Both forms round-trip exactly through `str::parse`.
pub fn format_float(v: Option<f64>) -> String {
    match v {
        None => MISSING.to_string(),
        Some(v) if v.is_nan() => MISSING.to_string(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.to_string(),
        Some(v) if v == 0.0 || (1e-4..1e15).contains(&v.abs()) => format!("{v}"),
        Some(v) => format!("{v:e}"),
    }
}

pub fn parse_float(s: &str) -> Result<Option<f64>> {
    if s == MISSING {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("bad number '{s}'")))
}

fn parse_int<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad {what} '{s}'")))
}

/// Flattens trial logs into raw rows, ordered by trial, checkpoint and
/// estimator.
pub fn raw_rows(config_hash: &str, logs: &[TrialLog]) -> Vec<RawRow> {
    let mut rows = Vec::new();
    for log in logs {
        for cp in &log.rows {
            for (estimator, loss) in &cp.losses {
                rows.push(RawRow {
                    config_hash: config_hash.to_string(),
                    trial: log.trial,
                    k: cp.k,
                    shots: cp.shots,
                    estimator: *estimator,
                    infidelity: loss.map(|l| l.infidelity),
                    quadratic_loss: loss.map(|l| l.quadratic_loss),
                    trace_distance: loss.map(|l| l.trace_distance),
                    ess: cp.ess,
                    cond_number: cp.cond_number,
                });
            }
        }
    }
    rows
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_raw_csv(path: &Path, rows: &[RawRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(RAW_HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.config_hash.clone(),
            r.trial.to_string(),
            r.k.to_string(),
            r.shots.to_string(),
            r.estimator.to_string(),
            format_float(r.infidelity),
            format_float(r.quadratic_loss),
            format_float(r.trace_distance),
            format_float(r.ess),
            format_float(r.cond_number),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let found = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse(format!(
            "{}: expected columns {}",
            path.display(),
            header.join(",")
        )));
    }
    r.records()
        .map(|rec| rec.map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<RawRow>> {
    read_records(path, &RAW_HEADER)?
        .iter()
        .map(|rec| {
            Ok(RawRow {
                config_hash: rec[0].to_string(),
                trial: parse_int(&rec[1], "trial")?,
                k: parse_int(&rec[2], "k")?,
                shots: parse_int(&rec[3], "shots")?,
                estimator: rec[4].parse()?,
                infidelity: parse_float(&rec[5])?,
                quadratic_loss: parse_float(&rec[6])?,
                trace_distance: parse_float(&rec[7])?,
                ess: parse_float(&rec[8])?,
                cond_number: parse_float(&rec[9])?,
            })
        })
        .collect()
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(AGGREGATE_HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.shots.to_string(),
            r.estimator.to_string(),
            r.metric.to_string(),
            r.n.to_string(),
            format_float(r.mean),
            format_float(r.median),
            format_float(r.q16),
            format_float(r.q84),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    read_records(path, &AGGREGATE_HEADER)?
        .iter()
        .map(|rec| {
            Ok(AggregateRow {
                k: parse_int(&rec[0], "k")?,
                shots: parse_int(&rec[1], "shots")?,
                estimator: rec[2].parse()?,
                metric: rec[3].parse::<Metric>()?,
                n: parse_int(&rec[4], "n")?,
                mean: parse_float(&rec[5])?,
                median: parse_float(&rec[6])?,
                q16: parse_float(&rec[7])?,
                q84: parse_float(&rec[8])?,
            })
        })
        .collect()
}

/// JSON sidecar describing how a raw table was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub trials: usize,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            trials: config.trials,
            config: config.resolved(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub raw: PathBuf,
    pub aggregate: PathBuf,
    pub manifest: PathBuf,
}

/// Writes the raw table, its aggregate and the manifest into `dir`.
pub fn emit(config: &RunConfig, logs: &[TrialLog], dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths {
        raw: dir.join(RAW_FILE),
        aggregate: dir.join(AGGREGATE_FILE),
        manifest: dir.join(MANIFEST_FILE),
    };
    let rows = raw_rows(&config.hash(), logs);
    write_raw_csv(&paths.raw, &rows)?;
    write_aggregate_csv(&paths.aggregate, &aggregate(&rows)?)?;
    let json = serde_json::to_string_pretty(&RunManifest::new(config))
        .map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(&paths.manifest, json + "\n").map_err(|e| Error::io(&paths.manifest, e))?;
    Ok(paths)
}
