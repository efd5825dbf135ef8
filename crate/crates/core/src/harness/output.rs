//! CSV and JSON result files.
//!
//! `results.csv` has one row per `(policy, axis value)` with the column
//! set [`WIDE_HEADER`]; `results_long.csv` has one row per
//! `(policy, axis value, metric)`; `curves.csv` has one row per checkpoint
//! of each regret curve. Missing values are empty fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::error::HarnessError;
use super::sweep::{CurveRow, OracleStatus, SweepResults, SweepRow};

pub const WIDE_HEADER: [&str; 11] = [
    "scenario_id",
    "policy",
    "axis_name",
    "axis_value",
    "run_count",
    "mean_cost",
    "mean_backlog",
    "backlog_variance",
    "regret_eq9",
    "regret_vs_gs",
    "wallclock_s",
];

pub const LONG_HEADER: [&str; 7] = [
    "scenario_id",
    "policy",
    "axis_name",
    "axis_value",
    "run_count",
    "metric",
    "value",
];

pub const METRICS: [&str; 5] = [
    "mean_cost",
    "mean_backlog",
    "backlog_variance",
    "regret_eq9",
    "regret_vs_gs",
];

pub const CURVE_HEADER: [&str; 10] = [
    "scenario_id",
    "policy",
    "beta",
    "v",
    "slot",
    "run_count",
    "mean_cost",
    "mean_backlog",
    "regret_eq9",
    "regret_vs_gs",
];

/// Version stamped into every JSON report.
pub fn version_string() -> String {
    format!("{} v{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    /// Environment seed of each run index.
    pub run_seeds: Vec<u64>,
    pub oracle: OracleStatus,
    pub sweeps: Vec<SweepResults>,
    #[serde(default)]
    pub curves: Vec<CurveRow>,
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn field(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>, HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn metric(row: &SweepRow, name: &str) -> Option<f64> {
    match name {
        "mean_cost" => Some(row.mean_cost),
        "mean_backlog" => Some(row.mean_backlog),
        "backlog_variance" => Some(row.backlog_variance),
        "regret_eq9" => row.regret_eq9,
        "regret_vs_gs" => row.regret_vs_gs,
        _ => None,
    }
}

pub fn write_wide<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let mut w = csv_writer(out, &WIDE_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.policy.to_string(),
            r.axis_name.to_string(),
            r.axis_value.to_string(),
            r.run_count.to_string(),
            r.mean_cost.to_string(),
            r.mean_backlog.to_string(),
            r.backlog_variance.to_string(),
            field(r.regret_eq9),
            field(r.regret_vs_gs),
            field(r.wallclock_s),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_long<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let mut w = csv_writer(out, &LONG_HEADER)?;
    for r in rows {
        for m in METRICS {
            w.write_record([
                r.scenario_id.clone(),
                r.policy.to_string(),
                r.axis_name.to_string(),
                r.axis_value.to_string(),
                r.run_count.to_string(),
                m.to_string(),
                field(metric(r, m)),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_curves<W: Write>(out: W, rows: &[CurveRow]) -> Result<(), HarnessError> {
    let mut w = csv_writer(out, &CURVE_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.policy.to_string(),
            r.beta.to_string(),
            r.v.to_string(),
            r.slot.to_string(),
            r.run_count.to_string(),
            r.mean_cost.to_string(),
            r.mean_backlog.to_string(),
            field(r.regret_eq9),
            r.regret_vs_gs.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Files written by [`emit_results`].
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub wide: std::path::PathBuf,
    pub long: std::path::PathBuf,
    pub curves: Option<std::path::PathBuf>,
    pub json: std::path::PathBuf,
}

/// Writes `results.csv`, `results_long.csv`, `curves.csv` (when the report
/// has curves) and `results.json` into `dir`, creating it if needed.
pub fn emit_results(report: &Report, dir: &Path) -> Result<Emitted, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let rows: Vec<SweepRow> = report.sweeps.iter().flat_map(|s| s.rows.iter().cloned()).collect();
    let wide = dir.join("results.csv");
    write_wide(create(&wide)?, &rows)?;
    let long = dir.join("results_long.csv");
    write_long(create(&long)?, &rows)?;
    let curves = if report.curves.is_empty() {
        None
    } else {
        let p = dir.join("curves.csv");
        write_curves(create(&p)?, &report.curves)?;
        Some(p)
    };
    let json = dir.join("results.json");
    write_json(report, &json)?;
    Ok(Emitted {
        wide,
        long,
        curves,
        json,
    })
}

pub fn write_json(report: &Report, path: &Path) -> Result<(), HarnessError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n").map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    out.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json(path: &Path) -> Result<Report, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
