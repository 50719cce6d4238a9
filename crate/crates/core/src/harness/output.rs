//! CSV tables and JSON sidecar for experiment reports.
//!
//! `results.csv` has one row per (sweep point, drop); `cdf.csv` lists each
//! point's empirical CDF; `results.json` holds the full report including the
//! config echo and summaries. Floats use the shortest representation that
//! parses back to the same `f64`, so no precision is lost.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ExperimentReport;
use crate::error::{Error, Result};

pub const RESULTS_CSV: &str = "results.csv";
pub const CDF_CSV: &str = "cdf.csv";
pub const RESULTS_JSON: &str = "results.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub results_csv: PathBuf,
    pub cdf_csv: PathBuf,
    pub json: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    generated_unix_secs: u64,
    #[serde(flatten)]
    report: ExperimentReport,
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

fn sweep_keys(report: &ExperimentReport) -> Vec<String> {
    let keys: BTreeSet<&String> = report.points.iter().flat_map(|p| p.sweep_point.keys()).collect();
    keys.into_iter().cloned().collect()
}

/// Writes the per-drop table.
pub fn write_results_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let keys = sweep_keys(report);
    let max_users = report.points.iter().flat_map(|p| &p.drops).map(|d| d.user_rates.len()).max().unwrap_or(0);
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = keys.clone();
    header.extend(["drop".to_string(), "seed".to_string()]);
    header.extend((0..max_users).map(|k| format!("user_rate_{k}")));
    header.push("sum_rate".to_string());
    w.write_record(&header).map_err(csv_err(path))?;
    for point in &report.points {
        for drop in &point.drops {
            let mut row: Vec<String> = keys.iter().map(|k| point.sweep_point.get(k).map(cell).unwrap_or_default()).collect();
            row.push(drop.drop_index.to_string());
            row.push(drop.seed.to_string());
            row.extend((0..max_users).map(|k| drop.user_rates.get(k).map(|r| r.to_string()).unwrap_or_default()));
            row.push(drop.sum_rate.to_string());
            w.write_record(&row).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes each sweep point's empirical CDF, sorted by sum rate.
pub fn write_cdf_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let keys = sweep_keys(report);
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = keys.clone();
    header.extend(["sum_rate".to_string(), "cdf".to_string()]);
    w.write_record(&header).map_err(csv_err(path))?;
    for point in &report.points {
        for c in &point.cdf {
            let mut row: Vec<String> = keys.iter().map(|k| point.sweep_point.get(k).map(cell).unwrap_or_default()).collect();
            row.push(c.sum_rate.to_string());
            row.push(c.probability.to_string());
            w.write_record(&row).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_json(report: &ExperimentReport, path: &Path) -> Result<()> {
    let generated_unix_secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let sidecar = Sidecar { generated_unix_secs, report: report.clone() };
    let file = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &sidecar)?;
    Ok(())
}

/// Reloads a report written by [`write_json`].
pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    Ok(sidecar.report)
}

/// Writes all outputs into `dir`, creating it if needed.
pub fn emit_results(report: &ExperimentReport, dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = OutputFiles {
        results_csv: dir.join(RESULTS_CSV),
        cdf_csv: dir.join(CDF_CSV),
        json: dir.join(RESULTS_JSON),
    };
    write_results_csv(report, &files.results_csv)?;
    write_cdf_csv(report, &files.cdf_csv)?;
    write_json(report, &files.json)?;
    Ok(files)
}
