use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::experiment::{AlgorithmResult, ExperimentReport};
use crate::error::{Error, Result};

/// Header of the machine-readable report, in order.
pub const REPORT_COLUMNS: [&str; 6] = ["algorithm", "mse", "amse", "time_seconds", "ridge", "bound_slack"];

const CSV_NAME: &str = "report.csv";
const TABLE_NAME: &str = "report.txt";
const LOG_NAME: &str = "run_log.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub table: PathBuf,
    pub run_log: PathBuf,
}

impl ReportPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            csv: dir.join(CSV_NAME),
            table: dir.join(TABLE_NAME),
            run_log: dir.join(LOG_NAME),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_f64(field: &str, column: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Format(format!("column {column}: not a number: {field:?}")))
}

fn parse_opt(field: &str, column: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, column).map(Some)
    }
}

/// Values are written in shortest round-trip form; missing values are empty.
pub fn write_results_csv<W: Write>(rows: &[AlgorithmResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.mse.to_string(),
            r.amse.to_string(),
            r.time_seconds.to_string(),
            opt(r.ridge),
            opt(r.bound_slack),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<AlgorithmResult>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_COLUMNS {
        return Err(Error::Format(format!("unexpected report header {header:?}")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(AlgorithmResult {
                algorithm: rec[0].to_string(),
                mse: parse_f64(&rec[1], REPORT_COLUMNS[1])?,
                amse: parse_f64(&rec[2], REPORT_COLUMNS[2])?,
                time_seconds: parse_f64(&rec[3], REPORT_COLUMNS[3])?,
                ridge: parse_opt(&rec[4], REPORT_COLUMNS[4])?,
                bound_slack: parse_opt(&rec[5], REPORT_COLUMNS[5])?,
            })
        })
        .collect()
}

/// Fixed-width table for people.
pub fn render_table(rows: &[AlgorithmResult]) -> String {
    let mut s = format!(
        "{:<10} {:>10} {:>10} {:>12} {:>10} {:>12}\n",
        "algorithm", "MSE", "AMSE", "time (s)", "ridge", "bound slack"
    );
    let dash = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into());
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>10.5} {:>10.5} {:>12.4} {:>10} {:>12}",
            r.algorithm,
            r.mse,
            r.amse,
            r.time_seconds,
            dash(r.ridge, 4),
            dash(r.bound_slack, 3)
        );
    }
    s
}

/// Writes the CSV, the table and the JSON run log into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<ReportPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = ReportPaths::in_dir(dir);
    write_results_csv(&report.results, std::fs::File::create(&paths.csv)?)?;
    std::fs::write(&paths.table, render_table(&report.results))?;
    let log = std::fs::File::create(&paths.run_log)?;
    serde_json::to_writer_pretty(log, report)?;
    Ok(paths)
}

/// Reads back what [`emit_report`] wrote. The rows come from the CSV.
pub fn parse_report(dir: &Path) -> Result<ExperimentReport> {
    let paths = ReportPaths::in_dir(dir);
    let mut report: ExperimentReport = serde_json::from_reader(std::fs::File::open(&paths.run_log)?)?;
    report.results = read_results_csv(std::fs::File::open(&paths.csv)?)?;
    Ok(report)
}
