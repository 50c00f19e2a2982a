//! CSV export and parse-back.
//!
//! The schema is part of the tool's contract: a fixed header, fixed column
//! order, three-decimal microsecond values, rows sorted (model, n, metric)
//! so identical inputs export byte-identically.

use std::io::Write;
use std::path::Path;

use super::{sort_rows, HarnessError, Metric, RawTrial, StatRow};
use crate::protocol::Model;

pub const CSV_HEADER: &str = "model,n_nodes,metric,mean_us,median_us,p95_us,stddev_us,trials";
pub const RAW_HEADER: &str = "model,n_nodes,trial,encryption_us,distribution_us";

/// Write aggregated rows to `path`.
pub fn export_csv(rows: &[StatRow], path: &Path) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::InvalidScenario("no rows to export".into()));
    }
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    for row in &sorted {
        writeln!(
            out,
            "{},{},{},{:.3},{:.3},{:.3},{:.3},{}",
            row.model,
            row.n_nodes,
            row.metric.as_str(),
            row.mean_us,
            row.median_us,
            row.p95_us,
            row.stddev_us,
            row.trials
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Write the optional per-trial dump to `path`.
pub fn export_raw(raw: &[RawTrial], path: &Path) -> Result<(), HarnessError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{RAW_HEADER}")?;
    for t in raw {
        writeln!(
            out,
            "{},{},{},{:.3},{:.3}",
            t.model, t.n_nodes, t.trial, t.encryption_us, t.distribution_us
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Parse a results file produced by [`export_csv`].
pub fn parse_csv(path: &Path) -> Result<Vec<StatRow>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim_end() == CSV_HEADER => {}
        other => {
            return Err(HarnessError::Parse(format!(
                "unexpected header {other:?}, want {CSV_HEADER:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(HarnessError::Parse(format!(
                "line {}: {} fields, want 8",
                idx + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| HarnessError::Parse(format!("line {}: bad {what} {s:?}", idx + 2)))
        };
        rows.push(StatRow {
            model: fields[0]
                .parse::<Model>()
                .map_err(|e| HarnessError::Parse(format!("line {}: {e}", idx + 2)))?,
            n_nodes: fields[1]
                .parse()
                .map_err(|_| HarnessError::Parse(format!("line {}: bad n_nodes", idx + 2)))?,
            metric: fields[2]
                .parse::<Metric>()
                .map_err(|e| HarnessError::Parse(format!("line {}: {e}", idx + 2)))?,
            mean_us: parse_f(fields[3], "mean_us")?,
            median_us: parse_f(fields[4], "median_us")?,
            p95_us: parse_f(fields[5], "p95_us")?,
            stddev_us: parse_f(fields[6], "stddev_us")?,
            trials: fields[7]
                .parse()
                .map_err(|_| HarnessError::Parse(format!("line {}: bad trials", idx + 2)))?,
        });
    }
    Ok(rows)
}
