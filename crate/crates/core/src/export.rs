//! CSV and JSON log files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;
use crate::sim::{SimLog, COLUMNS};

pub const FORMAT_VERSION: &str = "1";

/// Decimal rendering with nine significant digits.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-6..15).contains(&mag) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding can carry into a new digit (9.9999999995 -> 10.00000000); that
    // only adds a trailing zero, which the trim below removes.
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub fn to_csv(log: &SimLog) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(COLUMNS)?;
        for row in &log.rows {
            w.write_record(row.values().iter().map(|v| format_sig9(*v)))?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).expect("writing to memory cannot fail");
    String::from_utf8(w.into_inner().expect("in-memory buffer")).expect("CSV output is UTF-8")
}

/// Header and numeric rows of a CSV log.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}

fn csv_error(e: csv::Error) -> Error {
    let location = e
        .position()
        .map_or_else(|| "csv".to_string(), |p| format!("line {}", p.line()));
    Error::Parse {
        location,
        message: e.to_string(),
    }
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    if text.trim().is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| Error::Parse {
                    location: format!("line {line}"),
                    message: format!("`{field}`: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { columns, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    pub scenario: String,
    pub config_hash: String,
    pub format_version: String,
    pub adaptive: bool,
    pub overrides: Vec<String>,
    pub config: serde_json::Value,
}

impl LogMeta {
    pub fn new(cfg: &ScenarioConfig, overrides: &[String]) -> Self {
        Self {
            scenario: cfg.name().to_string(),
            config_hash: cfg.config_hash(),
            format_version: FORMAT_VERSION.to_string(),
            adaptive: cfg.controller.adaptive,
            overrides: overrides.to_vec(),
            config: serde_json::to_value(cfg).expect("config serialises to JSON"),
        }
    }
}

pub fn to_json(log: &SimLog, meta: &LogMeta) -> String {
    let rows: Vec<serde_json::Value> = log
        .rows
        .iter()
        .map(|r| {
            let obj = COLUMNS
                .iter()
                .zip(r.values())
                .map(|(c, v)| (c.to_string(), serde_json::json!(v)))
                .collect::<serde_json::Map<_, _>>();
            serde_json::Value::Object(obj)
        })
        .collect();
    let doc = serde_json::json!({ "meta": meta, "rows": rows });
    let mut s = serde_json::to_string_pretty(&doc).expect("log serialises");
    let _ = writeln!(s);
    s
}
