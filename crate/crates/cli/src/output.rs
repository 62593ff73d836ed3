//! Row assembly and the CSV/JSON sinks. Rows are ordered key–value lists so
//! column order is fixed per experiment; values print identically run to run
//! (the only varying output field is `meta.runtime_ms` in JSON).

use crate::config::{Format, ResolvedConfig};
use residue_core::Rational;
use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub enum Cell {
    UInt(u64),
    Float(f64),
    Str(String),
    /// Exact rational, serialized losslessly as "num/den".
    Exact(String),
    Bool(bool),
}

impl Cell {
    pub fn exact(r: &Rational) -> Cell {
        Cell::Exact(format!("{}/{}", r.numer(), r.denom()))
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::UInt(v) => json!(v),
            Cell::Float(v) => json!(v),
            Cell::Str(v) => json!(v),
            Cell::Exact(v) => json!(v),
            Cell::Bool(v) => json!(v),
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::UInt(v) => v.to_string(),
            Cell::Float(v) => {
                // Shortest roundtrip form, same as the JSON encoding.
                serde_json::to_string(v).unwrap_or_else(|_| v.to_string())
            }
            Cell::Str(v) | Cell::Exact(v) => v.clone(),
            Cell::Bool(v) => v.to_string(),
        }
    }
}

/// One result row: ordered fields, uniform shape within an experiment.
#[derive(Debug, Clone, Default)]
pub struct Row {
    fields: Vec<(&'static str, Cell)>,
}

impl Row {
    pub fn new() -> Self {
        Row { fields: Vec::new() }
    }

    pub fn push(mut self, key: &'static str, value: Cell) -> Self {
        self.fields.push((key, value));
        self
    }

    pub fn keys(&self) -> Vec<&'static str> {
        self.fields.iter().map(|(k, _)| *k).collect()
    }

    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        for (k, v) in &self.fields {
            map.insert((*k).to_string(), v.to_json());
        }
        Value::Object(map)
    }

    pub fn to_csv_record(&self) -> Vec<String> {
        self.fields.iter().map(|(_, v)| v.to_csv()).collect()
    }
}

/// Serializes rows plus resolved config to the requested sink.
pub fn write_output(
    cfg: &ResolvedConfig,
    rows: &[Row],
    runtime_ms: u128,
    sink: &mut dyn Write,
) -> std::io::Result<()> {
    match cfg.format {
        Format::Json => {
            let doc = json!({
                "experiment": cfg.experiment,
                "config": serde_json::to_value(cfg).expect("config serializes"),
                "rows": rows.iter().map(Row::to_json).collect::<Vec<_>>(),
                "meta": {
                    "version": env!("CARGO_PKG_VERSION"),
                    "runtime_ms": runtime_ms as u64,
                },
            });
            writeln!(sink, "{}", serde_json::to_string_pretty(&doc)?)
        }
        Format::Csv => {
            let cfg_line = serde_json::to_string(cfg).expect("config serializes");
            writeln!(sink, "# experiment: {}", cfg.experiment)?;
            writeln!(sink, "# config: {cfg_line}")?;
            let mut w = csv::Writer::from_writer(sink);
            if let Some(first) = rows.first() {
                w.write_record(first.keys())?;
                for row in rows {
                    w.write_record(row.to_csv_record())?;
                }
            }
            w.flush()
        }
    }
}

pub fn write_to_destination(
    cfg: &ResolvedConfig,
    rows: &[Row],
    runtime_ms: u128,
) -> std::io::Result<()> {
    match &cfg.out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            write_output(cfg, rows, runtime_ms, &mut f)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_output(cfg, rows, runtime_ms, &mut lock)
        }
    }
}

/// Writes an arbitrary JSON document (the pin manifest path).
pub fn write_json_document(path: Option<&Path>, doc: &Value) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n"),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
