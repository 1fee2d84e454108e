//! Versioned CSV and JSON output.
//!
//! CSV: `# gkf-kit v1`, `# command=…`, one `# key=value` line per resolved
//! config entry, then summary lines `# summary key=value`, an optional
//! `# timestamp=…`, the column header and the rows. The JSON object carries
//! the same fields.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Map, Value};

pub const SCHEMA: &str = "gkf-kit v1";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(i64),
}

impl Cell {
    pub fn text(s: &str) -> Self {
        Cell::Text(s.to_string())
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Num(x) => format_num(*x),
            Cell::Int(i) => i.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Num(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Cell::Int(i) => json!(i),
        }
    }
}

/// Shortest round-trip representation; locale independent.
pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}

pub struct Report {
    command: String,
    config: BTreeMap<String, String>,
    summary: Vec<(String, Cell)>,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

fn flatten(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Array(a) => Some(a.iter().filter_map(flatten).collect::<Vec<_>>().join(" ")),
        Value::Object(_) => Some(v.to_string()),
    }
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            config: BTreeMap::new(),
            summary: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Records every serialized field of `args` as a resolved config entry.
    pub fn add_config<T: Serialize>(&mut self, args: &T) {
        if let Ok(Value::Object(map)) = serde_json::to_value(args) {
            for (k, v) in map {
                if let Some(s) = flatten(&v) {
                    self.config.insert(k.replace('_', "-"), s);
                }
            }
        }
    }

    pub fn set_config(&mut self, key: &str, value: &str) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn summary(&mut self, key: &str, value: Cell) {
        self.summary.push((key.to_string(), value));
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self, timestamp: bool) -> String {
        let mut out = format!("# {SCHEMA}\n# command={}\n", self.command);
        for (k, v) in &self.config {
            out.push_str(&format!("# {k}={v}\n"));
        }
        for (k, v) in &self.summary {
            out.push_str(&format!("# summary {k}={}\n", v.csv()));
        }
        if timestamp {
            out.push_str(&format!("# timestamp={}\n", unix_time()));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, timestamp: bool) -> String {
        let mut obj = Map::new();
        obj.insert("schema".into(), json!(SCHEMA));
        obj.insert("command".into(), json!(self.command));
        obj.insert("config".into(), json!(self.config));
        let summary: Map<String, Value> = self.summary.iter().map(|(k, v)| (k.clone(), v.json())).collect();
        obj.insert("summary".into(), Value::Object(summary));
        if timestamp {
            obj.insert("timestamp".into(), json!(unix_time()));
        }
        obj.insert("columns".into(), json!(self.columns));
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
        obj.insert("rows".into(), Value::Array(rows));
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("values are serializable");
        s.push('\n');
        s
    }
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
