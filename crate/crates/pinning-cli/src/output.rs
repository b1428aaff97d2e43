//! CSV and JSON emitters. CSV uses '.' decimals, '\n' line endings and 17
//! significant digits so doubles round-trip exactly; every output starts
//! with comment lines echoing the fully resolved configuration.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    F64(f64),
    Empty,
}

/// 17 significant digits; round-trips any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F64(x) => fmt_f64(*x),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F64(x) => json!(x),
            Cell::Empty => Value::Null,
        }
    }
}

pub struct Table {
    pub command: &'static str,
    pub config: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn write(&self, format: Format, out: Option<&Path>) -> Result<(), CliError> {
        let rendered = match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        };
        write_output(out, &rendered)
    }

    fn render_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# pinning {}\n", self.command));
        for (k, v) in &self.config {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    fn render_json(&self) -> String {
        let config: Map<String, Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row.iter())
                    .map(|(c, cell)| (c.to_string(), cell.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let doc = json!({ "command": self.command, "config": config, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("json rendering");
        s.push('\n');
        s
    }
}

pub fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())
                .map_err(|e| CliError::input(format!("cannot write to stdout: {e}")))
        }
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display()))),
    }
}
