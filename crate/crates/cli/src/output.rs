//! Tables and their CSV / JSON rendering.

use std::io::Write;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// A command's result: fixed columns, rows, and summary verdicts.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub verdicts: Value,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
            verdicts: Value::Object(Map::new()),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// `v` rounded to `digits` significant digits, in plain notation where
/// that stays short and scientific otherwise.
pub fn format_number(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let exp = v.abs().log10().floor() as i32;
    if (-4..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            let t = s.trim_end_matches('0').trim_end_matches('.');
            if t == "-0" { "0".into() } else { t.to_string() }
        } else {
            s
        }
    } else {
        format!("{:.*e}", digits - 1, v)
    }
}

fn cell_csv(c: &Cell, digits: usize) -> String {
    match c {
        Cell::Num(v) => format_number(*v, digits),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
        Cell::Bool(b) => b.to_string(),
        Cell::Empty => String::new(),
    }
}

fn cell_json(c: &Cell, digits: usize) -> Value {
    match c {
        Cell::Num(v) if v.is_finite() => {
            let rounded: f64 = format_number(*v, digits).parse().unwrap_or(*v);
            json!(rounded)
        }
        Cell::Num(_) | Cell::Empty => Value::Null,
        Cell::Int(i) => json!(i),
        Cell::Text(s) => json!(s),
        Cell::Bool(b) => json!(b),
    }
}

pub fn render_csv(table: &Table, config: &Value, digits: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config {config}\n"));
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|c| cell_csv(c, digits)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn render_json(table: &Table, header: &Value, config: &Value, digits: usize) -> String {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let mut m = Map::new();
            for (k, c) in table.columns.iter().zip(row) {
                m.insert((*k).to_string(), cell_json(c, digits));
            }
            Value::Object(m)
        })
        .collect();
    let doc = json!({
        "header": header,
        "config": config,
        "rows": rows,
        "verdicts": table.verdicts,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn emit(text: &str, out: Option<&std::path::Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}
