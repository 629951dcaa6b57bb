//! Record output shared by all subcommands.

use classplan::Result;
use serde_json::{Map, Value};
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    /// A real printed with full round-trip precision regardless of `--precision`.
    Exact(f64),
    Text(String),
    Flag(bool),
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
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

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl Cell {
    fn text(&self, precision: usize) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.precision$}"),
            Cell::Exact(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
        }
    }

    fn json(&self, precision: usize) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Real(v) => {
                let rounded: f64 = format!("{v:.precision$}").parse().unwrap_or(*v);
                Value::from(rounded)
            }
            Cell::Exact(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Flag(b) => Value::from(*b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self::with_headers(headers.iter().map(|h| h.to_string()).collect())
    }

    pub fn with_headers(headers: Vec<String>) -> Self {
        Self { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, writer: W, precision: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.text(precision)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut writer: W, precision: usize) -> Result<()> {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    self.headers.iter().zip(row).map(|(h, c)| (h.clone(), c.json(precision))).collect();
                Value::Object(obj)
            })
            .collect();
        serde_json::to_writer_pretty(&mut writer, &records)?;
        writeln!(writer)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_both_formats() {
        let mut t = Table::new(&["n", "width"]);
        t.push(vec![141u64.into(), 0.09876543.into()]);
        let mut csv = Vec::new();
        t.write_csv(&mut csv, 4).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "n,width\n141,0.0988\n");
        let mut json = Vec::new();
        t.write_json(&mut json, 4).unwrap();
        let v: Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v[0]["width"], 0.0988);
        assert_eq!(v[0]["n"], 141);
    }
}
