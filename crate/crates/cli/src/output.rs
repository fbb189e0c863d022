use std::io::Write;

use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Empty when absent.
    Num(Option<f64>),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(Some(v)) => format!("{v:.11e}"),
            Cell::Num(None) => String::new(),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(Some(v)) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Num(None) => Value::Null,
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W, format: Format) -> std::io::Result<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv))?;
                }
                w.flush()
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> =
                            self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, &rows)?;
                writeln!(out)
            }
        }
    }
}
