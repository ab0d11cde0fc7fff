//! Report tables and their csv / jsonl / pretty renderings.

use std::fmt::Write as _;

use censearch::numfmt::sig17;
use censearch::Scheme;

use crate::settings::Format;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Scheme(Scheme),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Record type written to every json line.
    pub record: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(record: &'static str, columns: &[&'static str]) -> Self {
        Table {
            record,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Jsonl => self.jsonl(),
            Format::Pretty => self.pretty(),
        }
    }

    fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(machine)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    fn jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            write!(out, "{{\"schema_version\":{SCHEMA_VERSION},\"record\":\"{}\"", self.record).unwrap();
            for (column, cell) in self.columns.iter().zip(row) {
                let value = match cell {
                    Cell::Int(v) => v.to_string(),
                    Cell::Float(v) if v.is_finite() => sig17(*v),
                    Cell::Float(_) => "null".into(),
                    Cell::Text(t) => serde_json::to_string(t).expect("string"),
                    Cell::Scheme(s) => serde_json::to_string(&s.to_string()).expect("string"),
                };
                write!(out, ",{}:{value}", serde_json::to_string(column).expect("string")).unwrap();
            }
            out.push_str("}\n");
        }
        out
    }

    fn pretty(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| match c {
                        Cell::Int(v) => v.to_string(),
                        Cell::Float(v) => format!("{v:.4}"),
                        Cell::Text(t) => t.clone(),
                        Cell::Scheme(s) => s.run_length(),
                    })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| {
                cells
                    .iter()
                    .map(|r| r[j].chars().count())
                    .chain(std::iter::once(self.columns[j].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, values: &[String]| {
            let padded: Vec<String> = values
                .iter()
                .zip(&widths)
                .map(|(v, &w)| format!("{v}{}", " ".repeat(w - v.chars().count())))
                .collect();
            out.push_str(padded.join("  ").trim_end());
            out.push('\n');
        };
        line(&mut out, &self.columns.iter().map(|c| c.to_string()).collect::<Vec<_>>());
        for row in &cells {
            line(&mut out, row);
        }
        out
    }
}

fn machine(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => sig17(*v),
        Cell::Text(t) => t.clone(),
        Cell::Scheme(s) => s.to_string(),
    }
}
