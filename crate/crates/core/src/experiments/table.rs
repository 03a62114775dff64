//! Result tables and their CSV / aligned-text renderings.
//!
//! A CSV file starts with `# key: value` comment lines carrying the full
//! configuration and seeds, followed by a header row and the data rows.
//! Floats are written in Rust's shortest round-trip form, so parsing a file
//! back yields the same table.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) if x.is_infinite() => f.write_str(if *x > 0.0 { "inf" } else { "-inf" }),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl Value {
    fn parse(cell: &str) -> Value {
        if let Ok(i) = cell.parse::<i64>() {
            return Value::Int(i);
        }
        if let Ok(x) = cell.parse::<f64>() {
            return Value::Float(x);
        }
        Value::Text(cell.to_string())
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x as i64)
    }
}

impl From<u32> for Value {
    fn from(x: u32) -> Self {
        Value::Int(i64::from(x))
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Table,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "table" => Ok(Format::Table),
            other => Err(Error::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    /// Configuration and seeds, in insertion order.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        ResultTable {
            meta: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl fmt::Display) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::EmptyResults);
        }
        let mut buf = Vec::new();
        for (k, v) in &self.meta {
            writeln!(buf, "# {k}: {v}").expect("write to Vec");
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let csv_err = |e: csv::Error| Error::Parse(e.to_string());
            w.write_record(&self.columns).map_err(csv_err)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        }
        out.write_all(&buf).map_err(|source| Error::Io {
            path: "<output>".into(),
            source,
        })
    }

    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::EmptyResults);
        }
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| match v {
                        Value::Float(x) if x.is_finite() => format!("{x:.6}"),
                        other => other.to_string(),
                    })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|c| {
                cells
                    .iter()
                    .map(|r| r[c].len())
                    .chain(std::iter::once(self.columns[c].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut s = String::new();
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        let line = |s: &mut String, items: &[String]| {
            let parts: Vec<String> = items
                .iter()
                .zip(&widths)
                .map(|(x, w)| format!("{x:>w$}"))
                .collect();
            s.push_str(parts.join("  ").trim_end());
            s.push('\n');
        };
        line(&mut s, &self.columns);
        for r in &cells {
            line(&mut s, r);
        }
        out.write_all(s.as_bytes()).map_err(|source| Error::Io {
            path: "<output>".into(),
            source,
        })
    }

    pub fn render(&self, format: Format) -> Result<String> {
        let mut buf = Vec::new();
        match format {
            Format::Csv => self.write_csv(&mut buf)?,
            Format::Table => self.write_table(&mut buf)?,
        }
        Ok(String::from_utf8(buf).expect("tables are UTF-8"))
    }

    /// Writes the table to `path`, or to standard output when `path` is
    /// `None`.
    pub fn emit(&self, format: Format, path: Option<&Path>) -> Result<()> {
        let text = self.render(format)?;
        match path {
            Some(p) => fs::write(p, text).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            }),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                }),
        }
    }

    pub fn parse_csv(text: &str) -> Result<ResultTable> {
        let mut meta = Vec::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once(": ")
                    .ok_or_else(|| Error::Parse(format!("bad metadata line `{line}`")))?;
                meta.push((k.to_string(), v.to_string()));
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let columns = rdr
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .map(|r| {
                r.map(|rec| rec.iter().map(Value::parse).collect())
                    .map_err(|e| Error::Parse(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ResultTable {
            meta,
            columns,
            rows,
        })
    }

    pub fn read_csv(path: &Path) -> Result<ResultTable> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ResultTable::parse_csv(&text)
    }
}
