//! Deterministic file output: fixed 12-significant-digit floats, fixed
//! column order, atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::Failure;

/// Significant digits used for every float written to disk.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats like C's `%.12g`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let p = SIGNIFICANT_DIGITS as i32;
    let sci = format!("{:.*e}", (p - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..p).contains(&exp) {
        trim_zeros(format!("{:.*}", (p - 1 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_owned()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

/// Rounds to the precision written to disk, so JSON numbers match CSV text.
pub fn round_sig(x: f64) -> f64 {
    fmt_float(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => json_float(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

pub fn json_float(v: f64) -> Value {
    serde_json::Number::from_f64(round_sig(v)).map_or(Value::Null, Value::Number)
}

pub fn json_opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, json_float)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Rows under a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.header.join(",");
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .header
                            .iter()
                            .cloned()
                            .zip(row.iter().map(Cell::json))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                render_json(&Value::Array(rows))
            }
        }
    }
}

pub fn render_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Output directory; every file is written through a temporary file and
/// renamed into place.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutDir { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.root)
            .map_err(|e| Failure::input(format!("cannot create {}: {e}", self.root.display())))?;
        let target = self.path(name);
        write_atomic(&self.root, &target, contents.as_bytes())
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", target.display())))?;
        Ok(target)
    }

    pub fn write_table(
        &self,
        stem: &str,
        table: &Table,
        format: Format,
    ) -> Result<PathBuf, Failure> {
        self.write(
            &format!("{stem}.{}", format.extension()),
            &table.render(format),
        )
    }
}

fn write_atomic(dir: &Path, target: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(target).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(0.5), "0.5");
        assert_eq!(fmt_float(1.75), "1.75");
        assert_eq!(fmt_float(7.0 / 52f64.sqrt()), "0.970725343394");
        assert_eq!(fmt_float(-0.027), "-0.027");
        assert_eq!(fmt_float(1.448e13), "1.448e+13");
        assert_eq!(fmt_float(8.1e9), "8100000000");
        assert_eq!(fmt_float(123456789012.4), "123456789012");
        assert_eq!(fmt_float(1e-7), "1e-07");
        assert_eq!(fmt_float(0.0001), "0.0001");
        assert_eq!(fmt_float(9.9999999999995), "10");
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
    }

    #[test]
    fn table_rendering() {
        let mut t = Table::new(["year", "ccc", "note"]);
        t.push(vec![1990.into(), 0.25.into(), Cell::Missing]);
        assert_eq!(t.render(Format::Csv), "year,ccc,note\n1990,0.25,\n");
        let json: Value = serde_json::from_str(&t.render(Format::Json)).unwrap();
        assert_eq!(json[0]["year"], 1990);
        assert_eq!(json[0]["ccc"], 0.25);
        assert!(json[0]["note"].is_null());
        let keys: Vec<&String> = json[0].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["year", "ccc", "note"]);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::new(dir.path().join("nested"));
        out.write("a.txt", "one").unwrap();
        out.write("a.txt", "two").unwrap();
        assert_eq!(fs::read_to_string(out.path("a.txt")).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path().join("nested")).unwrap().count(), 1);
    }
}
