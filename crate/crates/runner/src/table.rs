//! CSV artifacts: `#` metadata lines, a header and rows of cells, with
//! floats in shortest round-trip notation.

use std::fs;
use std::path::Path;

use crate::error::{Result, RunError};

/// Shortest decimal string that parses back to exactly `v`.
///
/// Magnitudes in `[1e-5, 1e16)` use positional notation, everything else
/// scientific (`1e-7`, `2.5e20`). Integral values carry no fraction: `4`.
pub fn format_f64(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
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

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// `(key, value)` pairs written as `# key: value` before the header.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    /// Unit per column; an empty string means dimensionless.
    pub units: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Table {
            meta: Vec::new(),
            columns: columns.iter().map(|(c, _)| c.to_string()).collect(),
            units: columns.iter().map(|(_, u)| u.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (k, v) in &self.meta {
            out.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        let units: Vec<String> = self
            .columns
            .iter()
            .zip(&self.units)
            .map(|(c, u)| format!("{c}={}", if u.is_empty() { "1" } else { u }))
            .collect();
        out.extend_from_slice(format!("# units: {}\n", units.join(" ")).as_bytes());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Writes the table and returns the bytes written.
    pub fn write(&self, path: &Path) -> Result<Vec<u8>> {
        let bytes = self.to_bytes();
        fs::write(path, &bytes).map_err(|e| RunError::io(path, e))?;
        Ok(bytes)
    }
}

/// Parsed form of a written table: metadata, header and raw string rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReadTable {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut meta = Vec::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once(": ").ok_or_else(|| format!("bad metadata line '{line}'"))?;
                meta.push((k.to_string(), v.to_string()));
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(ReadTable { meta, columns, rows })
    }

    pub fn read(path: &Path) -> std::result::Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column; empty cells become `None`.
    pub fn floats(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| if r[c].is_empty() { Some(None) } else { r[c].parse().ok().map(Some) })
            .collect()
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_values_drop_the_fraction() {
        assert_eq!(format_f64(4.0), "4");
        assert_eq!(format_f64(-2.0), "-2");
        assert_eq!(format_f64(0.0), "0");
    }

    #[test]
    fn third_round_trips() {
        let s = format_f64(1.0 / 3.0);
        assert_eq!(s, "0.3333333333333333");
        assert_eq!(s.parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn extremes_use_exponents() {
        assert_eq!(format_f64(1e-7), "1e-7");
        assert_eq!(format_f64(2.5e20), "2.5e20");
        assert_eq!(format_f64(f64::MIN_POSITIVE).parse::<f64>().unwrap(), f64::MIN_POSITIVE);
    }

    #[test]
    fn write_is_repeatable() {
        let mut t = Table::new(&[("t", "time"), ("v", ""), ("label", "")]).meta("config_sha256", "ab");
        t.push(vec![0.5.into(), None.into(), "x".into()]);
        t.push(vec![1.0.into(), Some(0.1).into(), "y,z".into()]);
        let a = t.to_bytes();
        assert_eq!(a, t.clone().to_bytes());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# config_sha256: ab\n# units: t=time v=1 label=1\nt,v,label\n0.5,,x\n"));
        let back = ReadTable::parse(&text).unwrap();
        assert_eq!(back.rows[1][2], "y,z");
        assert_eq!(back.floats("v").unwrap(), vec![None, Some(0.1)]);
    }
}
