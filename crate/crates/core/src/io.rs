//! CSV import and export of signals, matrices and curves.
//!
//! Files are UTF-8 with a header row and `.` decimals. Values are written in
//! shortest round-trip form so reading a file back gives the same bits.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::oracle::EigenSystem;

/// Renders named columns of equal length as CSV text.
pub fn table_to_csv(header: &[&str], columns: &[&[f64]]) -> Result<String> {
    if header.len() != columns.len() {
        return Err(Error::Argument(format!("{} headers for {} columns", header.len(), columns.len())));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if let Some(c) = columns.iter().find(|c| c.len() != rows) {
        return Err(Error::DimensionMismatch { expected: rows, found: c.len() });
    }
    let mut out = header.join(",");
    out.push('\n');
    for r in 0..rows {
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", c[r]).expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_table(path: impl AsRef<Path>, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    std::fs::write(path, table_to_csv(header, columns)?)?;
    Ok(())
}

/// Writes the columns of `m` under `labels`.
pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>, labels: &[String]) -> Result<()> {
    let cols: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().copied().collect()).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    let header: Vec<&str> = labels.iter().map(String::as_str).collect();
    write_table(path, &header, &refs)
}

/// Eigenvalues to `values`, `M`-orthonormal eigenvectors (one per column) to
/// `vectors`.
pub fn write_eigensystem(values: impl AsRef<Path>, vectors: impl AsRef<Path>, es: &EigenSystem) -> Result<()> {
    let idx: Vec<f64> = (0..es.n()).map(|i| i as f64).collect();
    write_table(values, &["index", "eigenvalue"], &[&idx, es.eigenvalues()])?;
    let labels: Vec<String> = (0..es.n()).map(|i| format!("x{i}")).collect();
    write_matrix(vectors, es.vectors(), &labels)
}

/// A CSV table: header names and numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }
}

/// Parses numeric CSV. A first line that does not parse as numbers is taken
/// as the header; blank lines and `#` comments are skipped.
pub fn parse_table(text: &str) -> Result<Table> {
    let mut header: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if !seen_data {
                    columns = vec![Vec::new(); vals.len()];
                    seen_data = true;
                }
                if vals.len() != columns.len() {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected {} fields, found {}", columns.len(), vals.len()),
                    });
                }
                columns.iter_mut().zip(vals).for_each(|(c, v)| c.push(v));
            }
            Err(_) if !seen_data && header.is_none() => {
                header = Some(fields.iter().map(|s| s.to_string()).collect());
            }
            Err(e) => return Err(Error::Parse { line: i + 1, message: e.to_string() }),
        }
    }
    if let Some(h) = &header {
        if seen_data && h.len() != columns.len() {
            return Err(Error::Parse {
                line: 1,
                message: format!("header has {} names for {} columns", h.len(), columns.len()),
            });
        }
        if !seen_data {
            columns = vec![Vec::new(); h.len()];
        }
    }
    let header = header.unwrap_or_else(|| (0..columns.len()).map(|i| format!("c{i}")).collect());
    Ok(Table { header, columns })
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    parse_table(&std::fs::read_to_string(path)?)
}

/// A per-node signal: the last column of a CSV file (so both `value` and
/// `node,value` layouts work).
pub fn read_signal(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let t = read_table(path)?;
    t.columns.last().cloned().ok_or_else(|| Error::Parse { line: 1, message: "signal file has no columns".into() })
}
