//! MatrixMarket coordinate format (`real general`).
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every stored value bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::CsrMatrix;
use crate::error::{Error, Result};

pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut out: W) -> Result<()> {
    let mut buf = String::new();
    writeln!(buf, "%%MatrixMarket matrix coordinate real general").unwrap();
    writeln!(buf, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz()).unwrap();
    for r in 0..a.n_rows() {
        for (c, v) in a.row(r) {
            writeln!(buf, "{} {} {}", r + 1, c + 1, v).unwrap();
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

/// Reads `coordinate real general` or `coordinate real symmetric` files.
pub fn read_matrix_market<R: BufRead>(input: R) -> Result<CsrMatrix> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let header = header?.to_ascii_lowercase();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(Error::UnsupportedFormat(format!("MatrixMarket header not recognised: {header}")));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(Error::UnsupportedFormat(format!("field type {}", fields[3])));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::UnsupportedFormat(format!("symmetry {other}"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let tok: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if tok.len() != 3 {
                    return Err(parse_err("expected 'rows cols nnz'".into()));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| parse_err(e.to_string()));
                size = Some((p(tok[0])?, p(tok[1])?, p(tok[2])?));
            }
            Some((rows, cols, _)) => {
                if tok.len() != 3 {
                    return Err(parse_err("expected 'row col value'".into()));
                }
                let r: usize = tok[0].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?;
                let c: usize = tok[1].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?;
                let v: f64 = tok[2].parse().map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?;
                if r == 0 || c == 0 || r > rows || c > cols {
                    return Err(parse_err(format!("index ({r}, {c}) out of range")));
                }
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| Error::Parse { line: 0, message: "missing size line".into() })?;
    let expected = if symmetric { None } else { Some(nnz) };
    if let Some(nnz) = expected {
        if triplets.len() != nnz {
            return Err(Error::Validation(format!("declared {nnz} entries, found {}", triplets.len())));
        }
    }
    CsrMatrix::from_triplets(rows, cols, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_storage_is_expanded() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 2.0\n2 1 -1.0\n";
        let a = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn bad_entry_reports_line() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 2.0\n";
        assert!(matches!(read_matrix_market(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(entries in proptest::collection::vec((0usize..6, 0usize..5, any::<f64>().prop_filter("finite", |v| v.is_finite())), 0..25)) {
            // Deduplicate positions so the matrix stores exactly these values.
            let mut seen = std::collections::HashSet::new();
            let entries: Vec<_> = entries.into_iter().filter(|&(r, c, _)| seen.insert((r, c))).collect();
            let a = CsrMatrix::from_triplets(6, 5, &entries).unwrap();
            let mut buf = Vec::new();
            write_matrix_market(&a, &mut buf).unwrap();
            let b = read_matrix_market(buf.as_slice()).unwrap();
            prop_assert_eq!(a.row_ptr(), b.row_ptr());
            prop_assert_eq!(a.col_idx(), b.col_idx());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
