//! Plain-text dense matrix dumps.
//!
//! Each matrix is a header line `# <name> <rows> <cols>` followed by one line
//! per row of space-separated values in shortest round-trip form.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn write_dense(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "# {name} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// Parses every matrix in a dump, in order.
pub fn parse_dense(text: &str) -> Result<Vec<(String, DMatrix<f64>)>> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    while let Some((no, line)) = lines.next() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Config(format!("line {}: expected `# name rows cols`", no + 1));
        if fields.len() != 4 || fields[0] != "#" {
            return Err(bad());
        }
        let rows: usize = fields[2].parse().map_err(|_| bad())?;
        let cols: usize = fields[3].parse().map_err(|_| bad())?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::Config(format!("matrix `{}` is truncated", fields[1])))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| Error::Config(format!("line {}: bad number `{v}`", no + 1))))
                .collect::<Result<_>>()?;
            if vals.len() != cols {
                return Err(Error::Config(format!("line {}: expected {cols} values", no + 1)));
            }
            data.extend(vals);
        }
        out.push((fields[1].to_string(), DMatrix::from_row_slice(rows, cols, &data)));
    }
    Ok(out)
}
