//! Plain-text QP dump.
//!
//! ```text
//! qp <n> <m>
//! P <nnz>
//! <row> <col> <value>      (nnz lines, zero-based)
//! q
//! <value>                  (n lines)
//! A <nnz>
//! <row> <col> <value>
//! l
//! <value>                  (m lines, `inf` / `-inf` allowed)
//! u
//! <value>
//! ```
//!
//! Values are written in shortest round-trip exponent form, so load(dump(qp)) is exact.

use std::fmt::Write as _;

use super::csc::CscMatrix;
use super::QuadraticProgram;
use crate::error::{Error, Result};

pub fn dump(qp: &QuadraticProgram) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "qp {} {}", qp.n(), qp.m());
    let matrix = |s: &mut String, tag: &str, mat: &CscMatrix| {
        let _ = writeln!(s, "{tag} {}", mat.nnz());
        for (i, j, v) in mat.triplets() {
            let _ = writeln!(s, "{i} {j} {v:e}");
        }
    };
    let vector = |s: &mut String, tag: &str, v: &[f64]| {
        let _ = writeln!(s, "{tag}");
        for x in v {
            let _ = writeln!(s, "{x:e}");
        }
    };
    matrix(&mut s, "P", &qp.p);
    vector(&mut s, "q", &qp.q);
    matrix(&mut s, "A", &qp.a);
    vector(&mut s, "l", &qp.l);
    vector(&mut s, "u", &qp.u);
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (no, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok((no + 1, line.split_whitespace().collect()));
        }
        Err(Error::Config("unexpected end of QP dump".into()))
    }

    fn header(&mut self, tag: &str, args: usize) -> Result<Vec<usize>> {
        let (no, f) = self.next_fields()?;
        if f.first() != Some(&tag) || f.len() != args + 1 {
            return Err(Error::Config(format!("line {no}: expected `{tag}` header")));
        }
        f[1..].iter().map(|v| parse_usize(v, no)).collect()
    }

    fn matrix(&mut self, tag: &str, nrows: usize, ncols: usize) -> Result<CscMatrix> {
        let nnz = self.header(tag, 1)?[0];
        let mut t = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let (no, f) = self.next_fields()?;
            if f.len() != 3 {
                return Err(Error::Config(format!("line {no}: expected `row col value`")));
            }
            t.push((parse_usize(f[0], no)?, parse_usize(f[1], no)?, parse_f64(f[2], no)?));
        }
        CscMatrix::from_triplets(nrows, ncols, &t)
    }

    fn vector(&mut self, tag: &str, len: usize) -> Result<Vec<f64>> {
        self.header(tag, 0)?;
        (0..len)
            .map(|_| {
                let (no, f) = self.next_fields()?;
                parse_f64(f[0], no)
            })
            .collect()
    }
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::Config(format!("line {line}: `{s}` is not an index")))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Config(format!("line {line}: `{s}` is not a number")))
}

pub fn load(text: &str) -> Result<QuadraticProgram> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let dims = lines.header("qp", 2)?;
    let (n, m) = (dims[0], dims[1]);
    let p = lines.matrix("P", n, n)?;
    let q = lines.vector("q", n)?;
    let a = lines.matrix("A", m, n)?;
    let l = lines.vector("l", m)?;
    let u = lines.vector("u", m)?;
    let qp = QuadraticProgram { p, q, a, l, u };
    qp.validate()?;
    Ok(qp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn round_trip_is_exact() {
        let qp = QuadraticProgram {
            p: CscMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[4.0, 0.1, 0.1, 1e-300]), 0.0),
            q: vec![1.0 / 3.0, -2.5],
            a: CscMatrix::from_dense(&DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]), 0.0),
            l: vec![f64::NEG_INFINITY, -1.0, 0.2],
            u: vec![1.0, f64::INFINITY, 0.2],
        };
        let back = load(&dump(&qp)).unwrap();
        assert_eq!(back, qp);
    }

    #[test]
    fn truncated_input_is_an_error() {
        assert!(load("qp 1 0\nP 1\n0 0 1\nq\n").is_err());
        assert!(load("qp 1 0\nP 1\n0 3 1\nq\n0\nA 0\nl\nu\n").is_err());
    }
}
