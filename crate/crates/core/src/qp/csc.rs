use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, colptr: vec![0; ncols + 1], rowval: Vec::new(), nzval: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowval: (0..n).collect(),
            nzval: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.nzval.len()
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// rows within each column come out sorted.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; ncols + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::Dimension(format!(
                    "triplet ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            entries[next[j]] = (i, v);
            next[j] += 1;
        }
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowval = Vec::with_capacity(triplets.len());
        let mut nzval = Vec::with_capacity(triplets.len());
        colptr.push(0);
        for j in 0..ncols {
            let col = &mut entries[counts[j]..counts[j + 1]];
            col.sort_by_key(|e| e.0);
            for &(i, v) in col.iter() {
                if rowval.len() > colptr[j] && *rowval.last().unwrap() == i {
                    *nzval.last_mut().unwrap() += v;
                } else {
                    rowval.push(i);
                    nzval.push(v);
                }
            }
            colptr.push(rowval.len());
        }
        Ok(Self { nrows, ncols, colptr, rowval, nzval })
    }

    /// Keeps every entry whose magnitude exceeds `drop_tol`.
    pub fn from_dense(m: &DMatrix<f64>, drop_tol: f64) -> Self {
        let (nrows, ncols) = m.shape();
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for j in 0..ncols {
            for i in 0..nrows {
                let v = m[(i, j)];
                if v.abs() > drop_tol {
                    rowval.push(i);
                    nzval.push(v);
                }
            }
            colptr.push(rowval.len());
        }
        Self { nrows, ncols, colptr, rowval, nzval }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                m[(self.rowval[p], j)] += self.nzval[p];
            }
        }
        m
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                out.push((self.rowval[p], j, self.nzval[p]));
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.rowval {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut rowval = vec![0; self.nnz()];
        let mut nzval = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowval[p];
                rowval[next[i]] = j;
                nzval[next[i]] = self.nzval[p];
                next[i] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, colptr: counts, rowval, nzval }
    }

    /// `y = self · x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowval[p]] += self.nzval[p] * xj;
            }
        }
    }

    /// `y = selfᵀ · x`.
    pub fn mul_transpose_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.colptr[j]..self.colptr[j + 1] {
                acc += self.nzval[p] * x[self.rowval[p]];
            }
            y[j] = acc;
        }
    }

    /// Scales to `diag(left) · self · diag(right)` in place.
    pub fn scale(&mut self, left: &[f64], right: &[f64]) {
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                self.nzval[p] *= left[self.rowval[p]] * right[j];
            }
        }
    }

    pub fn col_inf_norms(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| {
                self.nzval[self.colptr[j]..self.colptr[j + 1]].iter().fold(0.0f64, |a, v| a.max(v.abs()))
            })
            .collect()
    }

    pub fn row_inf_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.nrows];
        for (p, &i) in self.rowval.iter().enumerate() {
            out[i] = out[i].max(self.nzval[p].abs());
        }
        out
    }

    pub fn same_pattern(&self, other: &CscMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.colptr == other.colptr
            && self.rowval == other.rowval
    }

    /// Largest absolute asymmetry `|M_ij − M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut diff = 0.0f64;
        let mut dense_col = vec![0.0; self.nrows];
        let t = self.transpose();
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                dense_col[self.rowval[p]] += self.nzval[p];
            }
            for p in t.colptr[j]..t.colptr[j + 1] {
                dense_col[t.rowval[p]] -= t.nzval[p];
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                diff = diff.max(dense_col[self.rowval[p]].abs());
            }
            for p in t.colptr[j]..t.colptr[j + 1] {
                diff = diff.max(dense_col[t.rowval[p]].abs());
                dense_col[t.rowval[p]] = 0.0;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                dense_col[self.rowval[p]] = 0.0;
            }
        }
        diff
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = CscMatrix::from_triplets(3, 2, &[(2, 0, 1.0), (0, 0, 2.0), (2, 0, 3.0), (1, 1, -1.0)]).unwrap();
        assert_eq!(m.colptr, vec![0, 2, 3]);
        assert_eq!(m.rowval, vec![0, 2, 1]);
        assert_eq!(m.nzval, vec![2.0, 4.0, -1.0]);
        assert!(CscMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn products_match_dense() {
        let d = DMatrix::from_row_slice(3, 4, &[1.0, 0.0, 2.0, 0.0, 0.0, -3.0, 0.0, 4.0, 5.0, 0.0, 0.0, 6.0]);
        let m = CscMatrix::from_dense(&d, 0.0);
        let x = [1.0, 2.0, 3.0, 4.0];
        let mut y = [0.0; 3];
        m.mul_vec(&x, &mut y);
        let expect = &d * nalgebra::DVector::from_row_slice(&x);
        assert_eq!(y.to_vec(), expect.as_slice().to_vec());
        let mut z = [0.0; 4];
        m.mul_transpose_vec(&[1.0, -1.0, 2.0], &mut z);
        let expect = d.transpose() * nalgebra::DVector::from_row_slice(&[1.0, -1.0, 2.0]);
        assert_eq!(z.to_vec(), expect.as_slice().to_vec());
        assert_eq!(m.transpose().to_dense(), d.transpose());
    }

    #[test]
    fn asymmetry_detects_mismatch() {
        let s = CscMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]), 0.0);
        assert_eq!(s.asymmetry(), 0.0);
        let a = CscMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]), 0.0);
        assert_eq!(a.asymmetry(), 1.0);
    }
}
