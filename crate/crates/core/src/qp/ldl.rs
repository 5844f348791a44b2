//! Sparse LDLᵀ factorization of quasi-definite matrices.
//!
//! The symbolic phase (fill-reducing ordering, elimination tree, column counts)
//! depends only on the sparsity pattern and is kept in [`LdlSymbolic`] so that
//! repeated factorizations with new values skip it. The numeric phase is the
//! up-looking elimination of the QDLDL family; it needs no pivoting because a
//! quasi-definite matrix is strongly factorizable under any symmetric permutation.

use super::csc::CscMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Minimum-degree ordering of the symmetric pattern given by the upper triangle
/// `upper`. Ties break on the lowest index, so the ordering is deterministic.
pub fn minimum_degree(upper: &CscMatrix) -> Vec<usize> {
    let n = upper.ncols;
    let words = n.div_ceil(64).max(1);
    let mut adj = vec![0u64; n * words];
    let set = |adj: &mut [u64], i: usize, j: usize| adj[i * words + j / 64] |= 1 << (j % 64);
    for j in 0..n {
        for p in upper.colptr[j]..upper.colptr[j + 1] {
            let i = upper.rowval[p];
            if i != j {
                set(&mut adj, i, j);
                set(&mut adj, j, i);
            }
        }
    }
    let popcount = |adj: &[u64], i: usize| -> usize {
        adj[i * words..(i + 1) * words].iter().map(|w| w.count_ones() as usize).sum()
    };
    let mut degree: Vec<usize> = (0..n).map(|i| popcount(&adj, i)).collect();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut neighbours = Vec::new();
    let mut row_v = vec![0u64; words];

    for _ in 0..n {
        let v = (0..n).filter(|&i| alive[i]).min_by_key(|&i| (degree[i], i)).unwrap();
        alive[v] = false;
        order.push(v);
        row_v.copy_from_slice(&adj[v * words..(v + 1) * words]);
        neighbours.clear();
        for (w, &bits) in row_v.iter().enumerate() {
            let mut b = bits;
            while b != 0 {
                let t = b.trailing_zeros() as usize;
                neighbours.push(w * 64 + t);
                b &= b - 1;
            }
        }
        // eliminating v turns its neighbourhood into a clique
        for &u in &neighbours {
            let base = u * words;
            for w in 0..words {
                adj[base + w] |= row_v[w];
            }
            adj[base + u / 64] &= !(1 << (u % 64));
            adj[base + v / 64] &= !(1 << (v % 64));
            degree[u] = popcount(&adj, u);
        }
    }
    order
}

/// Pattern-dependent part of the factorization.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    /// `perm[k]` is the original index eliminated at step `k`.
    pub perm: Vec<usize>,
    pub iperm: Vec<usize>,
    /// Upper triangle of the permuted matrix (values are refilled per factorization).
    permuted: CscMatrix,
    /// Position in `permuted.nzval` of each entry of the original upper triangle.
    map: Vec<usize>,
    etree: Vec<usize>,
    lnz: Vec<usize>,
    /// The original pattern, for cache checks.
    pattern: CscMatrix,
}

impl LdlSymbolic {
    /// Analyse the upper triangle `upper` (diagonal included).
    pub fn analyse(upper: &CscMatrix) -> Result<Self> {
        let n = upper.ncols;
        if upper.nrows != n {
            return Err(Error::Dimension("LDL factorization needs a square matrix".into()));
        }
        let perm = minimum_degree(upper);
        let mut iperm = vec![0; n];
        for (k, &i) in perm.iter().enumerate() {
            iperm[i] = k;
        }
        let mut triplets = Vec::with_capacity(upper.nnz());
        for (idx, (i, j, _)) in upper.triplets().into_iter().enumerate() {
            if i > j {
                return Err(Error::Dimension("LDL input must be upper triangular".into()));
            }
            let (pi, pj) = (iperm[i], iperm[j]);
            triplets.push((pi.min(pj), pi.max(pj), idx as f64));
        }
        let permuted = CscMatrix::from_triplets(n, n, &triplets)?;
        let mut map = vec![0; upper.nnz()];
        for (pos, &tag) in permuted.nzval.iter().enumerate() {
            map[tag as usize] = pos;
        }
        let (etree, lnz) = elimination_tree(&permuted);
        let mut pattern = upper.clone();
        pattern.nzval.clear();
        Ok(Self { perm, iperm, permuted, map, etree, lnz, pattern })
    }

    pub fn matches(&self, upper: &CscMatrix) -> bool {
        self.pattern.nrows == upper.nrows
            && self.pattern.colptr == upper.colptr
            && self.pattern.rowval == upper.rowval
    }

    pub fn factor_nnz(&self) -> usize {
        self.lnz.iter().sum()
    }

    /// Numeric factorization of a matrix with the analysed pattern.
    pub fn factor(&mut self, upper: &CscMatrix) -> Result<LdlFactor> {
        debug_assert!(self.matches(upper));
        for (idx, &v) in upper.nzval.iter().enumerate() {
            self.permuted.nzval[self.map[idx]] = v;
        }
        numeric(&self.permuted, &self.etree, &self.lnz, &self.perm)
    }
}

fn elimination_tree(a: &CscMatrix) -> (Vec<usize>, Vec<usize>) {
    let n = a.ncols;
    let mut work = vec![NONE; n];
    let mut lnz = vec![0; n];
    let mut etree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for p in a.colptr[j]..a.colptr[j + 1] {
            let mut i = a.rowval[p];
            while work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    (etree, lnz)
}

/// `P·K·Pᵀ = L·D·Lᵀ` with unit lower-triangular `L` stored by columns.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    perm: Vec<usize>,
    work: Vec<f64>,
}

fn numeric(a: &CscMatrix, etree: &[usize], lnz: &[usize], perm: &[usize]) -> Result<LdlFactor> {
    let n = a.ncols;
    let mut lp = vec![0; n + 1];
    for i in 0..n {
        lp[i + 1] = lp[i] + lnz[i];
    }
    let total = lp[n];
    let mut li = vec![0; total];
    let mut lx = vec![0.0; total];
    let mut d = vec![0.0; n];
    let mut dinv = vec![0.0; n];
    let mut y_vals = vec![0.0; n];
    let mut y_used = vec![false; n];
    let mut y_idx = Vec::with_capacity(n);
    let mut elim = Vec::with_capacity(n);
    let mut next_space: Vec<usize> = lp[..n].to_vec();

    for k in 0..n {
        y_idx.clear();
        d[k] = 0.0;
        for p in a.colptr[k]..a.colptr[k + 1] {
            let bidx = a.rowval[p];
            if bidx == k {
                d[k] = a.nzval[p];
                continue;
            }
            y_vals[bidx] = a.nzval[p];
            if !y_used[bidx] {
                y_used[bidx] = true;
                elim.clear();
                elim.push(bidx);
                let mut next = etree[bidx];
                while next != NONE && next < k {
                    if y_used[next] {
                        break;
                    }
                    y_used[next] = true;
                    elim.push(next);
                    next = etree[next];
                }
                while let Some(e) = elim.pop() {
                    y_idx.push(e);
                }
            }
        }
        for &c in y_idx.iter().rev() {
            let yc = y_vals[c];
            let end = next_space[c];
            for j in lp[c]..end {
                y_vals[li[j]] -= lx[j] * yc;
            }
            li[end] = k;
            lx[end] = yc * dinv[c];
            d[k] -= yc * lx[end];
            next_space[c] += 1;
            y_vals[c] = 0.0;
            y_used[c] = false;
        }
        if d[k] == 0.0 || !d[k].is_finite() {
            return Err(Error::Model(format!("LDL factorization hit a zero pivot at step {k}")));
        }
        dinv[k] = 1.0 / d[k];
    }
    Ok(LdlFactor { lp, li, lx, d, dinv, perm: perm.to_vec(), work: vec![0.0; n] })
}

impl LdlFactor {
    /// Solves `K·x = b` in place.
    pub fn solve(&mut self, b: &mut [f64]) {
        let n = self.d.len();
        for k in 0..n {
            self.work[k] = b[self.perm[k]];
        }
        let x = &mut self.work;
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                xi -= self.lx[j] * x[self.li[j]];
            }
            x[i] = xi;
        }
        for k in 0..n {
            b[self.perm[k]] = self.work[k];
        }
    }

    /// Number of positive entries of `D` (the inertia's positive part).
    pub fn positive_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v > 0.0).count()
    }
}
