//! Compressed sparse row storage used by every assembled operator.
//!
//! Assembly goes through [`TripletBuilder`]; duplicate entries are summed and
//! column indices inside a row are kept sorted, so products and sums are
//! computed in a fixed order and give bit-identical results run to run.

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(
            row < self.nrows && col < self.ncols,
            "({row},{col}) out of bounds"
        );
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Adds `scale * block` with its (0,0) entry placed at (`row0`, `col0`).
    pub fn push_block(&mut self, row0: usize, col0: usize, block: &CsrMatrix, scale: f64) {
        for (i, j, v) in block.iter() {
            self.push(row0 + i, col0 + j, scale * v);
        }
    }

    /// Adds a dense block stored column-major as a faer matrix.
    pub fn push_dense(&mut self, row0: usize, col0: usize, block: &Mat<f64>, scale: f64) {
        for j in 0..block.ncols() {
            for i in 0..block.nrows() {
                self.push(row0 + i, col0 + j, scale * block[(i, j)]);
            }
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::new(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            b.push(i, i, v);
        }
        b.build()
    }

    /// Selection matrix picking `rows[k]` out of a vector of length `n`.
    pub fn selection(rows: &[usize], n: usize) -> Self {
        let mut b = TripletBuilder::new(rows.len(), n);
        for (k, &r) in rows.iter().enumerate() {
            b.push(k, r, 1.0);
        }
        b.build()
    }

    pub fn from_dense(m: &Mat<f64>) -> Self {
        let mut b = TripletBuilder::new(m.nrows(), m.ncols());
        b.push_dense(0, 0, m, 1.0);
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `y += scale * A x`
    pub fn matvec_acc(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += scale * s;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for (i, j, v) in self.iter() {
            b.push(j, i, v);
        }
        b.build()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `diag(d) * self`
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.nrows);
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.values[k] *= d[i];
            }
        }
        out
    }

    /// `self * diag(d)`
    pub fn scale_cols(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.ncols);
        let mut out = self.clone();
        for k in 0..out.values.len() {
            out.values[k] *= d[out.indices[k]];
        }
        out
    }

    /// `a * self + b * other`
    pub fn axpby(&self, a: f64, other: &CsrMatrix, b: f64) -> Self {
        assert_eq!(
            (self.nrows, self.ncols),
            (other.nrows, other.ncols),
            "axpby shape mismatch"
        );
        let mut t = TripletBuilder::new(self.nrows, self.ncols);
        t.push_block(0, 0, self, a);
        t.push_block(0, 0, other, b);
        t.build()
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        self.axpby(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &CsrMatrix) -> Self {
        self.axpby(1.0, other, -1.0)
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0f64; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                if acc[j] != 0.0 {
                    indices.push(j);
                    values.push(acc[j]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// `(A + Aᵀ) / 2`
    pub fn symmetric_part(&self) -> Self {
        self.axpby(0.5, &self.transpose(), 0.5)
    }

    /// Extracts the sub-block with the given row and column ranges.
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        let mut b = TripletBuilder::new(rows.len(), cols.len());
        for i in rows.clone() {
            for (j, v) in self.row(i) {
                if cols.contains(&j) {
                    b.push(i - rows.start, j - cols.start, v);
                }
            }
        }
        b.build()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trips: Vec<Triplet<usize, usize, f64>> =
            self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips)
            .map_err(|e| Error::Assembly(format!("sparse conversion failed: {e:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        let mut b = TripletBuilder::new(3, 3);
        b.push(0, 0, 2.0);
        b.push(0, 2, -1.0);
        b.push(1, 1, 3.0);
        b.push(2, 0, 4.0);
        b.push(2, 0, 1.0);
        b.build()
    }

    #[test]
    fn duplicates_are_summed() {
        let a = sample();
        assert_eq!(a.get(2, 0), 5.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = sample();
        let b = a.transpose();
        let c = a.matmul(&b).to_dense();
        let d = &a.to_dense() * &b.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((c[(i, j)] - d[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn symmetric_part_is_symmetric() {
        let s = sample().symmetric_part();
        for (i, j, v) in s.iter() {
            assert_eq!(v, s.get(j, i));
        }
    }

    #[test]
    fn block_extraction() {
        let a = sample();
        let b = a.block(1..3, 0..2);
        assert_eq!(b.get(1, 0), 5.0);
        assert_eq!(b.get(0, 1), 3.0);
    }
}
