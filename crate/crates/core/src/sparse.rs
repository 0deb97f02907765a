//! Minimal compressed-row matrix for assembly and mat-vecs, plus a reusable
//! sparse LU factorization.

use std::io::{self, Write};

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> TripletBuilder {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.entries.push((r, c, v));
    }

    /// Adds `scale · m` with its top-left corner at `(r0, c0)`.
    pub fn add_block(&mut self, r0: usize, c0: usize, m: &CsrMatrix, scale: f64) {
        if scale == 0.0 {
            return;
        }
        for (r, c, v) in m.iter() {
            self.push(r0 + r, c0 + c, scale * v);
        }
    }

    /// Adds `scale · mᵀ` with its top-left corner at `(r0, c0)`.
    pub fn add_block_transposed(&mut self, r0: usize, c0: usize, m: &CsrMatrix, scale: f64) {
        if scale == 0.0 {
            return;
        }
        for (r, c, v) in m.iter() {
            self.push(r0 + c, c0 + r, scale * v);
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> CsrMatrix {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> CsrMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.build()
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = self.indptr[r]..self.indptr[r + 1];
        match self.indices[row.clone()].binary_search(&c) {
            Ok(k) => self.data[row.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .map(|k| self.data[k] * x[self.indices[k]])
                    .sum()
            })
            .collect()
    }

    /// `y = selfᵀ x`
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, c, v) in self.iter() {
            y[c] += v * x[r];
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for (r, c, v) in self.iter() {
            b.push(c, r, v);
        }
        b.build()
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        CsrMatrix {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// Zeroes the listed rows and columns of a square matrix and puts 1 on
    /// their diagonal.
    pub fn eliminate(&self, dofs: &[usize]) -> CsrMatrix {
        assert_eq!(self.nrows, self.ncols);
        let mut mask = vec![false; self.nrows];
        for &d in dofs {
            mask[d] = true;
        }
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            if !mask[r] && !mask[c] {
                b.push(r, c, v);
            }
        }
        for &d in dofs {
            b.push(d, d, 1.0);
        }
        b.build()
    }

    pub fn write_matrix_market(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A sparse LU factorization with partial pivoting, reusable across
/// right-hand sides. The matrix is symmetrically equilibrated first
/// (`D A D` with `D = diag(1/√‖row‖∞)`), which keeps pivoting sane when
/// field blocks differ by many orders of magnitude.
pub struct LinearSolveHandle {
    lu: Lu<usize, f64>,
    scale: Vec<f64>,
    n: usize,
    block: &'static str,
}

impl std::fmt::Debug for LinearSolveHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolveHandle")
            .field("n", &self.n)
            .field("block", &self.block)
            .finish()
    }
}

impl LinearSolveHandle {
    pub fn factorize(a: &CsrMatrix, block: &'static str) -> Result<LinearSolveHandle> {
        if a.nrows != a.ncols {
            return Err(Error::SingularSystem {
                block,
                reason: format!("non-square matrix {}×{}", a.nrows, a.ncols),
            });
        }
        let mut row_max = vec![0.0f64; a.nrows];
        for (r, _, v) in a.iter() {
            row_max[r] = row_max[r].max(v.abs());
        }
        if let Some(r) = row_max.iter().position(|m| *m == 0.0 || !m.is_finite()) {
            return Err(Error::SingularSystem {
                block,
                reason: format!("row {r} is empty or non-finite"),
            });
        }
        let scale: Vec<f64> = row_max.iter().map(|m| 1.0 / m.sqrt()).collect();
        let triplets: Vec<Triplet<usize, usize, f64>> = a
            .iter()
            .map(|(r, c, v)| Triplet::new(r, c, scale[r] * v * scale[c]))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &triplets)
            .map_err(|e| Error::SingularSystem {
                block,
                reason: format!("{e:?}"),
            })?;
        let lu = mat.sp_lu().map_err(|e| Error::SingularSystem {
            block,
            reason: format!("{e:?}"),
        })?;
        Ok(LinearSolveHandle {
            lu,
            scale,
            n: a.nrows,
            block,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| self.scale[i] * b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        let x: Vec<f64> = (0..self.n).map(|i| self.scale[i] * rhs[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem {
                block: self.block,
                reason: "non-finite solution (zero pivot)".into(),
            });
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> CsrMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 4.0 + rng.gen::<f64>());
            if i + 1 < n {
                let v = rng.gen_range(-1.0..1.0);
                b.push(i, i + 1, v);
                b.push(i + 1, i, v);
            }
        }
        b.build()
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = TripletBuilder::new(2, 3);
        b.push(1, 2, 1.0);
        b.push(0, 0, 2.0);
        b.push(1, 2, 0.5);
        let m = b.build();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 2.0]), vec![2.0, 3.0]);
        assert_eq!(m.matvec_t(&[1.0, 2.0]), vec![2.0, 0.0, 3.0]);
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn lu_recovers_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_spd(60, &mut rng);
        let x: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = LinearSolveHandle::factorize(&a, "test").unwrap();
        let y = h.solve(&a.matvec(&x)).unwrap();
        let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-10 * norm2(&x));
        assert!(h.solve(&vec![0.0; 60]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lu_handles_indefinite_saddle() {
        // [[I, B^T], [B, 0]] with full-rank B
        let mut b = TripletBuilder::new(5, 5);
        for i in 0..3 {
            b.push(i, i, 1.0);
        }
        for (r, c, v) in [(3, 0, 1.0), (3, 1, 1.0), (4, 1, -1.0), (4, 2, 2.0)] {
            b.push(r, c, v);
            b.push(c, r, v);
        }
        let a = b.build();
        let x = [0.3, -1.0, 2.0, 0.5, -0.25];
        let h = LinearSolveHandle::factorize(&a, "saddle").unwrap();
        let y = h.solve(&a.matvec(&x)).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut b = TripletBuilder::new(3, 3);
        b.push(0, 0, 1.0);
        b.push(1, 1, 1.0);
        let a = b.build();
        let res = LinearSolveHandle::factorize(&a, "singular").and_then(|h| h.solve(&[1.0, 1.0, 1.0]));
        assert!(matches!(res, Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn elimination_keeps_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(10, &mut rng).eliminate(&[0, 4, 9]);
        assert_eq!(a.asymmetry(), 0.0);
        assert_eq!(a.get(4, 4), 1.0);
        assert_eq!(a.get(4, 5), 0.0);
        assert_eq!(a.get(3, 4), 0.0);
    }

    #[test]
    fn matrix_market_header() {
        let mut out = Vec::new();
        CsrMatrix::identity(2).write_matrix_market(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real general"));
        assert_eq!(lines.next(), Some("2 2 2"));
        assert_eq!(lines.next(), Some("1 1 1e0"));
    }
}
