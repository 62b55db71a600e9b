//! Compressed sparse row storage and a direct LU solver.
//!
//! Assembly collects `(row, col, value)` triplets; [`SparseMatrix::from_triplets`]
//! sorts them stably and sums duplicates, so the summation order of every
//! entry is the push order. Explicit zeros are kept so that matrices
//! assembled from the same element loop share one sparsity pattern.

use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::*;
use faer::Mat;

use crate::{Error, Result};

/// Growable list of matrix contributions.
#[derive(Debug, Clone)]
pub struct TripletList {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletList {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn extend(&mut self, other: TripletList) {
        self.entries.extend(other.entries);
    }

    /// Copies every entry of `m`, scaled and shifted by the given offsets.
    pub fn add_block(&mut self, m: &SparseMatrix, row0: usize, col0: usize, scale: f64) {
        for i in 0..m.nrows {
            for (j, v) in m.row(i) {
                self.push(row0 + i, col0 + j, scale * v);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_matrix(self) -> SparseMatrix {
        SparseMatrix::from_triplets(self)
    }
}

/// Real sparse matrix in CSR format.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(list: TripletList) -> Self {
        let TripletList {
            nrows,
            ncols,
            mut entries,
        } = list;
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = TripletList::with_capacity(n, n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        t.into_matrix()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[a..b].binary_search(&j) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = TripletList::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.into_matrix()
    }

    /// `self * other`.
    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut t = TripletList::new(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    t.push(i, j, a * b);
                }
            }
        }
        t.into_matrix()
    }

    /// `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = TripletList::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        t.add_block(self, 0, 0, alpha);
        t.add_block(other, 0, 0, beta);
        t.into_matrix()
    }

    /// `max |M - Mᵀ|` over all entries.
    pub fn max_asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.axpby(1.0, &t, -1.0)
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::SingularFactorization(format!("{e:?}")))
    }
}

/// Numerical rank of a dense matrix by singular values, with relative
/// tolerance `rel_tol` against the largest singular value.
pub fn dense_rank(rows: &[Vec<f64>], rel_tol: f64) -> usize {
    let s = singular_values(rows);
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Singular values in decreasing order.
pub fn singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let a = Mat::<f64>::from_fn(m, n, |i, j| rows[i][j]);
    let s = a
        .singular_values()
        .expect("dense SVD failed to converge");
    let mut s: Vec<f64> = s.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Solve a small dense system with full pivoting.
pub fn dense_solve(rows: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let n = rows.len();
    let a = Mat::<f64>::from_fn(n, n, |i, j| rows[i][j]);
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = a.full_piv_lu().solve(&b);
    (0..n).map(|i| x[(i, 0)]).collect()
}

/// Sparse LU factorization with partial pivoting.
pub struct LuSolver {
    matrix: SparseMatrix,
    symbolic: SymbolicLu<usize>,
    lu: Lu<usize, f64>,
}

impl LuSolver {
    pub fn new(matrix: SparseMatrix) -> Result<Self> {
        let symbolic = SymbolicLu::try_new(matrix.to_faer()?.symbolic())
            .map_err(|e| Error::SingularFactorization(format!("{e:?}")))?;
        Self::with_symbolic(matrix, symbolic)
    }

    /// Reuses an existing symbolic analysis; the pattern must match.
    pub fn with_symbolic(matrix: SparseMatrix, symbolic: SymbolicLu<usize>) -> Result<Self> {
        assert_eq!(matrix.nrows, matrix.ncols, "LU needs a square matrix");
        let fm = matrix.to_faer()?;
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), fm.rb())
            .map_err(|e| Error::SingularFactorization(format!("{e:?}")))?;
        Ok(Self {
            matrix,
            symbolic,
            lu,
        })
    }

    pub fn symbolic(&self) -> SymbolicLu<usize> {
        self.symbolic.clone()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves `M x = b` with iterative refinement until the residual stops
    /// improving (at most four steps), then checks the relative residual
    /// against `tol`. Refining past `tol` matters for saddle-point systems,
    /// whose small blocks are otherwise solved only to the accuracy of the
    /// large ones.
    pub fn solve_checked(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.dim());
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let residual = |x: &[f64]| -> Vec<f64> {
            self.matrix.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
        };
        let mut x = self.raw_solve(b);
        let mut r = residual(&x);
        let mut rel = norm2(&r) / bnorm;
        for _ in 0..4 {
            if !rel.is_finite() {
                return Err(Error::SingularFactorization("non-finite solution".to_string()));
            }
            if rel == 0.0 {
                break;
            }
            let dx = self.raw_solve(&r);
            let trial: Vec<f64> = x.iter().zip(dx).map(|(xi, d)| xi + d).collect();
            let tr = residual(&trial);
            let trel = norm2(&tr) / bnorm;
            if !(trel < rel) {
                break;
            }
            let improved = trel < 0.5 * rel;
            x = trial;
            r = tr;
            rel = trel;
            if !improved {
                break;
            }
        }
        if !(rel <= tol) {
            return Err(Error::InaccurateSolve {
                residual: rel,
                tolerance: tol,
            });
        }
        Ok(x)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_checked(b, 1e-11)
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
