//! Compressed sparse row matrices and the sparse × dense products used by
//! graph propagation.

use ndarray::{Array2, ArrayView1, ArrayView2};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// CSR matrix. Column indices are strictly increasing within each row and
/// explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Zero + PartialEq> SparseMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix { n_rows, n_cols, indptr: vec![0; n_rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed in
    /// input order; entries that are (or sum to) zero are dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut rows: Vec<usize> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) outside {n_rows}x{n_cols}");
            if rows.last() == Some(&r) && indices.last() == Some(&c) {
                let last = values.last_mut().expect("non-empty");
                *last = *last + v;
            } else {
                rows.push(r);
                indices.push(c);
                values.push(v);
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != T::zero() {
                indptr[r + 1] += 1;
                keep_idx.push(c);
                keep_val.push(v);
            }
        }
        for i in 0..n_rows {
            indptr[i + 1] += indptr[i];
        }
        SparseMatrix { n_rows, n_cols, indptr, indices: keep_idx, values: keep_val }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].binary_search(&j).ok().map(|k| self.values[span.start + k])
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> Self {
        let t = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.n_cols, self.n_rows, t)
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && self.triplets().all(|(i, j, v)| self.get(j, i) == Some(v))
    }

    /// Applies `f` to each stored value, dropping results equal to zero.
    pub fn map_values<U: Copy + Zero + PartialEq>(&self, f: impl Fn(T) -> U) -> SparseMatrix<U> {
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, self.triplets().map(|(i, j, v)| (i, j, f(v))).collect())
    }

    /// Symmetric permutation: entry `(i, j)` moves to `(perm[i], perm[j])`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(self.n_rows, self.n_cols);
        assert_eq!(perm.len(), self.n_rows);
        let t = self.triplets().map(|(i, j, v)| (perm[i], perm[j], v)).collect();
        Self::from_triplets(self.n_rows, self.n_cols, t)
    }
}

impl<F: Scalar> SparseMatrix<F> {
    pub fn to_dense(&self) -> Array2<F> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (i, j, v) in self.triplets() {
            out[[i, j]] = v;
        }
        out
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<F> {
        (0..self.n_rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `self · dense`.
    pub fn matmul_dense(&self, dense: ArrayView2<'_, F>) -> Array2<F> {
        assert_eq!(self.n_cols, dense.nrows(), "sparse·dense inner dimension");
        let mut out = Array2::zeros((self.n_rows, dense.ncols()));
        for (i, mut out_row) in out.rows_mut().into_iter().enumerate() {
            let dst = out_row.as_slice_mut().expect("fresh array is contiguous");
            for (j, v) in self.row(i) {
                axpy(dst, v, dense.row(j));
            }
        }
        out
    }

    /// `selfᵀ · dense`, without materializing the transpose.
    pub fn transpose_matmul_dense(&self, dense: ArrayView2<'_, F>) -> Array2<F> {
        assert_eq!(self.n_rows, dense.nrows(), "sparseᵀ·dense inner dimension");
        let mut out = Array2::zeros((self.n_cols, dense.ncols()));
        for i in 0..self.n_rows {
            let src = dense.row(i);
            for (j, v) in self.row(i) {
                let mut dst = out.row_mut(j);
                axpy(dst.as_slice_mut().expect("fresh array is contiguous"), v, src);
            }
        }
        out
    }
}

/// `dst += a · src`, with a plain loop when `src` is contiguous.
fn axpy<F: Scalar>(dst: &mut [F], a: F, src: ArrayView1<'_, F>) {
    match src.as_slice() {
        Some(src) => dst.iter_mut().zip(src).for_each(|(d, &s)| *d += a * s),
        None => dst.iter_mut().zip(src.iter()).for_each(|(d, &s)| *d += a * s),
    }
}

/// `D̃^(-1/2) (A + I) D̃^(-1/2)` with `D̃(i,i) = Σ_j (A + I)(i,j)`.
///
/// Each output value is `ã(i,j) / sqrt(d_i * d_j)`, so symmetric input yields
/// bitwise-symmetric output. An isolated node keeps a self-loop of 1.
pub fn normalize<F: Scalar>(adj: &SparseMatrix<F>) -> SparseMatrix<F> {
    assert_eq!(adj.n_rows(), adj.n_cols(), "adjacency must be square");
    let n = adj.n_rows();
    let mut with_loops: Vec<(usize, usize, F)> = adj.triplets().collect();
    with_loops.extend((0..n).map(|i| (i, i, F::one())));
    let tilde = SparseMatrix::from_triplets(n, n, with_loops);
    let degree = tilde.row_sums();
    let scaled = tilde
        .triplets()
        .map(|(i, j, v)| {
            let d = degree[i] * degree[j];
            (i, j, if d > F::zero() { v / d.sqrt() } else { F::zero() })
        })
        .collect();
    SparseMatrix::from_triplets(n, n, scaled)
}
