//! Small dense row-major matrices.
//!
//! Everything in this crate works with a handful of stages, so clarity wins
//! over blocking or sparsity. Lower-triangular matrices are inverted by
//! forward substitution, which keeps the strictly upper part exactly zero.

use std::ops::{Index, IndexMut};

/// Pivots with magnitude at or below `TOL_SING * max(1, max|entry|)` are
/// treated as zero.
pub const TOL_SING: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; `None` if the rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Option<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return None;
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Some(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// True iff every entry strictly above the diagonal is exactly zero.
    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| ((i + 1)..self.cols).all(|j| self[(i, j)] == 0.0))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `xᵀ A`
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len());
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn pivot_floor(&self) -> f64 {
        TOL_SING * self.max_abs().max(1.0)
    }

    /// Inverse, choosing forward substitution for lower-triangular input and
    /// Gauss-Jordan elimination with partial pivoting otherwise.
    pub fn inverse(&self) -> Option<Self> {
        if self.is_lower_triangular() {
            self.lower_triangular_inverse()
        } else {
            self.general_inverse()
        }
    }

    /// Forward-substitution inverse. The result has an exactly zero strictly
    /// upper part. Panics if `self` is not square.
    pub fn lower_triangular_inverse(&self) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        let floor = self.pivot_floor();
        if (0..n).any(|i| self[(i, i)].abs() <= floor) {
            return None;
        }
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            inv[(j, j)] = 1.0 / self[(j, j)];
            for i in (j + 1)..n {
                let acc: f64 = (j..i).map(|k| self[(i, k)] * inv[(k, j)]).sum();
                inv[(i, j)] = -acc / self[(i, i)];
            }
        }
        Some(inv)
    }

    pub fn general_inverse(&self) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        let floor = self.pivot_floor();
        let mut work = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| work[(a, col)].abs().total_cmp(&work[(b, col)].abs()))
                .unwrap();
            if work[(piv, col)].abs() <= floor {
                return None;
            }
            work.swap_rows(col, piv);
            inv.swap_rows(col, piv);
            let p = work[(col, col)];
            for j in 0..n {
                work[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = work[(i, col)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    work[(i, j)] -= f * work[(col, j)];
                    inv[(i, j)] -= f * inv[(col, j)];
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Solves `A x = rhs` by LU with partial pivoting. `None` if `A` is singular.
pub fn solve(a: &Matrix, rhs: &[f64]) -> Option<Vec<f64>> {
    assert!(a.is_square());
    let n = a.rows();
    assert_eq!(n, rhs.len());
    let floor = a.pivot_floor();
    let mut lu = a.clone();
    let mut x = rhs.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| lu[(p, col)].abs().total_cmp(&lu[(q, col)].abs()))
            .unwrap();
        if lu[(piv, col)].abs() <= floor {
            return None;
        }
        lu.swap_rows(col, piv);
        x.swap(col, piv);
        let p = lu[(col, col)];
        for i in (col + 1)..n {
            let f = lu[(i, col)] / p;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                lu[(i, j)] -= f * lu[(col, j)];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let acc: f64 = ((i + 1)..n).map(|j| lu[(i, j)] * x[j]).sum();
        x[i] = (x[i] - acc) / lu[(i, i)];
    }
    Some(x)
}
