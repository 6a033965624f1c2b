//! Small dense matrices: just enough for covariances in a handful of
//! dimensions.

use serde::{Deserialize, Serialize};

use crate::error::{reject, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return reject("ragged matrix rows");
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
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

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).map(<[T]>::to_vec).collect()
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                crate::scalar::dot(row, v)
            })
            .collect()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Largest asymmetry `|aᵢⱼ − aⱼᵢ|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Lower Cholesky factor of a symmetric positive-definite matrix.
    pub fn cholesky(&self) -> Result<Self> {
        if !self.is_square() {
            return reject("cholesky of a non-square matrix");
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return reject("matrix is not positive definite");
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Top eigenvalue of a symmetric positive semi-definite matrix by power
    /// iteration from a fixed start vector, stopping once the Rayleigh
    /// quotient changes by less than `rel_tol` relative.
    pub fn power_iteration(&self, rel_tol: T) -> T {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return T::zero();
        }
        if n == 1 {
            return self.data[0];
        }
        let mut v: Vec<T> = (0..n)
            .map(|k| T::one() + T::lit(0.5) * T::from_usize_lossy(k))
            .collect();
        normalize(&mut v);
        let mut rq = T::neg_infinity();
        for _ in 0..100_000 {
            let w = self.mul_vec(&v);
            let next = crate::scalar::dot(&v, &w);
            let nw = crate::scalar::norm(&w);
            if nw == T::zero() {
                return T::zero();
            }
            v = w.into_iter().map(|x| x / nw).collect();
            if (next - rq).abs() <= rel_tol * next.abs() {
                return next;
            }
            rq = next;
        }
        rq
    }
}

fn normalize<T: Real>(v: &mut [T]) {
    let n = crate::scalar::norm(v);
    for x in v {
        *x = *x / n;
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}
