//! Small dense matrices.
//!
//! Everything pointwise in this crate lives in dimension `n ≤ 6` or so, so a
//! plain row-major `Vec` is the right container; the symmetric routines
//! (Cholesky, cyclic Jacobi) are written out rather than pulled from a
//! general linear-algebra crate so that they stay generic over [`Real`].

use std::ops::{Index, IndexMut};

use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
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

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(l, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + rhs[(i, j)])
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s)
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "cholesky needs a square matrix");
        let mut l = Self::zeros(self.rows, self.cols);
        cholesky_slice(&self.data, self.rows, &mut l.data)?;
        Some(l)
    }

    /// Inverse and determinant of a symmetric positive definite matrix via
    /// Cholesky. The returned inverse is symmetrized exactly.
    pub fn spd_inverse(&self) -> Option<(Self, T)> {
        assert_eq!(self.rows, self.cols, "inverse needs a square matrix");
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        let mut l = vec![T::zero(); n * n];
        let det = spd_inverse_slice(&self.data, n, &mut inv.data, &mut l)?;
        Some((inv, det))
    }

    /// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi sweeps.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        assert_eq!(self.rows, self.cols, "eigenvalues need a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let scale = a.max_abs();
        if scale > T::zero() {
            let tol = T::epsilon() * T::epsilon() * scale * scale;
            for _sweep in 0..64 {
                let mut off = T::zero();
                for i in 0..n {
                    for j in i + 1..n {
                        off += a[(i, j)] * a[(i, j)];
                    }
                }
                if off <= tol {
                    break;
                }
                for p in 0..n {
                    for q in p + 1..n {
                        let apq = a[(p, q)];
                        if apq == T::zero() {
                            continue;
                        }
                        let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                        let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                        let c = T::one() / (t * t + T::one()).sqrt();
                        let s = t * c;
                        for r in 0..n {
                            let arp = a[(r, p)];
                            let arq = a[(r, q)];
                            a[(r, p)] = c * arp - s * arq;
                            a[(r, q)] = s * arp + c * arq;
                        }
                        for r in 0..n {
                            let apr = a[(p, r)];
                            let aqr = a[(q, r)];
                            a[(p, r)] = c * apr - s * aqr;
                            a[(q, r)] = s * apr + c * aqr;
                        }
                    }
                }
            }
        }
        let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        eig
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factorization of a row-major `n×n` SPD matrix into `l`
/// (lower triangle written, upper left untouched).
pub fn cholesky_slice<T: Real>(a: &[T], n: usize, l: &mut [T]) -> Option<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for p in 0..j {
            d -= l[j * n + p] * l[j * n + p];
        }
        if !(d > T::zero()) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(())
}

/// Allocation-free SPD inverse: writes `a^{-1}` into `inv`, uses `l` as
/// scratch for the Cholesky factor, and returns `det a`.
pub fn spd_inverse_slice<T: Real>(a: &[T], n: usize, inv: &mut [T], l: &mut [T]) -> Option<T> {
    cholesky_slice(a, n, l)?;
    let mut det = T::one();
    for i in 0..n {
        det = det * l[i * n + i] * l[i * n + i];
    }
    // Column c of the inverse: forward solve L y = e_c into inv[.., c],
    // then back solve L^T x = y in place.
    for c in 0..n {
        for i in 0..n {
            let mut s = if i == c { T::one() } else { T::zero() };
            for p in 0..i {
                s -= l[i * n + p] * inv[p * n + c];
            }
            inv[i * n + c] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = inv[i * n + c];
            for p in i + 1..n {
                s -= l[p * n + i] * inv[p * n + c];
            }
            inv[i * n + c] = s / l[i * n + i];
        }
    }
    let half = T::lit(0.5);
    for i in 0..n {
        for j in i + 1..n {
            let s = half * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    Some(det)
}

/// One-sided Jacobi SVD of a row-major `rows × cols` matrix `A`.
///
/// Returns `(σ, B, V)` with `V` (`cols × cols`, row-major, orthogonal) and
/// `B = A V` (`rows × cols`, row-major) whose columns are mutually
/// orthogonal with norms `σ`. Column rotations keep the singular values
/// accurate relative to their own size, unlike forming `AᵀA`.
pub fn jacobi_svd<T: Real>(a: &[T], rows: usize, cols: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut b = a.to_vec();
    let mut v = vec![T::zero(); cols * cols];
    for i in 0..cols {
        v[i * cols + i] = T::one();
    }
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for r in 0..rows {
                    let (x, y) = (b[r * cols + p], b[r * cols + q]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (x, y) = (b[r * cols + p], b[r * cols + q]);
                    b[r * cols + p] = c * x - s * y;
                    b[r * cols + q] = s * x + c * y;
                }
                for r in 0..cols {
                    let (x, y) = (v[r * cols + p], v[r * cols + q]);
                    v[r * cols + p] = c * x - s * y;
                    v[r * cols + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = (0..cols)
        .map(|j| (0..rows).map(|r| b[r * cols + j] * b[r * cols + j]).sum::<T>().sqrt())
        .collect();
    (sigma, b, v)
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
