//! Small dense and tridiagonal solvers.

use crate::error::{mismatch, Error, Result};
use crate::scalar::{lit, Real};

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
///
/// `lower[0]` and `upper[n-1]` are ignored. The system must be diagonally dominant.
pub fn solve_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] = x[i] - c[i] * x[i + 1];
    }
    x
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = self.data[i * self.n + j] + v;
        if i != j {
            self.data[j * self.n + i] = self.data[j * self.n + i] + v;
        }
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn quadratic_form(&self, x: &[T]) -> T {
        (0..self.n)
            .map(|i| x[i] * (0..self.n).map(|j| self.get(i, j) * x[j]).sum::<T>())
            .sum()
    }

    fn bandwidth(&self) -> usize {
        let mut b = 0;
        for i in 0..self.n {
            for j in 0..i {
                if self.get(i, j) != T::zero() {
                    b = b.max(i - j);
                    break;
                }
            }
        }
        b
    }

    /// Solves `(A + ridge I) x = rhs` by a band-limited Cholesky factorization.
    pub fn solve_ridge(&self, rhs: &[T], ridge: T) -> Result<Vec<T>> {
        let n = self.n;
        if rhs.len() != n {
            return mismatch(format!("rhs of length {} for a {n}x{n} system", rhs.len()));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let bw = self.bandwidth();
        // lower factor stored densely; only the band is touched
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = self.get(i, j);
                if i == j {
                    s = s + ridge;
                }
                for k in j0.max(j.saturating_sub(bw))..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > T::zero()) {
                        return Err(Error::SingularGram {
                            row: i,
                            pivot: s.to_f64_lossy(),
                        });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let s: T = (j0..i).map(|k| l[i * n + k] * y[k]).sum();
            y[i] = (rhs[i] - s) / l[i * n + i];
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let s: T = (i + 1..(i + bw + 1).min(n)).map(|k| l[k * n + i] * x[k]).sum();
            x[i] = (y[i] - s) / l[i * n + i];
        }
        Ok(x)
    }

    /// Smallest eigenvalue by cyclic Jacobi rotations.
    pub fn min_eigenvalue(&self) -> T {
        let n = self.n;
        if n == 0 {
            return T::zero();
        }
        let mut a = self.data.clone();
        let eps = lit::<T>(1e-15);
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..i {
                    off = off + a[i * n + j] * a[i * n + j];
                }
            }
            let scale: T = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum::<T>() + off;
            if off <= eps * eps * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (lit::<T>(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i * n + i]).fold(T::infinity(), T::min)
    }
}
