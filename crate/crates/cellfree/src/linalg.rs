//! Dense linear-algebra kernels used by the simulator.
//!
//! Everything here is deliberately small and unblocked: the factorizations are
//! applied either to K×K capacitance matrices (K ≤ a few hundred) or to one
//! shadowing covariance per snapshot, where a straightforward O(n³) Cholesky
//! is more than fast enough and keeps the numerics auditable.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Column-major real matrix. Column `j` is the contiguous slice
/// `data[j*rows .. (j+1)*rows]`, which matches the simulator's access pattern
/// (one column per user).
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[j * rows + i] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Column-major complex matrix; same layout contract as [`RealMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

/// `x^H y` for complex slices of equal length.
#[inline]
pub fn cdot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in x.iter().zip(y) {
        // conj(a) * b, accumulated in parts to keep the loop tight.
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    Complex64::new(re, im)
}

/// `Σ_m x_m^* y_m w_m` — conjugated dot with a real per-entry weight.
#[inline]
pub fn cdot_weighted(x: &[Complex64], y: &[Complex64], w: &[f64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    debug_assert_eq!(x.len(), w.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for ((a, b), &wm) in x.iter().zip(y).zip(w) {
        re += (a.re * b.re + a.im * b.im) * wm;
        im += (a.re * b.im - a.im * b.re) * wm;
    }
    Complex64::new(re, im)
}

/// In-place lower Cholesky of a symmetric positive-definite matrix stored
/// row-major (`a[i*n + j]`). Only the lower triangle is referenced; on success
/// it holds L with `A = L Lᵀ`.
pub fn cholesky_real(a: &mut [f64], n: usize, what: &str) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                what: what.to_string(),
                pivot: j,
            });
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    Ok(())
}

/// Solve `L Lᵀ x = b` in place given the lower factor from [`cholesky_real`].
pub fn cholesky_real_solve(l: &[f64], n: usize, b: &mut [f64]) {
    debug_assert_eq!(l.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// In-place lower Cholesky of a Hermitian positive-definite matrix stored
/// row-major (`a[i*n + j]`). On success the lower triangle holds L with
/// `A = L L^H` (diagonal real positive).
pub fn cholesky_complex(a: &mut [Complex64], n: usize, what: &str) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                what: what.to_string(),
                pivot: j,
            });
        }
        let ljj = d.sqrt();
        a[j * n + j] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / ljj;
        }
    }
    Ok(())
}

/// Solve `L L^H x = b` in place given the lower factor from [`cholesky_complex`].
pub fn cholesky_complex_solve(l: &[Complex64], n: usize, b: &mut [Complex64]) {
    debug_assert_eq!(l.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i].re;
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i].conj() * b[k];
        }
        b[i] = s / l[i * n + i].re;
    }
}

/// LU factorization with partial pivoting of a small dense real matrix
/// (row-major), for the nonsymmetric systems in the large-system solver.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(mut a: Vec<f64>, n: usize, what: &str) -> Result<Lu> {
        debug_assert_eq!(a.len(), n * n);
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut p = col;
            let mut best = a[col * n + col].abs();
            for r in (col + 1)..n {
                let v = a[r * n + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular {
                    what: what.to_string(),
                });
            }
            if p != col {
                for j in 0..n {
                    a.swap(col * n + j, p * n + j);
                }
                piv.swap(col, p);
            }
            let pivot = a[col * n + col];
            for r in (col + 1)..n {
                let f = a[r * n + col] / pivot;
                a[r * n + col] = f;
                for j in (col + 1)..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
            }
        }
        Ok(Lu { n, lu: a, piv })
    }

    /// Solve `A x = b`, returning x.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] = x[i] - self.lu[i * n + k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] = x[i] - self.lu[i * n + k] * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}
