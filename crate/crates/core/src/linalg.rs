//! Small dense complex matrices.
//!
//! Everything in this crate works with `N <= 8`, so matrices are stored as a
//! flat column-major `Vec<Complex64>` (interleaved real/imaginary pairs) and
//! all algorithms are the textbook dense ones. Hot loops use the `*_into`
//! variants to avoid allocation.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat({}x{})", self.n, self.n)?;
        for i in 0..self.n {
            write!(f, "  [")?;
            for j in 0..self.n {
                let z = self.get(i, j);
                write!(f, " {:+.6}{:+.6}i", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, ONE)
    }

    pub fn scalar(n: usize, z: C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i + i * n] = z;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in 0..n {
                m.data[i + j * n] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_rows(n: usize, rows: &[C64]) -> Self {
        assert_eq!(rows.len(), n * n, "expected {} entries", n * n);
        Self::from_fn(n, |i, j| rows[i * n + j])
    }

    pub fn from_real_rows(n: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), n * n, "expected {} entries", n * n);
        Self::from_fn(n, |i, j| C64::new(rows[i * n + j], 0.0))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i + j * self.n]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.data[i + j * self.n] = z;
    }

    #[inline]
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Row-major copy of the entries.
    pub fn to_rows(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn copy_from(&mut self, other: &Mat) {
        debug_assert_eq!(self.n, other.n);
        self.data.copy_from_slice(&other.data);
    }

    pub fn set_identity(&mut self) {
        self.data.fill(ZERO);
        for i in 0..self.n {
            self.data[i + i * self.n] = ONE;
        }
    }

    pub fn adjoint(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.data[i + i * self.n]).sum()
    }

    pub fn scale(&self, z: C64) -> Mat {
        Mat {
            n: self.n,
            data: self.data.iter().map(|&a| a * z).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Mat {
        Mat {
            n: self.n,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &Mat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * *b;
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max-norm of `M^dagger M - I`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for k in 0..n {
                    s += self.get(k, i).conj() * self.get(k, j);
                }
                if i == j {
                    s -= ONE;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.data.iter().all(|z| z.im.abs() <= tol)
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> C64 {
        let n = self.n;
        if n == 1 {
            return self.data[0];
        }
        if n == 2 {
            return self.data[0] * self.data[3] - self.data[2] * self.data[1];
        }
        let mut a = self.data.clone();
        let mut det = ONE;
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col + col * n].norm();
            for r in col + 1..n {
                let v = a[r + col * n].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return ZERO;
            }
            if piv != col {
                for c in 0..n {
                    a.swap(col + c * n, piv + c * n);
                }
                det = -det;
            }
            let p = a[col + col * n];
            det *= p;
            for r in col + 1..n {
                let factor = a[r + col * n] / p;
                if factor != ZERO {
                    for c in col..n {
                        let v = a[col + c * n];
                        a[r + c * n] -= factor * v;
                    }
                }
            }
        }
        det
    }

    /// Inverse by Gauss-Jordan elimination; `None` when a pivot falls below
    /// `1e-13` relative to the matrix scale.
    pub fn inverse(&self) -> Option<Mat> {
        let n = self.n;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut a = self.data.clone();
        let mut inv = Mat::identity(n).data;
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col + col * n].norm();
            for r in col + 1..n {
                let v = a[r + col * n].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= 1e-13 * scale {
                return None;
            }
            if piv != col {
                for c in 0..n {
                    a.swap(col + c * n, piv + c * n);
                    inv.swap(col + c * n, piv + c * n);
                }
            }
            let p = a[col + col * n].inv();
            for c in 0..n {
                a[col + c * n] *= p;
                inv[col + c * n] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r + col * n];
                if factor != ZERO {
                    for c in 0..n {
                        let va = a[col + c * n];
                        let vi = inv[col + c * n];
                        a[r + c * n] -= factor * va;
                        inv[r + c * n] -= factor * vi;
                    }
                }
            }
        }
        Some(Mat { n, data: inv })
    }
}

/// `out = a * b`.
#[inline]
pub fn mul_into(a: &Mat, b: &Mat, out: &mut Mat) {
    let n = a.n;
    debug_assert!(b.n == n && out.n == n);
    let (a, b, o) = (&a.data, &b.data, &mut out.data);
    if n == 2 {
        o[0] = a[0] * b[0] + a[2] * b[1];
        o[1] = a[1] * b[0] + a[3] * b[1];
        o[2] = a[0] * b[2] + a[2] * b[3];
        o[3] = a[1] * b[2] + a[3] * b[3];
        return;
    }
    for j in 0..n {
        for i in 0..n {
            let mut s = ZERO;
            for k in 0..n {
                s += a[i + k * n] * b[k + j * n];
            }
            o[i + j * n] = s;
        }
    }
}

/// `out = a * b^dagger`.
#[inline]
pub fn mul_adj_into(a: &Mat, b: &Mat, out: &mut Mat) {
    let n = a.n;
    debug_assert!(b.n == n && out.n == n);
    let (a, b, o) = (&a.data, &b.data, &mut out.data);
    if n == 2 {
        o[0] = a[0] * b[0].conj() + a[2] * b[2].conj();
        o[1] = a[1] * b[0].conj() + a[3] * b[2].conj();
        o[2] = a[0] * b[1].conj() + a[2] * b[3].conj();
        o[3] = a[1] * b[1].conj() + a[3] * b[3].conj();
        return;
    }
    for j in 0..n {
        for i in 0..n {
            let mut s = ZERO;
            for k in 0..n {
                s += a[i + k * n] * b[j + k * n].conj();
            }
            o[i + j * n] = s;
        }
    }
}

/// `out = a^dagger * b`.
#[inline]
pub fn adj_mul_into(a: &Mat, b: &Mat, out: &mut Mat) {
    let n = a.n;
    debug_assert!(b.n == n && out.n == n);
    let (a, b, o) = (&a.data, &b.data, &mut out.data);
    for j in 0..n {
        for i in 0..n {
            let mut s = ZERO;
            for k in 0..n {
                s += a[k + i * n].conj() * b[k + j * n];
            }
            o[i + j * n] = s;
        }
    }
}

/// `Re Tr(a * b)` without forming the product.
#[inline]
pub fn re_tr_mul(a: &Mat, b: &Mat) -> f64 {
    let n = a.n;
    let (a, b) = (&a.data, &b.data);
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[i + k * n];
            let y = b[k + i * n];
            s += x.re * y.re - x.im * y.im;
        }
    }
    s
}

/// `Tr(a * b)` without forming the product.
#[inline]
pub fn tr_mul(a: &Mat, b: &Mat) -> C64 {
    let n = a.n;
    let (a, b) = (&a.data, &b.data);
    let mut s = ZERO;
    for i in 0..n {
        for k in 0..n {
            s += a[i + k * n] * b[k + i * n];
        }
    }
    s
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        let mut out = Mat::zeros(self.n);
        mul_into(self, rhs, &mut out);
        out
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        Mat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Modified Gram-Schmidt on the columns of `m`. Returns the orthonormal factor
/// `Q` of `m = QR` with `R` having a positive real diagonal, or `None` if a
/// column is numerically dependent on the previous ones.
pub fn gram_schmidt(m: &Mat) -> Option<Mat> {
    let n = m.n;
    let mut q = m.clone();
    for j in 0..n {
        for k in 0..j {
            let mut proj = ZERO;
            for i in 0..n {
                proj += q.get(i, k).conj() * q.get(i, j);
            }
            for i in 0..n {
                let v = q.get(i, j) - proj * q.get(i, k);
                q.set(i, j, v);
            }
        }
        let norm = (0..n).map(|i| q.get(i, j).norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return None;
        }
        for i in 0..n {
            let v = q.get(i, j) / norm;
            q.set(i, j, v);
        }
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Mat {
        Mat::from_rows(
            3,
            &[
                C64::new(1.0, 0.5),
                C64::new(-0.2, 0.0),
                C64::new(0.3, 1.0),
                C64::new(0.0, -1.0),
                C64::new(2.0, 0.1),
                C64::new(0.4, 0.0),
                C64::new(0.7, 0.2),
                C64::new(0.0, 0.0),
                C64::new(-1.5, 0.3),
            ],
        )
    }

    #[test]
    fn inverse_times_self_is_identity() {
        let m = sample();
        let inv = m.inverse().unwrap();
        assert!((&m * &inv).max_abs_diff(&Mat::identity(3)) < 1e-14);
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let m = sample();
        let g = |i, j| m.get(i, j);
        let cof = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
            - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
            + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
        assert!((m.det() - cof).norm() < 1e-13);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = Mat::from_real_rows(2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(m.inverse().is_none());
        assert_eq!(m.det(), ZERO);
    }

    #[test]
    fn fused_products_agree_with_explicit_ones() {
        let a = sample();
        let b = sample().adjoint().scale(C64::new(0.3, -0.7));
        let mut out = Mat::zeros(3);
        mul_adj_into(&a, &b, &mut out);
        assert!(out.max_abs_diff(&(&a * &b.adjoint())) < 1e-14);
        adj_mul_into(&a, &b, &mut out);
        assert!(out.max_abs_diff(&(&a.adjoint() * &b)) < 1e-14);
        assert!((re_tr_mul(&a, &b) - (&a * &b).trace().re).abs() < 1e-14);
    }

    #[test]
    fn gram_schmidt_gives_unitary_with_positive_r() {
        let m = sample();
        let q = gram_schmidt(&m).unwrap();
        assert!(q.unitarity_residual() < 1e-14);
        let r = &q.adjoint() * &m;
        for i in 0..3 {
            assert!(r.get(i, i).re > 0.0 && r.get(i, i).im.abs() < 1e-14);
            for j in 0..i {
                assert!(r.get(i, j).norm() < 1e-13);
            }
        }
    }
}
