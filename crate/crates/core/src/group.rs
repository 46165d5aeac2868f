//! The compact matrix groups U(N), SU(N), SO(N) and their Lie algebras.
//!
//! The algebra carries the inner product `<X, Y> = Re Tr(X^dagger Y)` with no
//! extra normalization. Algebra elements are stored as coefficients in a fixed
//! orthonormal basis:
//!
//! * off-diagonal pairs `j < k` in lexicographic order, each contributing
//!   `(E_jk - E_kj)/sqrt(2)` and, for complex families, `i(E_jk + E_kj)/sqrt(2)`;
//! * for su(N) and u(N), the Cartan elements `i H_k`, `k = 1..N-1`, with
//!   `H_k = diag(1,..,1,-k,0,..,0)/sqrt(k(k+1))`;
//! * for u(N), finally `i I / sqrt(N)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{gram_schmidt, mul_into, C64, Mat, ONE, ZERO};

/// Tolerance on `|M^dagger M - I|_max` and `|det M - 1|` for group elements.
pub const CONSTRAINT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("invalid group {family}({n}): {reason}")]
    InvalidSpec {
        family: Family,
        n: usize,
        reason: &'static str,
    },
    #[error("matrix is rank-deficient")]
    SingularInput,
    #[error("matrix is not close to {0}")]
    NotNearGroup(GroupSpec),
    #[error("matrix violates the {spec} constraints (residual {residual:.3e})")]
    ConstraintViolated { spec: GroupSpec, residual: f64 },
    #[error("matrix has size {got}, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("logarithm undefined: eigenvalue on the negative real axis")]
    LogUndefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    U,
    SU,
    SO,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::U => "U",
            Family::SU => "SU",
            Family::SO => "SO",
        })
    }
}

impl Family {
    pub fn code(self) -> u8 {
        match self {
            Family::U => 0,
            Family::SU => 1,
            Family::SO => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Family::U),
            1 => Some(Family::SU),
            2 => Some(Family::SO),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct GroupSpec {
    family: Family,
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    family: Family,
    n: usize,
}

impl TryFrom<RawSpec> for GroupSpec {
    type Error = GroupError;
    fn try_from(raw: RawSpec) -> Result<Self, GroupError> {
        GroupSpec::new(raw.family, raw.n)
    }
}

impl From<GroupSpec> for RawSpec {
    fn from(s: GroupSpec) -> Self {
        RawSpec {
            family: s.family,
            n: s.n,
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.n)
    }
}

impl GroupSpec {
    pub fn new(family: Family, n: usize) -> Result<Self, GroupError> {
        if n == 0 {
            return Err(GroupError::InvalidSpec {
                family,
                n,
                reason: "matrix size must be positive",
            });
        }
        if family == Family::SU && n < 2 {
            return Err(GroupError::InvalidSpec {
                family,
                n,
                reason: "SU(1) is the trivial group",
            });
        }
        Ok(Self { family, n })
    }

    pub fn u(n: usize) -> Self {
        Self::new(Family::U, n).expect("valid U(N)")
    }

    pub fn su(n: usize) -> Self {
        Self::new(Family::SU, n).expect("valid SU(N)")
    }

    pub fn so(n: usize) -> Self {
        Self::new(Family::SO, n).expect("valid SO(N)")
    }

    #[inline]
    pub fn family(&self) -> Family {
        self.family
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// SO(N) is represented by real matrices; U and SU by complex ones.
    #[inline]
    pub fn is_real(&self) -> bool {
        self.family == Family::SO
    }

    pub fn algebra_dim(&self) -> usize {
        let n = self.n;
        match self.family {
            Family::U => n * n,
            Family::SU => n * n - 1,
            Family::SO => n * (n - 1) / 2,
        }
    }

    fn pair_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }
}

/// Largest violation of the group constraints for `m`.
pub fn constraint_residual(spec: GroupSpec, m: &Mat) -> f64 {
    let mut r = m.unitarity_residual();
    match spec.family {
        Family::U => {}
        Family::SU => r = r.max((m.det() - ONE).norm()),
        Family::SO => {
            r = r.max((m.det() - ONE).norm());
            let imag = m.data().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            r = r.max(imag);
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    spec: GroupSpec,
    mat: Mat,
}

impl GroupElement {
    /// Validates `mat` against the constraints of `spec`.
    pub fn new(spec: GroupSpec, mat: Mat) -> Result<Self, GroupError> {
        if mat.n() != spec.n {
            return Err(GroupError::SizeMismatch {
                expected: spec.n,
                got: mat.n(),
            });
        }
        let residual = constraint_residual(spec, &mat);
        if residual > CONSTRAINT_TOL {
            return Err(GroupError::ConstraintViolated { spec, residual });
        }
        Ok(Self { spec, mat })
    }

    pub(crate) fn new_unchecked(spec: GroupSpec, mat: Mat) -> Self {
        debug_assert_eq!(mat.n(), spec.n);
        Self { spec, mat }
    }

    pub fn identity(spec: GroupSpec) -> Self {
        Self::new_unchecked(spec, Mat::identity(spec.n))
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }

    pub fn inverse(&self) -> Self {
        Self::new_unchecked(self.spec, self.mat.adjoint())
    }

    pub fn compose(&self, other: &GroupElement) -> Self {
        Self::new_unchecked(self.spec, &self.mat * &other.mat)
    }

    pub fn residual(&self) -> f64 {
        constraint_residual(self.spec, &self.mat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    spec: GroupSpec,
    coeffs: Vec<f64>,
}

impl AlgebraElement {
    pub fn zero(spec: GroupSpec) -> Self {
        Self {
            spec,
            coeffs: vec![0.0; spec.algebra_dim()],
        }
    }

    pub fn from_coeffs(spec: GroupSpec, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), spec.algebra_dim(), "coefficient count");
        Self { spec, coeffs }
    }

    /// Orthogonal projection of an arbitrary matrix onto the algebra.
    pub fn project(spec: GroupSpec, m: &Mat) -> Self {
        let mut coeffs = vec![0.0; spec.algebra_dim()];
        algebra_coeffs_into(spec, m, &mut coeffs);
        Self { spec, coeffs }
    }

    /// Standard Gaussian element: i.i.d. unit normals along every basis direction.
    pub fn gaussian<R: Rng + ?Sized>(spec: GroupSpec, rng: &mut R) -> Self {
        let coeffs = (0..spec.algebra_dim())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { spec, coeffs }
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            spec: self.spec,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &AlgebraElement) -> Self {
        Self {
            spec: self.spec,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Mat {
        let mut m = Mat::zeros(self.spec.n);
        algebra_matrix_into(self.spec, &self.coeffs, &mut m);
        m
    }
}

/// Orthonormal basis of the Lie algebra, in the fixed coefficient order.
pub fn algebra_basis(spec: GroupSpec) -> Vec<AlgebraElement> {
    let dim = spec.algebra_dim();
    (0..dim)
        .map(|a| {
            let mut coeffs = vec![0.0; dim];
            coeffs[a] = 1.0;
            AlgebraElement { spec, coeffs }
        })
        .collect()
}

/// Writes `sum_a coeffs[a] T_a` into `out`.
pub fn algebra_matrix_into(spec: GroupSpec, coeffs: &[f64], out: &mut Mat) {
    let n = spec.n;
    debug_assert_eq!(coeffs.len(), spec.algebra_dim());
    out.data_mut().fill(ZERO);
    let complex = !spec.is_real();
    let mut a = 0;
    for j in 0..n {
        for k in j + 1..n {
            let c = coeffs[a] * FRAC_1_SQRT_2;
            a += 1;
            let mut jk = C64::new(c, 0.0);
            let mut kj = C64::new(-c, 0.0);
            if complex {
                let s = coeffs[a] * FRAC_1_SQRT_2;
                a += 1;
                jk.im += s;
                kj.im += s;
            }
            out.set(j, k, jk);
            out.set(k, j, kj);
        }
    }
    if complex {
        for k in 1..n {
            let c = coeffs[a] / ((k * (k + 1)) as f64).sqrt();
            a += 1;
            for i in 0..k {
                let v = out.get(i, i) + C64::new(0.0, c);
                out.set(i, i, v);
            }
            let v = out.get(k, k) + C64::new(0.0, -(k as f64) * c);
            out.set(k, k, v);
        }
        if spec.family == Family::U {
            let c = coeffs[a] / (n as f64).sqrt();
            for i in 0..n {
                let v = out.get(i, i) + C64::new(0.0, c);
                out.set(i, i, v);
            }
        }
    }
}

/// Coefficients `<T_a, m> = Re Tr(T_a^dagger m)` of the projection of `m`.
pub fn algebra_coeffs_into(spec: GroupSpec, m: &Mat, out: &mut [f64]) {
    let n = spec.n;
    debug_assert_eq!(out.len(), spec.algebra_dim());
    let complex = !spec.is_real();
    let mut a = 0;
    for j in 0..n {
        for k in j + 1..n {
            out[a] = (m.get(j, k).re - m.get(k, j).re) * FRAC_1_SQRT_2;
            a += 1;
            if complex {
                out[a] = (m.get(j, k).im + m.get(k, j).im) * FRAC_1_SQRT_2;
                a += 1;
            }
        }
    }
    if complex {
        for k in 1..n {
            let mut s = 0.0;
            for i in 0..k {
                s += m.get(i, i).im;
            }
            s -= k as f64 * m.get(k, k).im;
            out[a] = s / ((k * (k + 1)) as f64).sqrt();
            a += 1;
        }
        if spec.family == Family::U {
            let s: f64 = (0..n).map(|i| m.get(i, i).im).sum();
            out[a] = s / (n as f64).sqrt();
        }
    }
    debug_assert!(!complex || a + usize::from(spec.family == Family::U) == spec.algebra_dim());
    debug_assert!(complex || a == spec.pair_count());
}

/// Random algebra matrix `scale * sum_a xi_a T_a` with standard normal `xi`.
pub fn random_algebra_matrix<R: Rng + ?Sized>(
    spec: GroupSpec,
    scale: f64,
    rng: &mut R,
    coeff_buf: &mut [f64],
    out: &mut Mat,
) {
    for c in coeff_buf.iter_mut() {
        *c = scale * rng.sample::<f64, _>(StandardNormal);
    }
    algebra_matrix_into(spec, coeff_buf, out);
}

/// Matrix exponential.
///
/// Closed forms for `N = 1, 2`; otherwise Taylor scaling-and-squaring with the
/// scaled argument below 1/2 in Frobenius norm.
pub fn expm(x: &Mat) -> Mat {
    let n = x.n();
    match n {
        1 => Mat::scalar(1, x.get(0, 0).exp()),
        2 => expm2(x),
        _ => expm_scaling_squaring(x),
    }
}

fn expm2(x: &Mat) -> Mat {
    // X = (t/2) I + X0 with X0 traceless, X0^2 = s^2 I, s^2 = -det X0.
    let half = x.trace() * 0.5;
    let a = x.get(0, 0) - half;
    let b = x.get(0, 1);
    let c = x.get(1, 0);
    let s2 = a * a + b * c;
    let s = s2.sqrt();
    let (ch, shc) = if s.norm() < 1e-4 {
        (
            ONE + s2 * 0.5 + s2 * s2 / 24.0,
            ONE + s2 / 6.0 + s2 * s2 / 120.0,
        )
    } else {
        (s.cosh(), s.sinh() / s)
    };
    let e = half.exp();
    Mat::from_rows(
        2,
        &[
            e * (ch + shc * a),
            e * shc * b,
            e * shc * c,
            e * (ch - shc * a),
        ],
    )
}

fn expm_scaling_squaring(x: &Mat) -> Mat {
    let n = x.n();
    let norm = x.frobenius();
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let y = x.scale_real(0.5f64.powi(squarings as i32));
    let mut result = Mat::identity(n);
    let mut term = Mat::identity(n);
    let mut tmp = Mat::zeros(n);
    for k in 1..=30 {
        mul_into(&term, &y, &mut tmp);
        tmp.scale_in_place(1.0 / k as f64);
        std::mem::swap(&mut term, &mut tmp);
        result.add_assign(&term);
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        mul_into(&result, &result, &mut tmp);
        std::mem::swap(&mut result, &mut tmp);
    }
    result
}

/// `exp(X)` of an algebra matrix, without the residual check of [`exp_map`].
/// Callers re-project periodically.
pub fn exp_map_matrix(spec: GroupSpec, x: &Mat) -> Mat {
    let m = expm(x);
    if spec.is_real() {
        real_part(&m)
    } else {
        m
    }
}

/// `exp(X)` as a group element, re-projected if rounding pushed it past the
/// constraint tolerance.
pub fn exp_map(x: &AlgebraElement) -> GroupElement {
    let spec = x.spec;
    let m = expm(&x.to_matrix());
    let mut m = if spec.is_real() { real_part(&m) } else { m };
    if constraint_residual(spec, &m) > 1e-13 {
        m = reunitarize(spec, &m);
    }
    GroupElement::new_unchecked(spec, m)
}

/// Principal matrix square root by the Denman-Beavers iteration.
pub fn sqrtm(a: &Mat) -> Result<Mat, GroupError> {
    let n = a.n();
    let mut y = a.clone();
    let mut z = Mat::identity(n);
    for _ in 0..100 {
        let yi = y.inverse().ok_or(GroupError::SingularInput)?;
        let zi = z.inverse().ok_or(GroupError::SingularInput)?;
        let mut y_next = &y + &zi;
        y_next.scale_in_place(0.5);
        let mut z_next = &z + &yi;
        z_next.scale_in_place(0.5);
        let delta = y_next.max_abs_diff(&y);
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.max_abs().max(1.0) {
            return Ok(y);
        }
    }
    Err(GroupError::LogUndefined)
}

/// Principal logarithm of a group element, as an algebra element.
///
/// Inverse scaling and squaring: take square roots until the argument is
/// within 0.2 of the identity, then sum the Mercator series.
pub fn log_map(g: &GroupElement) -> Result<AlgebraElement, GroupError> {
    let n = g.spec.n;
    let mut a = g.mat.clone();
    let ident = Mat::identity(n);
    let mut roots = 0;
    while (&a - &ident).frobenius() > 0.2 {
        if roots > 60 {
            return Err(GroupError::LogUndefined);
        }
        a = sqrtm(&a).map_err(|_| GroupError::LogUndefined)?;
        roots += 1;
    }
    let e = &a - &ident;
    let mut sum = Mat::zeros(n);
    let mut power = e.clone();
    let mut tmp = Mat::zeros(n);
    for k in 1..=60 {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum.axpy(C64::new(sign / k as f64, 0.0), &power);
        if power.max_abs() < 1e-18 {
            break;
        }
        mul_into(&power, &e, &mut tmp);
        std::mem::swap(&mut power, &mut tmp);
    }
    sum.scale_in_place(2f64.powi(roots));
    Ok(AlgebraElement::project(g.spec, &sum))
}

fn real_part(m: &Mat) -> Mat {
    Mat::from_fn(m.n(), |i, j| C64::new(m.get(i, j).re, 0.0))
}

/// Haar-distributed element.
///
/// Gaussian matrix followed by Gram-Schmidt: the orthonormal factor of a QR
/// decomposition whose `R` has a positive diagonal is Haar on U(N) / O(N).
/// SU(N) divides by the principal N-th root of the determinant; SO(N) flips
/// the first column when the determinant is negative.
pub fn haar_sample<R: Rng + ?Sized>(spec: GroupSpec, rng: &mut R) -> GroupElement {
    let n = spec.n;
    loop {
        let g = if spec.is_real() {
            Mat::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), 0.0))
        } else {
            Mat::from_fn(n, |_, _| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                    * FRAC_1_SQRT_2
            })
        };
        let Some(mut q) = gram_schmidt(&g) else {
            continue;
        };
        match spec.family {
            Family::U => {}
            Family::SU => {
                let phase = q.det().arg();
                q = q.scale(C64::from_polar(1.0, -phase / n as f64));
            }
            Family::SO => {
                if q.det().re < 0.0 {
                    for i in 0..n {
                        let v = -q.get(i, 0);
                        q.set(i, 0, v);
                    }
                }
            }
        }
        return GroupElement::new_unchecked(spec, q);
    }
}

/// Nearest group element via the polar decomposition, followed by a
/// determinant-phase correction for SU(N).
pub fn project_to_group(m: &Mat, spec: GroupSpec) -> Result<GroupElement, GroupError> {
    if m.n() != spec.n {
        return Err(GroupError::SizeMismatch {
            expected: spec.n,
            got: m.n(),
        });
    }
    let mut x = if spec.is_real() { real_part(m) } else { m.clone() };
    if x.inverse().is_none() {
        return Err(GroupError::SingularInput);
    }
    for _ in 0..100 {
        let inv = x.inverse().ok_or(GroupError::SingularInput)?;
        let mut next = &x + &inv.adjoint();
        next.scale_in_place(0.5);
        let delta = next.max_abs_diff(&x);
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    match spec.family {
        Family::U => {}
        Family::SU => {
            let phase = x.det().arg();
            x = x.scale(C64::from_polar(1.0, -phase / spec.n as f64));
        }
        Family::SO => {
            if x.det().re < 0.0 {
                return Err(GroupError::NotNearGroup(spec));
            }
        }
    }
    Ok(GroupElement::new_unchecked(spec, x))
}

/// Cheap correction of rounding drift: one Newton-Schulz step towards the
/// unitary polar factor, then the SU(N) determinant phase. Only valid for
/// matrices already within ~1e-6 of the group.
pub fn reunitarize(spec: GroupSpec, m: &Mat) -> Mat {
    let n = spec.n;
    let mut gram = Mat::zeros(n);
    crate::linalg::adj_mul_into(m, m, &mut gram);
    // (3I - M^dagger M) / 2
    let mut corr = gram.scale_real(-0.5);
    for i in 0..n {
        let v = corr.get(i, i) + C64::new(1.5, 0.0);
        corr.set(i, i, v);
    }
    let mut out = Mat::zeros(n);
    mul_into(m, &corr, &mut out);
    match spec.family {
        Family::U => out,
        Family::SU => {
            let phase = out.det().arg();
            out.scale(C64::from_polar(1.0, -phase / n as f64))
        }
        Family::SO => real_part(&out),
    }
}

/// Central element `zI` with `z != 1`, if the group has one.
pub fn center_element(spec: GroupSpec) -> Option<GroupElement> {
    let n = spec.n;
    let z = match spec.family {
        Family::SU => C64::from_polar(1.0, 2.0 * PI / n as f64),
        Family::U => C64::new(-1.0, 0.0),
        Family::SO if n % 2 == 0 => C64::new(-1.0, 0.0),
        Family::SO => return None,
    };
    Some(GroupElement::new_unchecked(spec, Mat::scalar(n, z)))
}

/// All central elements `zI` of the group that are roots of unity of the
/// center subgroup used by the finite toy chains (`z^N = 1` for SU(N),
/// `z = +-1` otherwise).
pub fn center_subgroup(spec: GroupSpec) -> Vec<C64> {
    match spec.family {
        Family::SU => (0..spec.n)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / spec.n as f64))
            .collect(),
        Family::U => vec![ONE, -ONE],
        Family::SO if spec.n % 2 == 0 => vec![ONE, -ONE],
        Family::SO => vec![ONE],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn specs() -> Vec<GroupSpec> {
        vec![
            GroupSpec::u(1),
            GroupSpec::u(2),
            GroupSpec::u(3),
            GroupSpec::su(2),
            GroupSpec::su(3),
            GroupSpec::su(4),
            GroupSpec::so(2),
            GroupSpec::so(3),
            GroupSpec::so(4),
            GroupSpec::so(5),
        ]
    }

    /// Truncated power series, no scaling.
    fn exp_series(x: &Mat, terms: usize) -> Mat {
        let n = x.n();
        let mut sum = Mat::identity(n);
        let mut term = Mat::identity(n);
        for k in 1..terms {
            term = (&term * x).scale_real(1.0 / k as f64);
            sum.add_assign(&term);
        }
        sum
    }

    #[test]
    fn su1_is_rejected() {
        assert!(GroupSpec::new(Family::SU, 1).is_err());
        assert!(GroupSpec::new(Family::U, 0).is_err());
        assert!(GroupSpec::new(Family::U, 1).is_ok());
    }

    #[test]
    fn basis_dimensions() {
        assert_eq!(algebra_basis(GroupSpec::su(2)).len(), 3);
        assert_eq!(algebra_basis(GroupSpec::so(4)).len(), 6);
        assert_eq!(algebra_basis(GroupSpec::u(3)).len(), 9);
    }

    #[test]
    fn basis_is_orthonormal_and_in_the_algebra() {
        for spec in specs() {
            let mats: Vec<Mat> = algebra_basis(spec).iter().map(|b| b.to_matrix()).collect();
            for (a, ma) in mats.iter().enumerate() {
                // anti-Hermitian
                assert!((ma + &ma.adjoint()).max_abs() < 1e-15, "{spec}");
                match spec.family {
                    Family::SU => assert!(ma.trace().norm() < 1e-15),
                    Family::SO => assert!(ma.is_real(0.0)),
                    Family::U => {}
                }
                for (b, mb) in mats.iter().enumerate() {
                    let ip = (&ma.adjoint() * mb).trace().re;
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - want).abs() < 1e-14, "{spec} <{a},{b}> = {ip}");
                }
            }
        }
    }

    #[test]
    fn u3_basis_contains_scaled_identity() {
        let spec = GroupSpec::u(3);
        let last = algebra_basis(spec).pop().unwrap().to_matrix();
        let want = Mat::scalar(3, C64::new(0.0, 1.0 / 3f64.sqrt()));
        assert!(last.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn projection_recovers_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in specs() {
            let x = AlgebraElement::gaussian(spec, &mut rng);
            let m = x.to_matrix();
            let back = AlgebraElement::project(spec, &m);
            for (a, b) in x.coeffs().iter().zip(back.coeffs()) {
                assert!((a - b).abs() < 1e-13);
            }
            let ip = (&m.adjoint() * &m).trace().re;
            assert!((ip - x.norm_sq()).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        for spec in specs() {
            let g = exp_map(&AlgebraElement::zero(spec));
            assert!(g.mat().max_abs_diff(&Mat::identity(spec.n())) < 1e-15);
        }
    }

    #[test]
    fn exp_of_diagonal_su2() {
        let theta = 0.7;
        let spec = GroupSpec::su(2);
        // the Cartan element i diag(1,-1)/sqrt(2) is the last basis vector
        let x = AlgebraElement::from_coeffs(spec, vec![0.0, 0.0, theta * 2f64.sqrt()]);
        let g = exp_map(&x);
        assert!((g.mat().get(0, 0) - C64::from_polar(1.0, theta)).norm() < 1e-15);
        assert!((g.mat().get(1, 1) - C64::from_polar(1.0, -theta)).norm() < 1e-15);
        assert!(g.mat().get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn exp_matches_power_series_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in specs() {
            for _ in 0..20 {
                let x = AlgebraElement::gaussian(spec, &mut rng);
                let norm = x.norm_sq().sqrt();
                let x = if norm > 0.0 { x.scaled(rng.random::<f64>() / norm) } else { x };
                let got = expm(&x.to_matrix());
                let want = exp_series(&x.to_matrix(), 40);
                assert!(got.max_abs_diff(&want) < 1e-12, "{spec}");
            }
        }
    }

    #[test]
    fn exp_of_general_complex_2x2_matches_series() {
        let x = Mat::from_rows(
            2,
            &[
                C64::new(0.3, 0.1),
                C64::new(-0.2, 0.5),
                C64::new(0.4, 0.0),
                C64::new(-0.1, -0.6),
            ],
        );
        assert!(expm(&x).max_abs_diff(&exp_series(&x, 40)) < 1e-14);
    }

    #[test]
    fn exp_inverse_pair_multiplies_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in specs() {
            for _ in 0..20 {
                let x = AlgebraElement::gaussian(spec, &mut rng);
                let norm = x.norm_sq().sqrt().max(1e-300);
                let x = x.scaled(5.0 * rng.random::<f64>() / norm);
                let p = exp_map(&x).compose(&exp_map(&x.scaled(-1.0)));
                assert!(p.mat().max_abs_diff(&Mat::identity(spec.n())) < 1e-10);
                assert!(exp_map(&x).residual() < CONSTRAINT_TOL);
            }
        }
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for spec in specs() {
            for _ in 0..20 {
                let x = AlgebraElement::gaussian(spec, &mut rng);
                let norm = x.norm_sq().sqrt().max(1e-300);
                // Frobenius norm 2 keeps every eigenvalue phase below pi.
                let x = x.scaled(2.0 * rng.random::<f64>() / norm);
                let back = log_map(&exp_map(&x)).unwrap();
                for (a, b) in x.coeffs().iter().zip(back.coeffs()) {
                    assert!((a - b).abs() < 1e-10, "{spec}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn haar_samples_satisfy_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for spec in specs() {
            for _ in 0..50 {
                let g = haar_sample(spec, &mut rng);
                assert!(g.residual() < 1e-10, "{spec}: {}", g.residual());
            }
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for spec in specs() {
            let g = haar_sample(spec, &mut rng);
            let p = project_to_group(g.mat(), spec).unwrap();
            assert!(p.mat().max_abs_diff(g.mat()) < 1e-12);
        }
    }

    #[test]
    fn projection_of_scaled_identity() {
        let m = Mat::scalar(2, C64::new(1.001, 0.0));
        let p = project_to_group(&m, GroupSpec::u(2)).unwrap();
        assert!(p.mat().max_abs_diff(&Mat::identity(2)) < 1e-14);
    }

    #[test]
    fn projection_restores_perturbed_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for spec in specs() {
            let g = haar_sample(spec, &mut rng);
            let mut e = Mat::from_fn(spec.n(), |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            e.scale_in_place(1e-3 / e.frobenius());
            let m = g.mat() * &(&Mat::identity(spec.n()) + &e);
            let p = project_to_group(&m, spec).unwrap();
            assert!(p.residual() < 1e-12, "{spec}: {}", p.residual());
            assert!(p.mat().max_abs_diff(g.mat()) < 3e-3);
        }
    }

    #[test]
    fn projection_rejects_singular_input() {
        let m = Mat::from_real_rows(2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            project_to_group(&m, GroupSpec::u(2)).unwrap_err(),
            GroupError::SingularInput
        );
    }

    /// Polar factor of a 2x2 matrix against a brute-force minimisation of
    /// `|M - U|_F` over a dense grid on U(2) = U(1) x SU(2).
    #[test]
    fn projection_matches_grid_search_on_u2() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = GroupSpec::u(2);
        let g = haar_sample(spec, &mut rng);
        let mut e = Mat::from_fn(2, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        e.scale_in_place(0.05 / e.frobenius());
        let m = &g.mat().clone() + &e;
        let p = project_to_group(&m, spec).unwrap();
        let best_polar = (&m - p.mat()).frobenius();
        // local random search around the answer must not improve on it
        let mut improved = 0;
        for _ in 0..2000 {
            let x = AlgebraElement::gaussian(spec, &mut rng).scaled(1e-3);
            let cand = exp_map(&x).mat() * p.mat();
            if (&m - &cand).frobenius() < best_polar - 1e-13 {
                improved += 1;
            }
        }
        assert_eq!(improved, 0);
    }

    #[test]
    fn center_elements() {
        let su2 = center_element(GroupSpec::su(2)).unwrap();
        assert!(su2.mat().max_abs_diff(&Mat::scalar(2, -ONE)) < 1e-15);
        assert!(center_element(GroupSpec::so(3)).is_none());
        let so4 = center_element(GroupSpec::so(4)).unwrap();
        assert!(so4.mat().max_abs_diff(&Mat::scalar(4, -ONE)) < 1e-15);
        let su3 = center_element(GroupSpec::su(3)).unwrap();
        assert!(su3.residual() < 1e-14);
    }

    #[test]
    fn center_commutes_with_haar_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for spec in specs() {
            if let Some(z) = center_element(spec) {
                for _ in 0..100 {
                    let g = haar_sample(spec, &mut rng);
                    let lhs = z.compose(&g);
                    let rhs = g.compose(&z);
                    assert!(lhs.mat().max_abs_diff(rhs.mat()) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let spec = GroupSpec::su(3);
        let x = AlgebraElement::gaussian(spec, &mut rng).scaled(0.3);
        let g = exp_map(&x);
        let r = sqrtm(g.mat()).unwrap();
        assert!((&r * &r).max_abs_diff(g.mat()) < 1e-13);
        assert!(r.max_abs_diff(exp_map(&x.scaled(0.5)).mat()) < 1e-12);
    }
}
