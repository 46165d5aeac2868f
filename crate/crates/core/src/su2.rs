//! Exact single-variable updates for SU(2) and U(1).
//!
//! Both samplers target the density `exp(c Re Tr(Q M)) dQ` for a fixed
//! environment matrix `M` and coupling `c`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{mul_adj_into, C64, Mat};
use crate::special::bessel_ratio;

/// Projection of a complex 2x2 matrix onto the real span of SU(2),
/// `(M + sigma_y conj(M) sigma_y) / 2`. For `Q` in SU(2),
/// `Re Tr(Q M) = Re Tr(Q P(M))`.
pub fn quaternion_part(m: &Mat) -> Mat {
    debug_assert_eq!(m.n(), 2);
    let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    Mat::from_rows(
        2,
        &[
            (a + d.conj()) * 0.5,
            (b - c.conj()) * 0.5,
            (c - b.conj()) * 0.5,
            (d + a.conj()) * 0.5,
        ],
    )
}

/// For a quaternionic `M = k V` with `V` in SU(2), returns `k >= 0`.
fn quaternion_norm(m: &Mat) -> f64 {
    (0.5 * m.frobenius_sq()).sqrt()
}

/// Draws `a0` in [-1, 1] with density proportional to
/// `sqrt(1 - a0^2) exp(alpha a0)` (Creutz's method).
pub fn sample_a0<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        let a0 = if alpha < 1e-8 {
            2.0 * u - 1.0
        } else {
            // inverse CDF of exp(alpha a0) on [-1, 1]
            1.0 + (u + (1.0 - u) * (-2.0 * alpha).exp()).ln() / alpha
        };
        let a0 = a0.clamp(-1.0, 1.0);
        let v: f64 = rng.random();
        if v * v <= 1.0 - a0 * a0 {
            return a0;
        }
    }
}

/// `a0 I + i (a1 sigma_1 + a2 sigma_2 + a3 sigma_3)`.
pub fn su2_from_quaternion(a0: f64, a: [f64; 3]) -> Mat {
    Mat::from_rows(
        2,
        &[
            C64::new(a0, a[2]),
            C64::new(a[1], a[0]),
            C64::new(-a[1], a[0]),
            C64::new(a0, -a[2]),
        ],
    )
}

fn random_quaternion_with_a0<R: Rng + ?Sized>(a0: f64, rng: &mut R) -> Mat {
    let r = (1.0 - a0 * a0).max(0.0).sqrt();
    let mut v = [0.0f64; 3];
    let norm = loop {
        for x in v.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            break n;
        }
    };
    su2_from_quaternion(a0, [r * v[0] / norm, r * v[1] / norm, r * v[2] / norm])
}

/// Heat-bath draw of `Q` in SU(2) from `exp(c Re Tr(Q M)) dQ`.
///
/// `M` may be any complex 2x2 matrix; only its quaternion part matters.
pub fn su2_heat_bath<R: Rng + ?Sized>(m: &Mat, c: f64, rng: &mut R, out: &mut Mat) {
    let mq = quaternion_part(m);
    let k = quaternion_norm(&mq);
    if k * c < 1e-300 {
        let a0 = sample_a0(0.0, rng);
        out.copy_from(&random_quaternion_with_a0(a0, rng));
        return;
    }
    // Re Tr(Q M) = k Re Tr(W) = 2 k a0 with W = Q V, V = M / k
    let a0 = sample_a0(2.0 * c * k, rng);
    let w = random_quaternion_with_a0(a0, rng);
    let v = mq.scale_real(1.0 / k);
    mul_adj_into(&w, &v, out);
}

/// Conditional mean `E[Q]` of the SU(2) density `exp(c Re Tr(Q M))`:
/// `(I_2(2ck) / I_1(2ck)) M_q^dagger / k`.
pub fn su2_conditional_mean(m: &Mat, c: f64) -> Mat {
    let mq = quaternion_part(m);
    let k = quaternion_norm(&mq);
    if k < 1e-300 {
        return Mat::zeros(2);
    }
    let alpha = 2.0 * c * k;
    mq.adjoint().scale_real(bessel_ratio(1, alpha) / k)
}

/// Conditional mean of the U(1) density `exp(c Re(q m))`:
/// `(I_1(c|m|) / I_0(c|m|)) conj(m) / |m|`.
pub fn u1_conditional_mean(m: C64, c: f64) -> C64 {
    let k = m.norm();
    if k < 1e-300 {
        return C64::new(0.0, 0.0);
    }
    m.conj() * (bessel_ratio(0, c * k) / k)
}

/// Heat-bath draw from the von Mises density `exp(c Re(q m))` on U(1)
/// (Best and Fisher's rejection sampler).
pub fn u1_heat_bath<R: Rng + ?Sized>(m: C64, c: f64, rng: &mut R) -> C64 {
    let kappa = c * m.norm();
    let phase = -m.arg();
    if kappa < 1e-8 {
        let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        return C64::from_polar(1.0, t);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let z = (std::f64::consts::PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let cc = kappa * (r - f);
        let u2: f64 = rng.random();
        if cc * (2.0 - cc) > u2 || (cc / u2).ln() + 1.0 >= cc {
            let u3: f64 = rng.random();
            let theta = if u3 > 0.5 { f.acos() } else { -f.acos() };
            return C64::from_polar(1.0, theta + phase);
        }
    }
}
