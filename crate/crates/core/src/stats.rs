//! Monte Carlo error analysis: integrated autocorrelation times, pooled
//! estimates, jackknife covariances and the two-sample KS test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::C64;

/// Minimum post-burn-in measurements for an estimate.
pub const MIN_SAMPLES: usize = 100;

/// Number of jackknife bins for covariance estimates.
pub const JACKKNIFE_BINS: usize = 50;

/// Largest summation window tried when searching for the self-consistent
/// autocorrelation window.
const MAX_WINDOW: usize = 5000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("only {got} measurements, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("series have mismatched lengths")]
    LengthMismatch,
}

/// A Monte Carlo estimate of a real observable.
///
/// `stderr = std * sqrt(2 tau_int / n_samples)` with `tau_int >= 0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub tau_int: f64,
    pub n_samples: usize,
}

impl Estimate {
    /// `|self - other| <= k * sqrt(se_1^2 + se_2^2)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.stderr.hypot(other.stderr)
    }

    /// `|mean - value| <= k * stderr`.
    pub fn consistent_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Real and imaginary parts estimated separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub re: Estimate,
    pub im: Estimate,
}

impl ComplexEstimate {
    pub fn mean(&self) -> C64 {
        C64::new(self.re.mean, self.im.mean)
    }

    pub fn abs_mean(&self) -> f64 {
        self.mean().norm()
    }

    /// Standard error of the complex mean, `sqrt(se_re^2 + se_im^2)`.
    pub fn stderr(&self) -> f64 {
        self.re.stderr.hypot(self.im.stderr)
    }
}

fn check_len(n: usize) -> Result<(), StatsError> {
    if n < MIN_SAMPLES {
        Err(StatsError::InsufficientSamples {
            got: n,
            need: MIN_SAMPLES,
        })
    } else {
        Ok(())
    }
}

/// Integrated autocorrelation time of one or more chains of the same
/// observable, with the self-consistent window: the smallest `W` with
/// `W >= 6 tau(W)`, where `tau(W) = 1/2 + sum_{t=1..W} rho(t)`.
///
/// Autocovariances are pooled over chains around the global mean. Returns 0.5
/// for constant series.
pub fn tau_int(chains: &[&[f64]]) -> f64 {
    let total: usize = chains.iter().map(|c| c.len()).sum();
    if total == 0 {
        return 0.5;
    }
    let mean = chains.iter().flat_map(|c| c.iter()).sum::<f64>() / total as f64;
    let gamma = |t: usize| -> f64 {
        let mut s = 0.0;
        let mut count = 0usize;
        for c in chains {
            if c.len() > t {
                for i in 0..c.len() - t {
                    s += (c[i] - mean) * (c[i + t] - mean);
                }
                count += c.len() - t;
            }
        }
        if count == 0 {
            0.0
        } else {
            s / count as f64
        }
    };
    let g0 = gamma(0);
    if g0 <= 0.0 || !g0.is_finite() {
        return 0.5;
    }
    let shortest = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let max_w = (shortest / 2).min(MAX_WINDOW);
    let mut tau = 0.5;
    for w in 1..=max_w {
        tau += gamma(w) / g0;
        if w as f64 >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Pooled estimate over chains of one real observable.
pub fn estimate(chains: &[&[f64]]) -> Result<Estimate, StatsError> {
    let n: usize = chains.iter().map(|c| c.len()).sum();
    check_len(n)?;
    let mean = chains.iter().flat_map(|c| c.iter()).sum::<f64>() / n as f64;
    let var = chains
        .iter()
        .flat_map(|c| c.iter())
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    let tau = tau_int(chains);
    Ok(Estimate {
        mean,
        stderr: (var * 2.0 * tau / n as f64).sqrt(),
        tau_int: tau,
        n_samples: n,
    })
}

/// Estimate of one series; convenience wrapper over [`estimate`].
pub fn estimate_series(xs: &[f64]) -> Result<Estimate, StatsError> {
    estimate(&[xs])
}

/// A covariance estimate with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovValue {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl CovValue {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// `Cov(f, g) = E[f g] - E[f] E[g]` (no conjugation) from paired samples,
/// with standard error from a delete-one-bin jackknife over `n_bins`
/// contiguous bins of the concatenated chains.
pub fn jackknife_covariance(
    f: &[&[C64]],
    g: &[&[C64]],
    n_bins: usize,
) -> Result<CovValue, StatsError> {
    if f.len() != g.len() || f.iter().zip(g).any(|(a, b)| a.len() != b.len()) {
        return Err(StatsError::LengthMismatch);
    }
    let fs: Vec<C64> = f.iter().flat_map(|c| c.iter().copied()).collect();
    let gs: Vec<C64> = g.iter().flat_map(|c| c.iter().copied()).collect();
    let n = fs.len();
    check_len(n)?;
    let bins = n_bins.clamp(2, n);
    let mut sums = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)); bins];
    let mut counts = vec![0usize; bins];
    for i in 0..n {
        let b = i * bins / n;
        sums[b].0 += fs[i];
        sums[b].1 += gs[i];
        sums[b].2 += fs[i] * gs[i];
        counts[b] += 1;
    }
    let tot = sums.iter().fold(
        (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
        |acc, s| (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2),
    );
    let nf = n as f64;
    let full = tot.2 / nf - (tot.0 / nf) * (tot.1 / nf);
    let leave_out: Vec<C64> = (0..bins)
        .map(|b| {
            let m = (n - counts[b]) as f64;
            let ef = (tot.0 - sums[b].0) / m;
            let eg = (tot.1 - sums[b].1) / m;
            let efg = (tot.2 - sums[b].2) / m;
            efg - ef * eg
        })
        .collect();
    let bar = leave_out.iter().sum::<C64>() / bins as f64;
    let var = leave_out.iter().map(|c| (c - bar).norm_sqr()).sum::<f64>() * (bins - 1) as f64
        / bins as f64;
    Ok(CovValue {
        re: full.re,
        im: full.im,
        stderr: var.sqrt(),
        n_samples: n,
    })
}

/// Covariance block `C_ab = Cov(f_a, g_b)` between two families of
/// observables, each entry and the Frobenius norm `||C||_F` with
/// delete-one-bin jackknife errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub values: Vec<C64>,
    pub stderr: Vec<f64>,
    pub norm: f64,
    pub norm_stderr: f64,
    pub n_samples: usize,
}

impl CovMatrix {
    pub fn get(&self, a: usize, b: usize) -> (C64, f64) {
        let k = a * self.cols + b;
        (self.values[k], self.stderr[k])
    }
}

/// As [`jackknife_covariance`] for every pair `(f_a, g_b)` at once. Each
/// observable is given as its series concatenated over chains; all series
/// must have the same length.
pub fn jackknife_covariance_matrix(
    f: &[Vec<C64>],
    g: &[Vec<C64>],
    n_bins: usize,
) -> Result<CovMatrix, StatsError> {
    let n = f.first().or(g.first()).map_or(0, Vec::len);
    if f.is_empty() || g.is_empty() || f.iter().chain(g).any(|s| s.len() != n) {
        return Err(StatsError::LengthMismatch);
    }
    check_len(n)?;
    let (ra, cb) = (f.len(), g.len());
    let bins = n_bins.clamp(2, n);
    let zero = C64::new(0.0, 0.0);
    // per bin: sums of f_a, g_b, f_a g_b
    let mut sf = vec![vec![zero; ra]; bins];
    let mut sg = vec![vec![zero; cb]; bins];
    let mut sfg = vec![vec![zero; ra * cb]; bins];
    let mut counts = vec![0usize; bins];
    for i in 0..n {
        let b = i * bins / n;
        counts[b] += 1;
        for a in 0..ra {
            let fa = f[a][i];
            sf[b][a] += fa;
            for (c, gc) in g.iter().enumerate() {
                sfg[b][a * cb + c] += fa * gc[i];
            }
        }
        for (c, gc) in g.iter().enumerate() {
            sg[b][c] += gc[i];
        }
    }
    let total = |v: &[Vec<C64>], len: usize| -> Vec<C64> {
        (0..len).map(|k| v.iter().map(|row| row[k]).sum()).collect()
    };
    let (tf, tg, tfg) = (total(&sf, ra), total(&sg, cb), total(&sfg, ra * cb));
    let block = |skip: Option<usize>| -> Vec<C64> {
        let m = (n - skip.map_or(0, |b| counts[b])) as f64;
        let less = |t: &[C64], s: &[Vec<C64>], k: usize| t[k] - skip.map_or(zero, |b| s[b][k]);
        (0..ra * cb)
            .map(|k| {
                let (a, c) = (k / cb, k % cb);
                less(&tfg, &sfg, k) / m - (less(&tf, &sf, a) / m) * (less(&tg, &sg, c) / m)
            })
            .collect()
    };
    let frob = |c: &[C64]| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let full = block(None);
    let leave_out: Vec<Vec<C64>> = (0..bins).map(|b| block(Some(b))).collect();
    let scale = (bins - 1) as f64 / bins as f64;
    let stderr = (0..ra * cb)
        .map(|k| {
            let bar = leave_out.iter().map(|c| c[k]).sum::<C64>() / bins as f64;
            (leave_out.iter().map(|c| (c[k] - bar).norm_sqr()).sum::<f64>() * scale).sqrt()
        })
        .collect();
    let norms: Vec<f64> = leave_out.iter().map(|c| frob(c)).collect();
    let nbar = norms.iter().sum::<f64>() / bins as f64;
    let norm_stderr = (norms.iter().map(|x| (x - nbar).powi(2)).sum::<f64>() * scale).sqrt();
    Ok(CovMatrix {
        rows: ra,
        cols: cb,
        norm: frob(&full),
        values: full,
        stderr,
        norm_stderr,
        n_samples: n,
    })
}

/// Outcome of a two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub passed: bool,
}

/// Two-sample KS test at level 0.01: passes when
/// `D <= 1.628 sqrt((n + m) / (n m))`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let critical = 1.628 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt();
    KsResult {
        statistic: d,
        critical,
        passed: d <= critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_observable_has_zero_error() {
        let xs = vec![1.0; 500];
        let e = estimate_series(&xs).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.tau_int, 0.5);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            estimate_series(&[0.0; 99]).unwrap_err(),
            StatsError::InsufficientSamples { got: 99, need: 100 }
        );
    }

    #[test]
    fn white_noise_tau_is_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..50_000).map(|_| rng.sample(StandardNormal)).collect();
        let e = estimate_series(&xs).unwrap();
        assert!((e.tau_int - 0.5).abs() < 0.05, "{}", e.tau_int);
        assert!((e.stderr - (1.0f64 / 50_000.0).sqrt()).abs() < 5e-4);
    }

    /// AR(1) with coefficient a has tau_int = (1 + a) / (2 (1 - a)).
    #[test]
    fn ar1_tau_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: f64 = 0.8;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..400_000)
            .map(|_| {
                x = a * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let tau = tau_int(&[&xs]);
        let exact = (1.0 + a) / (2.0 * (1.0 - a));
        assert!((tau - exact).abs() / exact < 0.1, "{tau} vs {exact}");
    }

    #[test]
    fn jackknife_recovers_known_covariance() {
        // f = u + v, g = u - w with independent unit Gaussians: Cov(f, g) = Var(u) = 1
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40_000;
        let (mut f, mut g) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            let w: f64 = rng.sample(StandardNormal);
            f.push(C64::new(u + v, 0.0));
            g.push(C64::new(u - w, 0.0));
        }
        let c = jackknife_covariance(&[&f], &[&g], JACKKNIFE_BINS).unwrap();
        assert!((c.re - 1.0).abs() < 3.0 * c.stderr, "{c:?}");
        assert!(c.stderr > 0.0 && c.stderr < 0.03);
        assert_eq!(c.im, 0.0);
    }

    #[test]
    fn ks_accepts_same_law_and_rejects_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
        assert!(ks_two_sample(&a, &b).passed);
        let c: Vec<f64> = b.iter().map(|x| x + 0.1).collect();
        assert!(!ks_two_sample(&a, &c).passed);
    }

    #[test]
    fn covariance_matrix_agrees_with_pairwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 2000;
        let base: Vec<C64> = (0..n).map(|_| C64::new(rng.random::<f64>(), rng.random::<f64>())).collect();
        let f = vec![base.clone(), base.iter().map(|z| z * 2.0).collect()];
        let g = vec![base.iter().map(|z| z.conj()).collect::<Vec<_>>(), (0..n).map(|_| C64::new(rng.random(), 0.0)).collect()];
        let m = jackknife_covariance_matrix(&f, &g, JACKKNIFE_BINS).unwrap();
        let mut sq = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let p = jackknife_covariance(&[&f[a]], &[&g[b]], JACKKNIFE_BINS).unwrap();
                let (v, se) = m.get(a, b);
                assert!((v - p.value()).norm() < 1e-13);
                assert!((se - p.stderr).abs() < 1e-13);
                sq += v.norm_sqr();
            }
        }
        assert!((m.norm - sq.sqrt()).abs() < 1e-13);
        assert!(m.norm_stderr > 0.0);
    }
}
