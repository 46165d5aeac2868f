//! Curvature thresholds, the Hessian bound check, the exact two-dimensional
//! Wilson loop oracle, log-linear fits, and the experiments built on them.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainConfig, ChainError, RunOutput};
use crate::group::{exp_map_matrix, haar_sample, random_algebra_matrix, sqrtm, Family, GroupSpec};
use crate::linalg::{Mat, C64};
use crate::sigma::{
    complex_series, gaussian_noise, run_sigma, sigma_action,
    sigma_langevin_step_with_noise, BoundaryFields, EntryKind, EntryObservable,
    SigmaError, SigmaField, SigmaGraph, SigmaKernel, SigmaObservable, SigmaParams,
};
use crate::special::adaptive_simpson;
use crate::stats::{jackknife_covariance_matrix, ComplexEstimate, JACKKNIFE_BINS};
use crate::ym::{run_ym, Algorithm, YmError, YmObservable, YmParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{0} is not supported here")]
    UnsupportedFamily(String),
    #[error("magnitude at abscissa {x} is not positive ({magnitude})")]
    NonPositiveMagnitude { x: f64, magnitude: f64 },
    #[error("a fit needs at least {need} points, got {got}")]
    TooFewPoints { got: usize, need: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Ym(#[from] YmError),
    #[error(transparent)]
    Sigma(#[from] SigmaError),
}

/// `beta*_{SU(N)} = beta*_{U(N)} = 1/(8(d-1))`,
/// `beta*_{SO(N)} = 1/(16(d-1)) - 1/(8N(d-1))`.
pub fn beta_threshold(family: Family, n: usize, d: usize) -> f64 {
    let m = (d - 1) as f64;
    match family {
        Family::SU | Family::U => 1.0 / (8.0 * m),
        Family::SO => 1.0 / (16.0 * m) - 1.0 / (8.0 * n as f64 * m),
    }
}

/// Bakry-Emery constant of the slab σ-model:
/// `K = (N+2)/4 - 1 - 4 N beta (d-1)` for SO(N) and
/// `K = (N+2)/2 - 1 - 4 N beta (d-1)` for SU(N). U(N) is reduced to SU(N)
/// by the disintegration identity and has no constant of its own.
pub fn bakry_emery_constant(family: Family, n: usize, beta: f64, d: usize) -> Result<f64, AnalysisError> {
    let nf = n as f64;
    let ricci = match family {
        Family::SO => (nf + 2.0) / 4.0 - 1.0,
        Family::SU => (nf + 2.0) / 2.0 - 1.0,
        Family::U => {
            return Err(AnalysisError::UnsupportedFamily(format!(
                "U({n}) (use SU({n}) via the U(1) x SU(N) split)"
            )))
        }
    };
    Ok(ricci - 4.0 * nf * beta * (d - 1) as f64)
}

/// `c(beta) = <W_p>` for a single plaquette in two dimensions, by
/// quadrature over the conjugacy class angle:
/// SU(2): `int cos t e^{4 beta cos t} sin^2 t / int e^{4 beta cos t} sin^2 t`,
/// U(1): `int cos t e^{beta cos t} / int e^{beta cos t}`, both over `[0, pi]`.
pub fn d2_wilson_oracle(spec: GroupSpec, beta: f64) -> Result<f64, AnalysisError> {
    let (k, jac): (f64, fn(f64) -> f64) = match (spec.family(), spec.n()) {
        (Family::SU, 2) => (4.0 * beta, |t: f64| t.sin().powi(2)),
        (Family::U, 1) => (beta, |_| 1.0),
        _ => return Err(AnalysisError::UnsupportedFamily(spec.to_string())),
    };
    let w = move |t: f64| (k * t.cos()).exp() * jac(t);
    let num = adaptive_simpson(&|t| t.cos() * w(t), 0.0, PI, 1e-14);
    let den = adaptive_simpson(&w, 0.0, PI, 1e-14);
    Ok(num / den)
}

/// One point of a log-linear fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub x: f64,
    pub magnitude: f64,
    pub stderr: f64,
}

/// `magnitude ~ exp(log_prefactor - rate * x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub log_prefactor: f64,
    pub rate: f64,
    pub r_squared: f64,
    /// Covariance of `(log_prefactor, rate)`.
    pub covariance_of_fit: [[f64; 2]; 2],
    pub weighted: bool,
}

impl FitResult {
    pub fn rate_stderr(&self) -> f64 {
        self.covariance_of_fit[1][1].max(0.0).sqrt()
    }

    pub fn log_prefactor_stderr(&self) -> f64 {
        self.covariance_of_fit[0][0].max(0.0).sqrt()
    }

    /// `rate > k * rate_stderr`.
    pub fn rate_positive_at(&self, k: f64) -> bool {
        self.rate > k * self.rate_stderr()
    }
}

/// Weighted least squares of `log(magnitude)` against `x` with weights
/// `(magnitude / stderr)^2`. Falls back to an unweighted fit, with residual
/// based covariance, if any stderr is zero.
pub fn loglinear_fit(points: &[FitPoint]) -> Result<FitResult, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::TooFewPoints {
            got: points.len(),
            need: 3,
        });
    }
    for p in points {
        if !(p.magnitude > 0.0) || !p.magnitude.is_finite() {
            return Err(AnalysisError::NonPositiveMagnitude {
                x: p.x,
                magnitude: p.magnitude,
            });
        }
    }
    let weighted = points.iter().all(|p| p.stderr > 0.0 && p.stderr.is_finite());
    let ys: Vec<f64> = points.iter().map(|p| p.magnitude.ln()).collect();
    let ws: Vec<f64> = points
        .iter()
        .map(|p| {
            if weighted {
                (p.magnitude / p.stderr).powi(2)
            } else {
                1.0
            }
        })
        .collect();
    let sw: f64 = ws.iter().sum();
    let xbar = points.iter().zip(&ws).map(|(p, w)| w * p.x).sum::<f64>() / sw;
    let ybar = ys.iter().zip(&ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = points.iter().zip(&ws).map(|(p, w)| w * (p.x - xbar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(AnalysisError::InvalidInput("all abscissae coincide".into()));
    }
    let sxy: f64 = points
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((p, y), w)| w * (p.x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = points
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((p, y), w)| w * (y - intercept - slope * p.x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().zip(&ws).map(|(y, w)| w * (y - ybar).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    // (X^T W X)^{-1} for the parameters (intercept, slope)
    let scale = if weighted {
        1.0
    } else {
        ss_res / (points.len() - 2) as f64
    };
    let var_slope = scale / sxx;
    let var_intercept = scale * (1.0 / sw + xbar * xbar / sxx);
    let cov_is = -scale * xbar / sxx;
    // rate = -slope flips the sign of the cross term
    Ok(FitResult {
        log_prefactor: intercept,
        rate: -slope,
        r_squared,
        covariance_of_fit: [[var_intercept, -cov_is], [-cov_is, var_slope]],
        weighted,
    })
}

/// Second derivative of `t -> S((exp(t X_x) Q_x)_x)` at 0 by central
/// differences with steps `h` and `h/2`, combined by one Richardson level.
pub fn hessian_form(
    q: &SigmaField,
    bc: &BoundaryFields,
    params: &SigmaParams,
    dirs: &[Mat],
    h: f64,
) -> f64 {
    let spec = params.spec();
    let f = |t: f64| {
        let mut moved = q.clone();
        for (x, dir) in dirs.iter().enumerate() {
            let e = exp_map_matrix(spec, &dir.scale_real(t));
            let g = crate::group::GroupElement::new_unchecked(spec, &e * q.spin(x));
            moved.set_spin(x, &g).expect("same spec");
        }
        sigma_action(&moved, bc, params)
    };
    let f0 = f(0.0);
    let second = |s: f64| (f(s) - 2.0 * f0 + f(-s)) / (s * s);
    let d1 = second(h);
    let d2 = second(0.5 * h);
    (4.0 * d2 - d1) / 3.0
}

/// Finite-difference step of [`hessian_check`].
pub const HESSIAN_STEP: f64 = 1e-3;

/// Ratios above `1 + HESSIAN_TOL` count as violations.
pub const HESSIAN_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub spec: GroupSpec,
    pub m: usize,
    pub beta: f64,
    pub n_trials: usize,
    pub max_ratio: f64,
    pub violations: usize,
}

/// Side length of the `m`-torus slice used by [`hessian_check`].
pub const HESSIAN_SIDE: usize = 4;

/// Checks `|Hess S_{A,B}(v, v)| <= 4 m N beta |v|^2` on random inputs: Haar
/// U(N) boundaries, Haar spins and Gaussian tangent vectors of random
/// overall scale on the `m`-torus of side 4.
pub fn hessian_check(
    spec: GroupSpec,
    m: usize,
    beta: f64,
    n_trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<HessianReport, AnalysisError> {
    if m == 0 || n_trials == 0 {
        return Err(AnalysisError::InvalidInput("m and n_trials must be >= 1".into()));
    }
    let graph = std::sync::Arc::new(SigmaGraph::torus(m, HESSIAN_SIDE)?);
    let params = SigmaParams::new(spec, beta, graph.clone())?;
    let nv = graph.n_vertices();
    let mut coeffs = vec![0.0; spec.algebra_dim()];
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..n_trials {
        let bc = BoundaryFields::haar(&graph, spec.n(), rng);
        let q = SigmaField::haar(spec, nv, rng);
        let scale = rng.random_range(0.1..2.0);
        let dirs: Vec<Mat> = (0..nv)
            .map(|_| {
                let mut x = Mat::zeros(spec.n());
                random_algebra_matrix(spec, scale, rng, &mut coeffs, &mut x);
                x
            })
            .collect();
        let v2: f64 = dirs.iter().map(|d| d.frobenius_sq()).sum();
        let form = hessian_form(&q, &bc, &params, &dirs, HESSIAN_STEP);
        let bound = 4.0 * m as f64 * params.coupling() * v2;
        let ratio = if bound > 0.0 { form.abs() / bound } else { 0.0 };
        if ratio > 1.0 + HESSIAN_TOL {
            violations += 1;
        }
        max_ratio = max_ratio.max(ratio);
    }
    Ok(HessianReport {
        spec,
        m,
        beta,
        n_trials,
        max_ratio,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopEstimate {
    pub r: usize,
    pub t: usize,
    pub area: usize,
    pub plain: ComplexEstimate,
    pub improved: Option<ComplexEstimate>,
}

impl LoopEstimate {
    /// The estimate used for fitting: improved when available.
    pub fn best(&self) -> &ComplexEstimate {
        self.improved.as_ref().unwrap_or(&self.plain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AreaLawOutcome {
    Fit {
        fit: FitResult,
        /// `c > 0` at three standard errors of the fit.
        rate_positive: bool,
        points_used: usize,
    },
    AllConsistentWithZero,
    TooFewPoints { surviving: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaLawReport {
    pub loops: Vec<LoopEstimate>,
    pub outcome: AreaLawOutcome,
    pub above_threshold: bool,
    pub run: RunOutput,
}

/// Fits `log |<W>|` against area, excluding loops with `|<W>| < 3 stderr`;
/// needs three surviving loops.
pub fn fit_area_law(loops: &[LoopEstimate]) -> Result<AreaLawOutcome, AnalysisError> {
    let points: Vec<FitPoint> = loops
        .iter()
        .filter_map(|l| {
            let e = l.best();
            let mag = e.abs_mean();
            (mag >= 3.0 * e.stderr() && mag > 0.0).then_some(FitPoint {
                x: l.area as f64,
                magnitude: mag,
                stderr: e.stderr(),
            })
        })
        .collect();
    match points.len() {
        0 => Ok(AreaLawOutcome::AllConsistentWithZero),
        1 | 2 => Ok(AreaLawOutcome::TooFewPoints {
            surviving: points.len(),
        }),
        k => {
            let fit = loglinear_fit(&points)?;
            Ok(AreaLawOutcome::Fit {
                rate_positive: fit.rate_positive_at(3.0),
                fit,
                points_used: k,
            })
        }
    }
}

/// Estimates `<W>` for each `R x T` rectangle (averaged over the lattice)
/// and fits the area law. With `improved`, loops are also measured with the
/// conditional-mean estimator where the group supports it.
pub fn area_law_experiment(
    params: &YmParams,
    loops: &[(usize, usize)],
    algorithm: Algorithm,
    improved: bool,
    cfg: &ChainConfig,
) -> Result<AreaLawReport, AnalysisError> {
    let mut obs = Vec::with_capacity(2 * loops.len());
    for &(r, t) in loops {
        obs.push(YmObservable::Rectangle { r, t, improved: false });
        if improved {
            obs.push(YmObservable::Rectangle { r, t, improved: true });
        }
    }
    let (run, _) = run_ym(params, algorithm, &obs, cfg)?;
    let per = if improved { 2 } else { 1 };
    let mut estimates = Vec::with_capacity(loops.len());
    for (k, &(r, t)) in loops.iter().enumerate() {
        let col = 2 * per * k;
        let plain = run.complex_estimate(col, col + 1).map_err(|e| YmError::Chain(e.into()))?;
        let better = if improved {
            Some(run.complex_estimate(col + 2, col + 3).map_err(|e| YmError::Chain(e.into()))?)
        } else {
            None
        };
        estimates.push(LoopEstimate {
            r,
            t,
            area: r * t,
            plain,
            improved: better,
        });
    }
    Ok(AreaLawReport {
        outcome: fit_area_law(&estimates)?,
        loops: estimates,
        above_threshold: params.above_threshold(),
        run,
    })
}

/// `Cov(f^{i1 j1}_{x0}, g^{i2 j2}_y)` for one entry pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryCov {
    pub i1: usize,
    pub j1: usize,
    pub i2: usize,
    pub j2: usize,
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
}

/// All entry-pair covariances between `x0` and `y`, summarized by the
/// Frobenius norm of the block. The norm does not hinge on one entry of
/// the boundary matrices the way a single entry pair does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCov {
    pub distance: usize,
    pub y: usize,
    pub norm: f64,
    pub norm_stderr: f64,
    pub n_samples: usize,
    pub entries: Vec<EntryCov>,
}

/// Covariance scan for one boundary draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDecay {
    pub boundary_id: String,
    pub scan: Vec<DistanceCov>,
    pub fit: Option<FitResult>,
    pub fit_error: Option<String>,
    /// Fitted rate positive at two standard errors.
    pub rate_positive: bool,
    /// Norm at the nearest distance over the norm at the farthest.
    pub near_far_ratio: f64,
}

/// The vertex at `distance` steps from `x0` along slice axis 0.
pub fn vertex_at_distance(graph: &SigmaGraph, x0: usize, distance: usize) -> Result<usize, AnalysisError> {
    let t = graph
        .torus_ref()
        .ok_or_else(|| AnalysisError::InvalidInput("graph is not a torus".into()))?;
    if distance == 0 || distance > t.side() / 2 {
        return Err(AnalysisError::InvalidInput(format!(
            "distance {distance} outside [1, L/2]"
        )));
    }
    Ok(t.shift(x0, 0, distance as isize))
}

/// Scans the covariance block of all matrix entries at `x0` against all
/// entries at `y`, for `y` at the given distances along axis 0, for every
/// boundary draw, and fits the decay of its Frobenius norm.
pub fn covariance_decay_experiment(
    params: &SigmaParams,
    boundaries: &[(String, BoundaryFields)],
    x0: usize,
    distances: &[usize],
    kernel: SigmaKernel,
    cfg: &ChainConfig,
) -> Result<Vec<BoundaryDecay>, AnalysisError> {
    let graph = params.graph().clone();
    let spec = params.spec();
    let n = spec.n();
    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|i| (1..=n).map(move |j| (i, j))).collect();
    let mut obs = Vec::with_capacity(pairs.len() * (distances.len() + 1));
    for &(i, j) in &pairs {
        obs.push(SigmaObservable::Entry(EntryObservable::new(EntryKind::F, x0, i, j, spec, &graph)?));
    }
    let mut ys = Vec::with_capacity(distances.len());
    for &r in distances {
        let y = vertex_at_distance(&graph, x0, r)?;
        ys.push(y);
        for &(i, j) in &pairs {
            obs.push(SigmaObservable::Entry(EntryObservable::new(EntryKind::G, y, i, j, spec, &graph)?));
        }
    }
    let concat = |out: &RunOutput, k: usize| -> Vec<C64> { complex_series(out, k).concat() };
    let mut reports = Vec::with_capacity(boundaries.len());
    for (id, bc) in boundaries {
        // traces are large here; each run is dropped once summarized
        let out = run_sigma(params, bc, kernel, &obs, cfg)?;
        let f: Vec<Vec<C64>> = (0..pairs.len()).map(|k| concat(&out, k)).collect();
        let mut scan = Vec::with_capacity(distances.len());
        for (d, (&r, &y)) in distances.iter().zip(&ys).enumerate() {
            let base = pairs.len() * (d + 1);
            let g: Vec<Vec<C64>> = (0..pairs.len()).map(|k| concat(&out, base + k)).collect();
            let m = jackknife_covariance_matrix(&f, &g, JACKKNIFE_BINS).map_err(ChainError::from).map_err(SigmaError::from)?;
            let mut entries = Vec::with_capacity(pairs.len() * pairs.len());
            for (a, &(i1, j1)) in pairs.iter().enumerate() {
                for (b, &(i2, j2)) in pairs.iter().enumerate() {
                    let (v, se) = m.get(a, b);
                    entries.push(EntryCov { i1, j1, i2, j2, re: v.re, im: v.im, stderr: se });
                }
            }
            scan.push(DistanceCov {
                distance: r,
                y,
                norm: m.norm,
                norm_stderr: m.norm_stderr,
                n_samples: m.n_samples,
                entries,
            });
        }
        let points: Vec<FitPoint> = scan
            .iter()
            .map(|c| FitPoint {
                x: c.distance as f64,
                magnitude: c.norm,
                stderr: c.norm_stderr,
            })
            .collect();
        let (fit, fit_error) = match loglinear_fit(&points) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let near = scan.first().map_or(0.0, |c| c.norm);
        let far = scan.last().map_or(0.0, |c| c.norm);
        reports.push(BoundaryDecay {
            boundary_id: id.clone(),
            rate_positive: fit.is_some_and(|f| f.rate_positive_at(2.0)),
            fit,
            fit_error,
            near_far_ratio: if far > 0.0 { near / far } else { f64::INFINITY },
            scan,
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub times: Vec<f64>,
    /// Mean over pairs of `sum_x |Q_x - Q'_x|^2`.
    pub mean_distance_sq: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: Option<FitResult>,
    /// `2 K`, the prediction for the squared-distance rate, when defined.
    pub two_k: Option<f64>,
    /// Fitted rate within 30% of `2 K`.
    pub within_tolerance: Option<bool>,
}

/// Relative tolerance of the diagnostic comparison with `2 K`.
pub const COUPLING_TOLERANCE: f64 = 0.3;

/// Evolves `n_pairs` pairs of Langevin chains with synchronously coupled
/// noise and fits the decay of the mean squared distance.
///
/// The second chain starts from `exp(separation X_x) Q_x` with Gaussian
/// `X_x`, and its noise is the first chain's noise parallel-transported
/// along the connecting geodesic: `xi'_x = R_x xi_x R_x^{-1}` with
/// `R_x = (Q'_x Q_x^{-1})^{1/2}`.
#[allow(clippy::too_many_arguments)]
pub fn coupling_contraction(
    params: &SigmaParams,
    bc: &BoundaryFields,
    dt: f64,
    horizon: f64,
    n_pairs: usize,
    separation: f64,
    record_every: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CouplingReport, AnalysisError> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(AnalysisError::InvalidInput(format!("dt = {dt} must be in (0, 0.01]")));
    }
    if n_pairs == 0 || record_every == 0 {
        return Err(AnalysisError::InvalidInput("n_pairs and record_every must be >= 1".into()));
    }
    let spec = params.spec();
    let nv = params.graph().n_vertices();
    let steps = (horizon / dt).round() as usize;
    let n_records = steps / record_every + 1;
    let mut sums = vec![0.0; n_records];
    let mut sq = vec![0.0; n_records];
    let mut coeffs = vec![0.0; spec.algebra_dim()];
    for _ in 0..n_pairs {
        let mut q = SigmaField::haar(spec, nv, rng);
        let mut q2 = q.clone();
        if separation > 0.0 {
            for x in 0..nv {
                let mut h = Mat::zeros(spec.n());
                random_algebra_matrix(spec, separation, rng, &mut coeffs, &mut h);
                let moved = &exp_map_matrix(spec, &h) * q.spin(x);
                q2.set_spin(x, &crate::group::GroupElement::new_unchecked(spec, moved))
                    .expect("same spec");
            }
        }
        for step in 0..=steps {
            if step % record_every == 0 {
                let dist: f64 = (0..nv)
                    .map(|x| (q.spin(x) - q2.spin(x)).frobenius_sq())
                    .sum();
                let k = step / record_every;
                sums[k] += dist;
                sq[k] += dist * dist;
            }
            if step == steps {
                break;
            }
            let noise = gaussian_noise(spec, nv, rng);
            let mut noise2 = Vec::with_capacity(nv);
            for (x, xi) in noise.iter().enumerate() {
                if q2.spin(x) == q.spin(x) {
                    // coincident spins stay coincident
                    noise2.push(xi.clone());
                    continue;
                }
                let d = q2.spin(x) * &q.spin(x).adjoint();
                let r = sqrtm(&d).unwrap_or_else(|_| Mat::identity(spec.n()));
                noise2.push(&(&r * xi) * &r.adjoint());
            }
            sigma_langevin_step_with_noise(&mut q, bc, params, dt, &noise)?;
            sigma_langevin_step_with_noise(&mut q2, bc, params, dt, &noise2)?;
        }
    }
    let np = n_pairs as f64;
    let times: Vec<f64> = (0..n_records).map(|k| (k * record_every) as f64 * dt).collect();
    let mean: Vec<f64> = sums.iter().map(|s| s / np).collect();
    let stderr: Vec<f64> = sq
        .iter()
        .zip(&mean)
        .map(|(s2, m)| {
            if n_pairs > 1 {
                ((s2 / np - m * m).max(0.0) * np / (np - 1.0) / np).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let points: Vec<FitPoint> = times
        .iter()
        .zip(&mean)
        .zip(&stderr)
        .skip(1)
        .map(|((&x, &m), &s)| FitPoint {
            x,
            magnitude: m,
            stderr: s,
        })
        .collect();
    let fit = if mean.iter().all(|&m| m > 0.0) {
        loglinear_fit(&points).ok()
    } else {
        None
    };
    let two_k = bakry_emery_constant(spec.family(), spec.n(), params.beta(), slab_d(params))
        .ok()
        .map(|k| 2.0 * k);
    let within_tolerance = match (fit, two_k) {
        (Some(f), Some(k)) if k > 0.0 => Some(((f.rate - k) / k).abs() <= COUPLING_TOLERANCE),
        _ => None,
    };
    Ok(CouplingReport {
        times,
        mean_distance_sq: mean,
        stderr,
        fit,
        two_k,
        within_tolerance,
    })
}

/// Lattice dimension `d = m + 1` of the slab a σ-model graph came from.
fn slab_d(params: &SigmaParams) -> usize {
    params.graph().torus_ref().map(|t| t.dim() + 1).unwrap_or(2)
}

/// Haar draws from `spec` reduced to their normalized traces, as a reference
/// sample for KS tests.
pub fn haar_trace_sample(spec: GroupSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| haar_sample(spec, rng).mat().trace().re / spec.n() as f64)
        .collect()
}
