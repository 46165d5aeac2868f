//! The σ-model on a slab slice with boundary fields `A`, `B`:
//! `S_{A,B}(Q) = N beta sum_{e=(x,y)} Re Tr(Q_x A_e Q_y^{-1} B_e^{-1})`,
//! sampled from `exp(S_{A,B}(Q)) dQ`.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{run_chains_with_states, Chain, ChainConfig, ChainError, RunOutput};
use crate::group::{
    algebra_basis, center_element, center_subgroup, exp_map_matrix, haar_sample,
    random_algebra_matrix, reunitarize, AlgebraElement, Family, GroupElement, GroupError,
    GroupSpec, CONSTRAINT_TOL,
};
use crate::lattice::{torus_edges, LatticeError, SlabGeometry, SliceEdge, Torus, TorusLattice};
use crate::linalg::{mul_adj_into, mul_into, re_tr_mul, C64, Mat};
use crate::stats::{jackknife_covariance, CovValue, JACKKNIFE_BINS};
use crate::su2;
use crate::ym::{accept_probability, resolve_update, tune_scale, Algorithm, GaugeField, Update};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SigmaError {
    #[error("beta must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error("Langevin step {0} exceeds the maximum 0.1")]
    StepTooLarge(f64),
    #[error("Langevin step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("{0} has trivial center; one-point vanishing does not apply")]
    NoCenter(GroupSpec),
    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("matrix index ({i}, {j}) outside 1..={n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("boundary matrix on edge {edge} is not unitary (residual {residual:.3e})")]
    NonUnitaryBoundary { edge: usize, residual: f64 },
    #[error("element belongs to {got}, expected {expected}")]
    SpecMismatch { expected: GroupSpec, got: GroupSpec },
    #[error("the disintegration sampler needs a U(N) spin group with N >= 2, got {0}")]
    NotUnitaryFamily(GroupSpec),
    #[error("proposal scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Ym(#[from] crate::ym::YmError),
}

/// Vertices and positively oriented edges of a slice. Self-loops are dropped.
#[derive(Debug, Clone)]
pub struct SigmaGraph {
    n_vertices: usize,
    edges: Vec<SliceEdge>,
    /// For each vertex, `(edge, vertex is the tail)`.
    incident: Vec<Vec<(usize, bool)>>,
    torus: Option<Torus>,
}

impl SigmaGraph {
    pub fn from_edges(n_vertices: usize, edges: &[SliceEdge]) -> Result<Self, SigmaError> {
        let mut kept = Vec::with_capacity(edges.len());
        let mut incident = vec![Vec::new(); n_vertices];
        for e in edges {
            for v in [e.tail, e.head] {
                if v >= n_vertices {
                    return Err(SigmaError::VertexOutOfRange {
                        vertex: v,
                        n: n_vertices,
                    });
                }
            }
            if e.tail == e.head {
                continue;
            }
            incident[e.tail].push((kept.len(), true));
            incident[e.head].push((kept.len(), false));
            kept.push(*e);
        }
        Ok(Self {
            n_vertices,
            edges: kept,
            incident,
            torus: None,
        })
    }

    /// The `dim`-torus of side `side` (`side = 1` has no edges).
    pub fn torus(dim: usize, side: usize) -> Result<Self, SigmaError> {
        let torus = Torus::new(dim, side)?;
        let mut g = Self::from_edges(torus.n_vertices(), &torus_edges(&torus))?;
        g.torus = Some(torus);
        Ok(g)
    }

    pub fn from_slab(slab: &SlabGeometry) -> Self {
        let torus = slab.slice().clone();
        let mut g = Self::from_edges(torus.n_vertices(), slab.slice_edges())
            .expect("slab edges are in range");
        g.torus = Some(torus);
        g
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[SliceEdge] {
        &self.edges
    }

    pub fn incident(&self, x: usize) -> &[(usize, bool)] {
        &self.incident[x]
    }

    pub fn torus_ref(&self) -> Option<&Torus> {
        self.torus.as_ref()
    }

    /// Torus graph distance, for graphs built from a torus.
    pub fn distance(&self, x: usize, y: usize) -> Option<usize> {
        self.torus.as_ref().map(|t| t.distance(x, y))
    }
}

/// `U(N)`-valued boundary matrices on every slice edge, whatever the spin
/// group.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFields {
    n: usize,
    a: Vec<Mat>,
    b: Vec<Mat>,
}

/// The boundary draws used as a stand-in for "uniformly in A, B".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryEnsemble {
    Identity,
    Haar,
    /// `A_e = z_e I` with `z_e` uniform on the spin group's center
    /// subgroup, `B = I`: frustrated, maximally non-generic boundaries.
    Twisted,
}

impl BoundaryFields {
    pub fn identity(graph: &SigmaGraph, n: usize) -> Self {
        let m = graph.n_edges();
        Self {
            n,
            a: vec![Mat::identity(n); m],
            b: vec![Mat::identity(n); m],
        }
    }

    pub fn haar<R: Rng + ?Sized>(graph: &SigmaGraph, n: usize, rng: &mut R) -> Self {
        let spec = GroupSpec::u(n);
        let m = graph.n_edges();
        let a = (0..m).map(|_| haar_sample(spec, rng).into_mat()).collect();
        let b = (0..m).map(|_| haar_sample(spec, rng).into_mat()).collect();
        Self { n, a, b }
    }

    pub fn twisted<R: Rng + ?Sized>(graph: &SigmaGraph, spin: GroupSpec, rng: &mut R) -> Self {
        let n = spin.n();
        let phases = center_subgroup(spin);
        let m = graph.n_edges();
        let a = (0..m)
            .map(|_| Mat::scalar(n, phases[rng.random_range(0..phases.len())]))
            .collect();
        Self {
            n,
            a,
            b: vec![Mat::identity(n); m],
        }
    }

    pub fn draw<R: Rng + ?Sized>(
        ensemble: BoundaryEnsemble,
        graph: &SigmaGraph,
        spin: GroupSpec,
        rng: &mut R,
    ) -> Self {
        match ensemble {
            BoundaryEnsemble::Identity => Self::identity(graph, spin.n()),
            BoundaryEnsemble::Haar => Self::haar(graph, spin.n(), rng),
            BoundaryEnsemble::Twisted => Self::twisted(graph, spin, rng),
        }
    }

    /// Validates unitarity of every matrix.
    pub fn from_matrices(graph: &SigmaGraph, a: Vec<Mat>, b: Vec<Mat>) -> Result<Self, SigmaError> {
        for side in [&a, &b] {
            if side.len() != graph.n_edges() {
                return Err(SigmaError::SizeMismatch {
                    expected: graph.n_edges(),
                    got: side.len(),
                });
            }
        }
        let n = a.first().map(|m| m.n()).unwrap_or(1);
        for (edge, m) in a.iter().chain(&b).enumerate() {
            if m.n() != n {
                return Err(SigmaError::SizeMismatch {
                    expected: n,
                    got: m.n(),
                });
            }
            let residual = m.unitarity_residual();
            if residual > CONSTRAINT_TOL {
                return Err(SigmaError::NonUnitaryBoundary {
                    edge: edge % graph.n_edges().max(1),
                    residual,
                });
            }
        }
        Ok(Self { n, a, b })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self, e: usize) -> &Mat {
        &self.a[e]
    }

    pub fn b(&self, e: usize) -> &Mat {
        &self.b[e]
    }

    pub fn a_all(&self) -> &[Mat] {
        &self.a
    }

    pub fn b_all(&self) -> &[Mat] {
        &self.b
    }

    /// `A_e -> U A_e U^dagger`, `B_e -> U B_e U^dagger`.
    pub fn conjugated(&self, u: &Mat) -> Self {
        let conj = |m: &Mat| &(u * m) * &u.adjoint();
        Self {
            n: self.n,
            a: self.a.iter().map(conj).collect(),
            b: self.b.iter().map(conj).collect(),
        }
    }

    /// `A_e -> z_x conj(z_y) A_e` for `e = (x, y)`.
    pub fn rephased(&self, graph: &SigmaGraph, z: &[C64]) -> Self {
        let a = graph
            .edges()
            .iter()
            .zip(&self.a)
            .map(|(e, m)| m.scale(z[e.tail] * z[e.head].conj()))
            .collect();
        Self {
            n: self.n,
            a,
            b: self.b.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SigmaParams {
    spec: GroupSpec,
    beta: f64,
    graph: Arc<SigmaGraph>,
}

impl SigmaParams {
    pub fn new(spec: GroupSpec, beta: f64, graph: Arc<SigmaGraph>) -> Result<Self, SigmaError> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(SigmaError::InvalidBeta(beta));
        }
        Ok(Self { spec, beta, graph })
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn graph(&self) -> &Arc<SigmaGraph> {
        &self.graph
    }

    pub fn coupling(&self) -> f64 {
        self.spec.n() as f64 * self.beta
    }

    pub fn with_spec(&self, spec: GroupSpec) -> Self {
        Self {
            spec,
            beta: self.beta,
            graph: self.graph.clone(),
        }
    }
}

/// Spins on slice vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaField {
    spec: GroupSpec,
    spins: Vec<Mat>,
}

impl SigmaField {
    pub fn identity(spec: GroupSpec, n_vertices: usize) -> Self {
        Self {
            spec,
            spins: vec![Mat::identity(spec.n()); n_vertices],
        }
    }

    pub fn haar<R: Rng + ?Sized>(spec: GroupSpec, n_vertices: usize, rng: &mut R) -> Self {
        Self {
            spec,
            spins: (0..n_vertices)
                .map(|_| haar_sample(spec, rng).into_mat())
                .collect(),
        }
    }

    pub fn from_elements(spec: GroupSpec, elements: Vec<GroupElement>) -> Result<Self, SigmaError> {
        let mut spins = Vec::with_capacity(elements.len());
        for g in elements {
            if g.spec() != spec {
                return Err(SigmaError::SpecMismatch {
                    expected: spec,
                    got: g.spec(),
                });
            }
            spins.push(g.into_mat());
        }
        Ok(Self { spec, spins })
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spin(&self, x: usize) -> &Mat {
        &self.spins[x]
    }

    pub fn spins(&self) -> &[Mat] {
        &self.spins
    }

    pub fn element(&self, x: usize) -> GroupElement {
        GroupElement::new_unchecked(self.spec, self.spins[x].clone())
    }

    pub fn set_spin(&mut self, x: usize, g: &GroupElement) -> Result<(), SigmaError> {
        if g.spec() != self.spec {
            return Err(SigmaError::SpecMismatch {
                expected: self.spec,
                got: g.spec(),
            });
        }
        self.spins[x].copy_from(g.mat());
        Ok(())
    }

    /// `Q_x -> z Q_x` for a scalar `z` at every vertex.
    pub fn scaled(&self, z: C64) -> Self {
        Self {
            spec: self.spec,
            spins: self.spins.iter().map(|m| m.scale(z)).collect(),
        }
    }

    /// `Q_x -> U Q_x U^dagger`.
    pub fn conjugated(&self, u: &Mat) -> Self {
        Self {
            spec: self.spec,
            spins: self.spins.iter().map(|m| &(u * m) * &u.adjoint()).collect(),
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.spins
            .iter()
            .map(|m| crate::group::constraint_residual(self.spec, m))
            .fold(0.0, f64::max)
    }

    fn reunitarize(&mut self) {
        for m in &mut self.spins {
            *m = reunitarize(self.spec, m);
        }
    }
}

/// `Re Tr(Q_x A_e Q_y^{-1} B_e^{-1})` for one edge.
pub fn edge_term(spins: &[Mat], bc: &BoundaryFields, e: usize, edge: &SliceEdge) -> f64 {
    let n = bc.n;
    let mut t1 = Mat::zeros(n);
    let mut t2 = Mat::zeros(n);
    mul_into(&spins[edge.tail], &bc.a[e], &mut t1);
    mul_adj_into(&t1, &spins[edge.head], &mut t2);
    mul_adj_into(&t2, &bc.b[e], &mut t1);
    t1.trace().re
}

pub fn sigma_action(q: &SigmaField, bc: &BoundaryFields, params: &SigmaParams) -> f64 {
    let sum: f64 = params
        .graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| edge_term(&q.spins, bc, e, edge))
        .sum();
    params.coupling() * sum
}

struct EnvScratch {
    t1: Mat,
    t2: Mat,
}

impl EnvScratch {
    fn new(n: usize) -> Self {
        Self {
            t1: Mat::zeros(n),
            t2: Mat::zeros(n),
        }
    }
}

/// Local environment `M_x`: `S = N beta Re Tr(Q_x M_x) + (terms without Q_x)`.
/// Tail edges contribute `A_e Q_y^dagger B_e^dagger`, head edges
/// `A_e^dagger Q_w^dagger B_e`.
fn local_env_into(
    spins: &[Mat],
    bc: &BoundaryFields,
    graph: &SigmaGraph,
    x: usize,
    s: &mut EnvScratch,
    out: &mut Mat,
) {
    for z in out.data_mut() {
        *z = C64::new(0.0, 0.0);
    }
    for &(e, is_tail) in graph.incident(x) {
        let edge = graph.edges[e];
        if is_tail {
            mul_adj_into(&bc.a[e], &spins[edge.head], &mut s.t1);
            mul_adj_into(&s.t1, &bc.b[e], &mut s.t2);
        } else {
            // A^dagger Q_w^dagger B = (Q_w A)^dagger B
            mul_into(&spins[edge.tail], &bc.a[e], &mut s.t1);
            crate::linalg::adj_mul_into(&s.t1, &bc.b[e], &mut s.t2);
        }
        out.add_assign(&s.t2);
    }
}

pub fn local_environment(q: &SigmaField, bc: &BoundaryFields, graph: &SigmaGraph, x: usize) -> Mat {
    let n = q.spec.n();
    let mut out = Mat::zeros(n);
    local_env_into(&q.spins, bc, graph, x, &mut EnvScratch::new(n), &mut out);
    out
}

/// Gradient of the action in the spin at `x`, as coefficients
/// `<grad_x S, T_a> = d/dt S(exp(t T_a) Q_x) = N beta Re Tr(T_a Q_x M_x)`.
pub fn sigma_gradient(
    q: &SigmaField,
    bc: &BoundaryFields,
    params: &SigmaParams,
    x: usize,
) -> AlgebraElement {
    let basis: Vec<Mat> = algebra_basis(params.spec)
        .iter()
        .map(|b| b.to_matrix())
        .collect();
    let mut coeffs = vec![0.0; basis.len()];
    gradient_coeffs(q, bc, params, x, &basis, &mut coeffs);
    AlgebraElement::from_coeffs(params.spec, coeffs)
}

fn gradient_coeffs(
    q: &SigmaField,
    bc: &BoundaryFields,
    params: &SigmaParams,
    x: usize,
    basis: &[Mat],
    out: &mut [f64],
) {
    let m = local_environment(q, bc, &params.graph, x);
    let qm = q.spin(x) * &m;
    let c = params.coupling();
    for (o, t) in out.iter_mut().zip(basis) {
        *o = c * re_tr_mul(t, &qm);
    }
}

/// Gradient as an algebra matrix `sum_a g_a T_a` at every vertex.
fn gradient_matrices(q: &SigmaField, bc: &BoundaryFields, params: &SigmaParams) -> Vec<Mat> {
    let basis: Vec<Mat> = algebra_basis(params.spec)
        .iter()
        .map(|b| b.to_matrix())
        .collect();
    let mut coeffs = vec![0.0; basis.len()];
    let mut out = Vec::with_capacity(q.len());
    for x in 0..q.len() {
        gradient_coeffs(q, bc, params, x, &basis, &mut coeffs);
        let mut g = Mat::zeros(params.spec.n());
        crate::group::algebra_matrix_into(params.spec, &coeffs, &mut g);
        out.push(g);
    }
    out
}

/// Largest allowed Langevin step.
pub const MAX_DT: f64 = 0.1;

fn check_dt(dt: f64) -> Result<(), SigmaError> {
    if dt > MAX_DT {
        return Err(SigmaError::StepTooLarge(dt));
    }
    if !(dt > 0.0) {
        return Err(SigmaError::InvalidStep(dt));
    }
    Ok(())
}

/// Standard Gaussian algebra elements, one per vertex, as matrices.
pub fn gaussian_noise<R: Rng + ?Sized>(spec: GroupSpec, n_vertices: usize, rng: &mut R) -> Vec<Mat> {
    let mut coeffs = vec![0.0; spec.algebra_dim()];
    (0..n_vertices)
        .map(|_| {
            let mut m = Mat::zeros(spec.n());
            random_algebra_matrix(spec, 1.0, rng, &mut coeffs, &mut m);
            m
        })
        .collect()
}

/// Geodesic Euler-Maruyama step with given noise `xi_x`:
/// `Q_x <- exp(dt grad_x S + sqrt(2 dt) xi_x) Q_x`, synchronous over
/// vertices, then re-projected.
pub fn sigma_langevin_step_with_noise(
    q: &mut SigmaField,
    bc: &BoundaryFields,
    params: &SigmaParams,
    dt: f64,
    noise: &[Mat],
) -> Result<(), SigmaError> {
    check_dt(dt)?;
    if noise.len() != q.len() {
        return Err(SigmaError::SizeMismatch {
            expected: q.len(),
            got: noise.len(),
        });
    }
    let grads = gradient_matrices(q, bc, params);
    let amp = (2.0 * dt).sqrt();
    let n = params.spec.n();
    let mut out = Mat::zeros(n);
    for (x, (g, xi)) in grads.iter().zip(noise).enumerate() {
        let mut step = g.scale_real(dt);
        step.axpy(C64::new(amp, 0.0), xi);
        let e = exp_map_matrix(params.spec, &step);
        mul_into(&e, &q.spins[x], &mut out);
        q.spins[x].copy_from(&out);
    }
    q.reunitarize();
    Ok(())
}

pub fn sigma_langevin_step<R: Rng + ?Sized>(
    q: &mut SigmaField,
    bc: &BoundaryFields,
    params: &SigmaParams,
    rng: &mut R,
    dt: f64,
) -> Result<(), SigmaError> {
    check_dt(dt)?;
    let noise = gaussian_noise(params.spec, q.len(), rng);
    sigma_langevin_step_with_noise(q, bc, params, dt, &noise)
}

/// Single-site sampler for `mu_{A,B}`.
#[derive(Debug, Clone)]
pub struct SigmaSampler {
    params: SigmaParams,
    bc: BoundaryFields,
    field: SigmaField,
    update: Update,
    scale: f64,
    accepted: u64,
    proposed: u64,
}

impl SigmaSampler {
    pub fn new(
        params: SigmaParams,
        bc: BoundaryFields,
        field: SigmaField,
        algorithm: Algorithm,
    ) -> Result<Self, SigmaError> {
        let g = &params.graph;
        if field.len() != g.n_vertices() {
            return Err(SigmaError::SizeMismatch {
                expected: g.n_vertices(),
                got: field.len(),
            });
        }
        if bc.a.len() != g.n_edges() || bc.n != params.spec.n() {
            return Err(SigmaError::SizeMismatch {
                expected: g.n_edges(),
                got: bc.a.len(),
            });
        }
        if field.spec != params.spec {
            return Err(SigmaError::SpecMismatch {
                expected: params.spec,
                got: field.spec,
            });
        }
        let update = resolve_update(params.spec, params.beta, algorithm)?;
        Ok(Self {
            params,
            bc,
            field,
            update,
            scale: 0.5,
            accepted: 0,
            proposed: 0,
        })
    }

    pub fn field(&self) -> &SigmaField {
        &self.field
    }

    pub fn params(&self) -> &SigmaParams {
        &self.params
    }

    pub fn boundary(&self) -> &BoundaryFields {
        &self.bc
    }

    pub fn update(&self) -> Update {
        self.update
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn set_boundary(&mut self, bc: BoundaryFields) {
        debug_assert_eq!(bc.a.len(), self.bc.a.len());
        self.bc = bc;
    }

    pub fn acceptance(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }

    /// One sweep over vertices in index order.
    pub fn sweep(&mut self, rng: &mut ChaCha8Rng, tune: bool) -> f64 {
        let spec = self.params.spec;
        let n = spec.n();
        let nv = self.field.len();
        if nv == 0 {
            return 1.0;
        }
        let c = self.params.coupling();
        let graph = self.params.graph.clone();
        let mut s = EnvScratch::new(n);
        let mut m = Mat::zeros(n);
        match self.update {
            Update::Haar => {
                for q in &mut self.field.spins {
                    *q = haar_sample(spec, rng).into_mat();
                }
                1.0
            }
            Update::HeatBathSu2 => {
                let mut out = Mat::zeros(n);
                for x in 0..nv {
                    local_env_into(&self.field.spins, &self.bc, &graph, x, &mut s, &mut m);
                    su2::su2_heat_bath(&m, c, rng, &mut out);
                    self.field.spins[x].copy_from(&out);
                }
                1.0
            }
            Update::HeatBathU1 => {
                for x in 0..nv {
                    local_env_into(&self.field.spins, &self.bc, &graph, x, &mut s, &mut m);
                    let z = su2::u1_heat_bath(m.get(0, 0), c, rng);
                    self.field.spins[x].set(0, 0, z);
                }
                1.0
            }
            Update::Metropolis => {
                let mut coeffs = vec![0.0; spec.algebra_dim()];
                let mut x_mat = Mat::zeros(n);
                let mut prop = Mat::zeros(n);
                let mut acc = 0usize;
                for x in 0..nv {
                    local_env_into(&self.field.spins, &self.bc, &graph, x, &mut s, &mut m);
                    random_algebra_matrix(spec, self.scale, rng, &mut coeffs, &mut x_mat);
                    let step = exp_map_matrix(spec, &x_mat);
                    mul_into(&step, &self.field.spins[x], &mut prop);
                    let delta = c * (re_tr_mul(&prop, &m) - re_tr_mul(&self.field.spins[x], &m));
                    let u: f64 = rng.random();
                    if u < accept_probability(delta) {
                        self.field.spins[x].copy_from(&prop);
                        acc += 1;
                    }
                }
                self.field.reunitarize();
                let rate = acc as f64 / nv as f64;
                if tune {
                    self.scale = tune_scale(self.scale, rate);
                } else {
                    self.accepted += acc as u64;
                    self.proposed += nv as u64;
                }
                rate
            }
        }
    }
}

/// Joint sampler of `(z, Q~)` in `U(1)^V x SU(N)^V` with density
/// `exp(S_{A,B}(z Q~))`, whose image `Q = z Q~` is distributed as
/// `mu_{A,B}` on `U(N)^V`.
///
/// Given `z`, `Q~` has law `mu_{A~,B}` with `A~_e = z_x conj(z_y) A_e`; it is
/// updated by a [`SigmaSampler`] sweep over SU(N). Given `Q~`, each `z_x` is
/// redrawn exactly from its von Mises conditional.
#[derive(Debug, Clone)]
pub struct DisintegrationChain {
    params: SigmaParams,
    bc: BoundaryFields,
    z: Vec<C64>,
    inner: SigmaSampler,
}

impl DisintegrationChain {
    pub fn new(
        params: SigmaParams,
        bc: BoundaryFields,
        algorithm: Algorithm,
    ) -> Result<Self, SigmaError> {
        let spec = params.spec;
        if spec.family() != Family::U || spec.n() < 2 {
            return Err(SigmaError::NotUnitaryFamily(spec));
        }
        let su = GroupSpec::su(spec.n());
        let nv = params.graph.n_vertices();
        let z = vec![C64::new(1.0, 0.0); nv];
        let inner = SigmaSampler::new(
            params.with_spec(su),
            bc.clone(),
            SigmaField::identity(su, nv),
            algorithm,
        )?;
        Ok(Self {
            params,
            bc,
            z,
            inner,
        })
    }

    pub fn phases(&self) -> &[C64] {
        &self.z
    }

    /// The current U(N) configuration `z_x Q~_x`.
    pub fn field(&self) -> SigmaField {
        SigmaField {
            spec: self.params.spec,
            spins: self
                .inner
                .field
                .spins
                .iter()
                .zip(&self.z)
                .map(|(q, &z)| q.scale(z))
                .collect(),
        }
    }

    pub fn sweep(&mut self, rng: &mut ChaCha8Rng, tune: bool) {
        let graph = self.params.graph.clone();
        self.inner.set_boundary(self.bc.rephased(&graph, &self.z));
        self.inner.sweep(rng, tune);
        let n = self.params.spec.n();
        let c = self.params.coupling();
        let mut full = self.field();
        let mut s = EnvScratch::new(n);
        let mut m = Mat::zeros(n);
        for x in 0..self.z.len() {
            local_env_into(&full.spins, &self.bc, &graph, x, &mut s, &mut m);
            // S = c Re(z_x Tr(Q~_x M_x)) + const
            let w = crate::linalg::tr_mul(&self.inner.field.spins[x], &m);
            let z = su2::u1_heat_bath(w, c, rng);
            self.z[x] = z;
            full.spins[x] = self.inner.field.spins[x].scale(z);
        }
    }

    pub fn acceptance(&self) -> Option<f64> {
        self.inner.acceptance()
    }
}

/// One approximate draw from `mu_{A,B}` on U(N) via the U(1) x SU(N) chain,
/// after `sweeps` sweeps from the identity.
pub fn disintegration_sampler(
    bc: &BoundaryFields,
    params: &SigmaParams,
    sweeps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SigmaField, SigmaError> {
    let mut chain = DisintegrationChain::new(params.clone(), bc.clone(), Algorithm::Auto)?;
    for _ in 0..sweeps {
        chain.sweep(rng, false);
    }
    Ok(chain.field())
}

/// Entry `f_x^{ij} = (Q_x)_{ij}` or `g_x^{ij} = (Q_x^{-1})_{ij}`, with
/// 1-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryObservable {
    pub kind: EntryKind,
    pub x: usize,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    F,
    G,
}

impl EntryObservable {
    pub fn new(
        kind: EntryKind,
        x: usize,
        i: usize,
        j: usize,
        spec: GroupSpec,
        graph: &SigmaGraph,
    ) -> Result<Self, SigmaError> {
        let o = Self { kind, x, i, j };
        o.validate(spec, graph)?;
        Ok(o)
    }

    pub fn validate(&self, spec: GroupSpec, graph: &SigmaGraph) -> Result<(), SigmaError> {
        let n = spec.n();
        if self.i == 0 || self.j == 0 || self.i > n || self.j > n {
            return Err(SigmaError::IndexOutOfRange {
                i: self.i,
                j: self.j,
                n,
            });
        }
        if self.x >= graph.n_vertices() {
            return Err(SigmaError::VertexOutOfRange {
                vertex: self.x,
                n: graph.n_vertices(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, q: &[Mat]) -> C64 {
        let m = &q[self.x];
        match self.kind {
            EntryKind::F => m.get(self.i - 1, self.j - 1),
            EntryKind::G => m.get(self.j - 1, self.i - 1).conj(),
        }
    }

    /// Support of the observable.
    pub fn support(&self) -> [usize; 1] {
        [self.x]
    }

    /// Bound on `sum_x |grad_x f|_inf`: the derivative along `X Q_x` is
    /// `(X Q_x)_{ij}`, at most `|X|_op <= |X|`.
    pub fn triple_norm_bound(&self) -> f64 {
        1.0
    }
}

/// Observables recorded by σ-model chains; each gives a real and an
/// imaginary column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SigmaObservable {
    Entry(EntryObservable),
    /// Mean over edges of `Re tr(Q_x A_e Q_y^{-1} B_e^{-1})`, `tr = Tr / N`.
    EdgeEnergy,
    /// Mean over vertices of `|tr Q_x|^2`.
    TraceSquared,
}

/// Which kernel drives a σ-model chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SigmaKernel {
    Sampler { algorithm: Algorithm },
    Langevin { dt: f64, steps_per_sweep: usize },
    Disintegration,
}

enum KernelState {
    Sampler(SigmaSampler),
    Langevin {
        params: SigmaParams,
        bc: BoundaryFields,
        field: SigmaField,
        dt: f64,
        steps: usize,
    },
    Disintegration(DisintegrationChain),
}

pub struct SigmaChain {
    state: KernelState,
    observables: Vec<SigmaObservable>,
}

impl SigmaChain {
    pub fn new(
        params: &SigmaParams,
        bc: &BoundaryFields,
        kernel: SigmaKernel,
        init: SigmaField,
        observables: &[SigmaObservable],
    ) -> Result<Self, SigmaError> {
        for o in observables {
            if let SigmaObservable::Entry(e) = o {
                e.validate(params.spec, &params.graph)?;
            }
        }
        let state = match kernel {
            SigmaKernel::Sampler { algorithm } => KernelState::Sampler(SigmaSampler::new(
                params.clone(),
                bc.clone(),
                init,
                algorithm,
            )?),
            SigmaKernel::Langevin {
                dt,
                steps_per_sweep,
            } => {
                check_dt(dt)?;
                KernelState::Langevin {
                    params: params.clone(),
                    bc: bc.clone(),
                    field: init,
                    dt,
                    steps: steps_per_sweep.max(1),
                }
            }
            SigmaKernel::Disintegration => KernelState::Disintegration(DisintegrationChain::new(
                params.clone(),
                bc.clone(),
                Algorithm::Auto,
            )?),
        };
        Ok(Self {
            state,
            observables: observables.to_vec(),
        })
    }

    pub fn field(&self) -> SigmaField {
        match &self.state {
            KernelState::Sampler(s) => s.field.clone(),
            KernelState::Langevin { field, .. } => field.clone(),
            KernelState::Disintegration(d) => d.field(),
        }
    }
}

impl Chain for SigmaChain {
    fn n_observables(&self) -> usize {
        2 * self.observables.len()
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng, burn_in: bool) {
        match &mut self.state {
            KernelState::Sampler(s) => {
                s.sweep(rng, burn_in);
            }
            KernelState::Langevin {
                params,
                bc,
                field,
                dt,
                steps,
            } => {
                for _ in 0..*steps {
                    sigma_langevin_step(field, bc, params, rng, *dt).expect("dt validated");
                }
            }
            KernelState::Disintegration(d) => d.sweep(rng, burn_in),
        }
    }

    fn measure(&mut self, out: &mut [f64]) {
        let (field, bc, graph) = match &self.state {
            KernelState::Sampler(s) => (s.field.clone(), &s.bc, s.params.graph.clone()),
            KernelState::Langevin {
                field, bc, params, ..
            } => (field.clone(), &*bc, params.graph.clone()),
            KernelState::Disintegration(d) => (d.field(), &d.bc, d.params.graph.clone()),
        };
        let n = field.spec.n() as f64;
        for (k, o) in self.observables.iter().enumerate() {
            let v = match o {
                SigmaObservable::Entry(e) => e.eval(&field.spins),
                SigmaObservable::EdgeEnergy => {
                    let m = graph.n_edges().max(1) as f64;
                    let s: f64 = graph
                        .edges()
                        .iter()
                        .enumerate()
                        .map(|(e, edge)| edge_term(&field.spins, bc, e, edge))
                        .sum();
                    C64::new(s / (n * m), 0.0)
                }
                SigmaObservable::TraceSquared => {
                    let s: f64 = field.spins.iter().map(|q| (q.trace() / n).norm_sqr()).sum();
                    C64::new(s / field.len().max(1) as f64, 0.0)
                }
            };
            out[2 * k] = v.re;
            out[2 * k + 1] = v.im;
        }
    }

    fn acceptance(&self) -> Option<f64> {
        match &self.state {
            KernelState::Sampler(s) => s.acceptance(),
            KernelState::Disintegration(d) => d.acceptance(),
            KernelState::Langevin { .. } => None,
        }
    }
}

/// Runs σ-model chains from cold (identity) starts.
pub fn run_sigma(
    params: &SigmaParams,
    bc: &BoundaryFields,
    kernel: SigmaKernel,
    observables: &[SigmaObservable],
    cfg: &ChainConfig,
) -> Result<RunOutput, SigmaError> {
    let nv = params.graph.n_vertices();
    // surface construction errors before spawning chains
    SigmaChain::new(params, bc, kernel, SigmaField::identity(params.spec, nv), observables)?;
    let (out, _) = run_chains_with_states(cfg, |_, _| {
        SigmaChain::new(params, bc, kernel, SigmaField::identity(params.spec, nv), observables)
            .expect("validated above")
    })?;
    Ok(out)
}

/// Complex series of observable `k` for every chain.
pub fn complex_series(out: &RunOutput, k: usize) -> Vec<Vec<C64>> {
    out.traces
        .iter()
        .map(|t| {
            t.columns[2 * k]
                .iter()
                .zip(&t.columns[2 * k + 1])
                .map(|(&re, &im)| C64::new(re, im))
                .collect()
        })
        .collect()
}

/// Jackknife covariance of observables `k1`, `k2` of a finished run.
pub fn covariance_from_run(out: &RunOutput, k1: usize, k2: usize) -> Result<CovValue, SigmaError> {
    let f = complex_series(out, k1);
    let g = complex_series(out, k2);
    let fr: Vec<&[C64]> = f.iter().map(|v| v.as_slice()).collect();
    let gr: Vec<&[C64]> = g.iter().map(|v| v.as_slice()).collect();
    Ok(jackknife_covariance(&fr, &gr, JACKKNIFE_BINS).map_err(ChainError::from)?)
}

/// `Cov_{A,B}(f, g)` with its distance and boundary label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
    pub distance: Option<usize>,
    pub boundary_id: String,
    pub n_samples: usize,
}

impl CovEstimate {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn covariance_estimate(
    bc: &BoundaryFields,
    boundary_id: &str,
    params: &SigmaParams,
    obs1: EntryObservable,
    obs2: EntryObservable,
    kernel: SigmaKernel,
    cfg: &ChainConfig,
) -> Result<CovEstimate, SigmaError> {
    let obs = [SigmaObservable::Entry(obs1), SigmaObservable::Entry(obs2)];
    let out = run_sigma(params, bc, kernel, &obs, cfg)?;
    let c = covariance_from_run(&out, 0, 1)?;
    Ok(CovEstimate {
        re: c.re,
        im: c.im,
        stderr: c.stderr,
        distance: params.graph.distance(obs1.x, obs2.x),
        boundary_id: boundary_id.to_string(),
        n_samples: c.n_samples,
    })
}

/// Estimate of `E_{A,B}[f]`; errors with `NoCenter` when the vanishing
/// argument has no central element to use.
pub fn one_point_estimate(
    bc: &BoundaryFields,
    params: &SigmaParams,
    obs: EntryObservable,
    kernel: SigmaKernel,
    cfg: &ChainConfig,
) -> Result<crate::stats::ComplexEstimate, SigmaError> {
    if center_element(params.spec).is_none() {
        return Err(SigmaError::NoCenter(params.spec));
    }
    let out = run_sigma(params, bc, kernel, &[SigmaObservable::Entry(obs)], cfg)?;
    Ok(out.complex_estimate(0, 1).map_err(ChainError::from)?)
}

/// Boundary fields and initial spins read off a gauge field around the slab:
/// `A` from the bottom plane, `B` from the top plane, and
/// `Q_x = (Q_{(x,k) -> (x,k+1)})^{-1}`, the vertical edge traversed
/// downwards.
///
/// With this identification `S_{A,B}(Q)` equals the Yang-Mills action
/// restricted to the vertical plaquettes of the slab.
pub fn boundary_from_ym(
    field: &GaugeField,
    parent: &TorusLattice,
    slab: &SlabGeometry,
) -> Result<(BoundaryFields, SigmaField), SigmaError> {
    if field.n_links() != parent.n_edges() || slab.parent_shape() != (parent.d(), parent.side()) {
        return Err(SigmaError::SizeMismatch {
            expected: parent.n_edges(),
            got: field.n_links(),
        });
    }
    let ne = slab.slice_edges().len();
    let a = (0..ne).map(|e| field.link(slab.bottom_edge_of(e)).clone()).collect();
    let b = (0..ne).map(|e| field.link(slab.top_edge_of(e)).clone()).collect();
    let spins = (0..slab.slice().n_vertices())
        .map(|x| field.link(slab.vertical_edge_of(x)).adjoint())
        .collect();
    Ok((
        BoundaryFields {
            n: field.spec().n(),
            a,
            b,
        },
        SigmaField {
            spec: field.spec(),
            spins,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_two_sample;
    use crate::ym::{plaquette_re_tr, YmParams};
    use rand::SeedableRng;

    fn ring(l: usize) -> Arc<SigmaGraph> {
        Arc::new(SigmaGraph::torus(1, l).unwrap())
    }

    #[test]
    fn identity_action() {
        let g = ring(4);
        let p = SigmaParams::new(GroupSpec::su(2), 0.05, g.clone()).unwrap();
        let q = SigmaField::identity(p.spec(), 4);
        let bc = BoundaryFields::identity(&g, 2);
        assert!((sigma_action(&q, &bc, &p) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn two_vertex_action_matches_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let edges = [
            SliceEdge { tail: 0, head: 1, dir: 0 },
            SliceEdge { tail: 1, head: 0, dir: 0 },
        ];
        let g = Arc::new(SigmaGraph::from_edges(2, &edges).unwrap());
        let spec = GroupSpec::su(3);
        let p = SigmaParams::new(spec, 0.2, g.clone()).unwrap();
        let q = SigmaField::haar(spec, 2, &mut rng);
        let bc = BoundaryFields::haar(&g, 3, &mut rng);
        let (q0, q1) = (q.spin(0), q.spin(1));
        let t1 = (&(&(q0 * bc.a(0)) * &q1.adjoint()) * &bc.b(0).adjoint()).trace().re;
        let t2 = (&(&(q1 * bc.a(1)) * &q0.adjoint()) * &bc.b(1).adjoint()).trace().re;
        assert!((sigma_action(&q, &bc, &p) - 0.6 * (t1 + t2)).abs() < 1e-12);
    }

    #[test]
    fn self_loops_are_excluded() {
        let g = SigmaGraph::torus(1, 1).unwrap();
        assert_eq!(g.n_vertices(), 1);
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn center_and_conjugation_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Arc::new(SigmaGraph::torus(2, 3).unwrap());
        for spec in [GroupSpec::su(2), GroupSpec::su(3), GroupSpec::so(4), GroupSpec::u(2)] {
            let p = SigmaParams::new(spec, 0.3, g.clone()).unwrap();
            let q = SigmaField::haar(spec, g.n_vertices(), &mut rng);
            let bc = BoundaryFields::haar(&g, spec.n(), &mut rng);
            let s = sigma_action(&q, &bc, &p);
            let z = center_element(spec).unwrap().mat().get(0, 0);
            assert!((sigma_action(&q.scaled(z), &bc, &p) - s).abs() < 1e-12);
            let u = haar_sample(GroupSpec::u(spec.n()), &mut rng).into_mat();
            let s2 = sigma_action(&q.conjugated(&u), &bc.conjugated(&u), &p);
            assert!((s2 - s).abs() < 1e-10);
        }
    }

    #[test]
    fn local_environment_reproduces_action_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Arc::new(SigmaGraph::torus(2, 3).unwrap());
        let spec = GroupSpec::u(2);
        let p = SigmaParams::new(spec, 0.4, g.clone()).unwrap();
        let q = SigmaField::haar(spec, 9, &mut rng);
        let bc = BoundaryFields::haar(&g, 2, &mut rng);
        for x in 0..9 {
            let m = local_environment(&q, &bc, &g, x);
            let mut q2 = q.clone();
            let new = haar_sample(spec, &mut rng);
            q2.set_spin(x, &new).unwrap();
            let lhs = sigma_action(&q2, &bc, &p) - sigma_action(&q, &bc, &p);
            let rhs = p.coupling() * re_tr_mul(&(new.mat() - q.spin(x)), &m);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_vanishes_at_identity() {
        let g = ring(5);
        let spec = GroupSpec::su(3);
        let p = SigmaParams::new(spec, 0.1, g.clone()).unwrap();
        let q = SigmaField::identity(spec, 5);
        let bc = BoundaryFields::identity(&g, 3);
        for x in 0..5 {
            assert!(sigma_gradient(&q, &bc, &p, x).norm_sq() < 1e-28);
        }
    }

    /// U(1): S = beta sum_e cos(theta_x - theta_y + alpha_e - beta_e), so
    /// dS/dtheta_x = -beta sum_e +-sin(...). The basis element of u(1) is i.
    #[test]
    fn u1_gradient_matches_scalar_calculus() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = ring(4);
        let spec = GroupSpec::u(1);
        let beta = 0.7;
        let p = SigmaParams::new(spec, beta, g.clone()).unwrap();
        let q = SigmaField::haar(spec, 4, &mut rng);
        let bc = BoundaryFields::haar(&g, 1, &mut rng);
        let th: Vec<f64> = q.spins().iter().map(|m| m.get(0, 0).arg()).collect();
        for x in 0..4 {
            let mut expect = 0.0;
            for (e, edge) in g.edges().iter().enumerate() {
                let phase = th[edge.tail] - th[edge.head] + bc.a(e).get(0, 0).arg()
                    - bc.b(e).get(0, 0).arg();
                if edge.tail == x {
                    expect -= beta * phase.sin();
                }
                if edge.head == x {
                    expect += beta * phase.sin();
                }
            }
            let grad = sigma_gradient(&q, &bc, &p, x);
            assert!((grad.coeffs()[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Arc::new(SigmaGraph::torus(2, 3).unwrap());
        for spec in [GroupSpec::su(2), GroupSpec::su(3), GroupSpec::so(4), GroupSpec::u(2)] {
            let p = SigmaParams::new(spec, 0.35, g.clone()).unwrap();
            let basis = algebra_basis(spec);
            for _ in 0..5 {
                let q = SigmaField::haar(spec, 9, &mut rng);
                let bc = BoundaryFields::haar(&g, spec.n(), &mut rng);
                let x = rng.random_range(0..9);
                let grad = sigma_gradient(&q, &bc, &p, x);
                for (a, t) in basis.iter().enumerate() {
                    let h = 1e-5;
                    let shifted = |s: f64| {
                        let mut q2 = q.clone();
                        let e = exp_map_matrix(spec, &t.to_matrix().scale_real(s));
                        q2.spins[x] = &e * q.spin(x);
                        sigma_action(&q2, &bc, &p)
                    };
                    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                    assert!((fd - grad.coeffs()[a]).abs() < 1e-7, "{spec} a={a}");
                }
            }
        }
    }

    #[test]
    fn langevin_rejects_large_steps_and_is_pure_diffusion_at_identity() {
        let g = ring(3);
        let spec = GroupSpec::su(2);
        let p = SigmaParams::new(spec, 0.05, g.clone()).unwrap();
        let bc = BoundaryFields::identity(&g, 2);
        let mut q = SigmaField::identity(spec, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert_eq!(
            sigma_langevin_step(&mut q, &bc, &p, &mut rng, 0.2),
            Err(SigmaError::StepTooLarge(0.2))
        );
        let noise = gaussian_noise(spec, 3, &mut rng);
        sigma_langevin_step_with_noise(&mut q, &bc, &p, 0.01, &noise).unwrap();
        for x in 0..3 {
            let expect = exp_map_matrix(spec, &noise[x].scale_real(0.02f64.sqrt()));
            assert!(q.spin(x).max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn boundary_from_identity_field() {
        let lat = TorusLattice::new(2, 4).unwrap();
        let slab = lat.slab(0).unwrap();
        let f = GaugeField::identity(GroupSpec::su(2), &lat);
        let (bc, q) = boundary_from_ym(&f, &lat, &slab).unwrap();
        assert_eq!(bc, BoundaryFields::identity(&SigmaGraph::from_slab(&slab), 2));
        assert_eq!(q, SigmaField::identity(GroupSpec::su(2), 4));
    }

    #[test]
    fn boundary_from_ym_reproduces_vertical_plaquettes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, l, k) in [(2, 4, 1), (3, 4, 3), (3, 3, 0)] {
            let lat = Arc::new(TorusLattice::new(d, l).unwrap());
            let spec = GroupSpec::su(3);
            let f = GaugeField::haar(spec, &lat, &mut rng);
            let slab = lat.slab(k).unwrap();
            let (bc, q) = boundary_from_ym(&f, &lat, &slab).unwrap();
            let graph = Arc::new(SigmaGraph::from_slab(&slab));
            let p = SigmaParams::new(spec, 0.2, graph).unwrap();
            let plaqs = slab.vertical_plaquettes(&lat);
            assert_eq!(plaqs.len(), (d - 1) * l.pow(d as u32 - 1));
            let yp = YmParams::new(spec, 0.2, lat.clone()).unwrap();
            let oracle: f64 = plaqs.iter().map(|&pl| plaquette_re_tr(&f, &lat, pl)).sum::<f64>()
                * yp.coupling();
            assert!((sigma_action(&q, &bc, &p) - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn beta_zero_gives_haar_spins() {
        let g = ring(4);
        let spec = GroupSpec::so(4);
        let p = SigmaParams::new(spec, 0.0, g.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bc = BoundaryFields::haar(&g, 4, &mut rng);
        let cfg = ChainConfig {
            sweeps: 3000,
            burn_in: 100,
            thinning: 1,
            n_chains: 1,
            seed: 3,
        };
        let x = EntryObservable::new(EntryKind::F, 2, 1, 2, spec, &g).unwrap();
        let out = run_sigma(
            &p,
            &bc,
            SigmaKernel::Sampler { algorithm: Algorithm::Metropolis },
            &[SigmaObservable::Entry(x)],
            &cfg,
        )
        .unwrap();
        let reference: Vec<f64> = (0..3000)
            .map(|_| haar_sample(spec, &mut rng).mat().get(0, 1).re)
            .collect();
        assert!(ks_two_sample(&out.traces[0].columns[0], &reference).passed);
    }

    /// A single vertex has no edges, so its law is Haar for any boundary.
    #[test]
    fn single_vertex_slice_is_haar() {
        let g = Arc::new(SigmaGraph::torus(1, 1).unwrap());
        let spec = GroupSpec::su(2);
        let p = SigmaParams::new(spec, 0.5, g.clone()).unwrap();
        let bc = BoundaryFields::identity(&g, 2);
        let cfg = ChainConfig {
            sweeps: 3000,
            burn_in: 100,
            thinning: 1,
            n_chains: 1,
            seed: 4,
        };
        let out = run_sigma(
            &p,
            &bc,
            SigmaKernel::Sampler { algorithm: Algorithm::Metropolis },
            &[SigmaObservable::TraceSquared],
            &cfg,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let reference: Vec<f64> = (0..3000)
            .map(|_| (haar_sample(spec, &mut rng).mat().trace() / 2.0).norm_sqr())
            .collect();
        assert!(ks_two_sample(&out.traces[0].columns[0], &reference).passed);
    }

    #[test]
    fn entry_observable_validation() {
        let g = ring(4);
        let spec = GroupSpec::su(2);
        assert!(EntryObservable::new(EntryKind::F, 0, 0, 1, spec, &g).is_err());
        assert!(EntryObservable::new(EntryKind::F, 0, 3, 1, spec, &g).is_err());
        assert!(EntryObservable::new(EntryKind::G, 4, 1, 1, spec, &g).is_err());
        let o = EntryObservable::new(EntryKind::G, 1, 1, 2, spec, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let q = SigmaField::haar(spec, 4, &mut rng);
        let inv = q.spin(1).inverse().unwrap();
        assert!((o.eval(q.spins()) - inv.get(0, 1)).norm() < 1e-12);
    }

    #[test]
    fn one_point_requires_center() {
        let g = ring(4);
        let spec = GroupSpec::so(3);
        let p = SigmaParams::new(spec, 0.05, g.clone()).unwrap();
        let bc = BoundaryFields::identity(&g, 3);
        let o = EntryObservable::new(EntryKind::F, 0, 1, 1, spec, &g).unwrap();
        let cfg = ChainConfig::new(1000, 1);
        assert_eq!(
            one_point_estimate(&bc, &p, o, SigmaKernel::Sampler { algorithm: Algorithm::Auto }, &cfg),
            Err(SigmaError::NoCenter(spec))
        );
    }

    /// Var((Q)_11) under Haar SU(2): E[|Q_11|^2] = 1/2 and E[Q_11] = 0.
    #[test]
    fn beta_zero_variance_of_an_entry() {
        let g = ring(4);
        let spec = GroupSpec::su(2);
        let p = SigmaParams::new(spec, 0.0, g.clone()).unwrap();
        let bc = BoundaryFields::identity(&g, 2);
        let f = EntryObservable::new(EntryKind::F, 0, 1, 1, spec, &g).unwrap();
        let mut fbar = f;
        fbar.kind = EntryKind::G; // g^{11} = conj(Q_11) for unitary Q
        let cfg = ChainConfig {
            sweeps: 20_000,
            burn_in: 10,
            thinning: 1,
            n_chains: 2,
            seed: 5,
        };
        let kernel = SigmaKernel::Sampler { algorithm: Algorithm::Auto };
        let c = covariance_estimate(&bc, "id", &p, f, fbar, kernel, &cfg).unwrap();
        assert!((c.re - 0.5).abs() < 3.0 * c.stderr, "{c:?}");
        let f2 = EntryObservable::new(EntryKind::F, 2, 1, 1, spec, &g).unwrap();
        let c = covariance_estimate(&bc, "id", &p, f, f2, kernel, &cfg).unwrap();
        assert!(c.value().norm() < 3.0 * c.stderr, "{c:?}");
        assert_eq!(c.distance, Some(2));
    }

    #[test]
    fn disintegration_requires_unitary_family() {
        let g = ring(4);
        let p = SigmaParams::new(GroupSpec::su(2), 0.05, g.clone()).unwrap();
        let bc = BoundaryFields::identity(&g, 2);
        assert!(matches!(
            DisintegrationChain::new(p, bc, Algorithm::Auto),
            Err(SigmaError::NotUnitaryFamily(_))
        ));
    }

    #[test]
    fn disintegration_at_beta_zero_is_haar() {
        let g = ring(4);
        let spec = GroupSpec::u(2);
        let p = SigmaParams::new(spec, 0.0, g.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bc = BoundaryFields::haar(&g, 2, &mut rng);
        let mut chain = DisintegrationChain::new(p, bc, Algorithm::Auto).unwrap();
        let mut sampled = Vec::new();
        for _ in 0..3000 {
            chain.sweep(&mut rng, false);
            sampled.push(chain.field().spin(1).trace().re);
        }
        let reference: Vec<f64> = (0..3000)
            .map(|_| haar_sample(spec, &mut rng).mat().trace().re)
            .collect();
        assert!(ks_two_sample(&sampled, &reference).passed);
        assert!(chain.field().max_residual() < 1e-10);
    }
}
