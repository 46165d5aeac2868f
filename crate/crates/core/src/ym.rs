//! The lattice Yang-Mills measure
//! `dmu(Q) = Z^{-1} exp(S(Q)) prod_e dQ_e` with `S(Q) = N beta sum_p Re Tr(Q_p)`,
//! its samplers and Wilson loop observables.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::beta_threshold;
use crate::chain::{run_chains_with_states, Chain, ChainConfig, ChainError, RunOutput};
use crate::group::{
    exp_map_matrix, haar_sample, random_algebra_matrix, reunitarize, Family, GroupElement,
    GroupError, GroupSpec,
};
use crate::lattice::{LatticeError, OrientedEdge, TorusLattice};
use crate::linalg::{mul_adj_into, mul_into, C64, Mat};
use crate::su2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum YmError {
    #[error("beta must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error("field has {got} links, lattice has {expected} edges")]
    LatticeMismatch { expected: usize, got: usize },
    #[error("element belongs to {got}, field is over {expected}")]
    SpecMismatch { expected: GroupSpec, got: GroupSpec },
    #[error("heat bath is only available for SU(2) and U(1), not {0}")]
    HeatBathUnsupported(GroupSpec),
    #[error("proposal scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone)]
pub struct YmParams {
    spec: GroupSpec,
    beta: f64,
    lattice: Arc<TorusLattice>,
}

impl YmParams {
    pub fn new(spec: GroupSpec, beta: f64, lattice: Arc<TorusLattice>) -> Result<Self, YmError> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(YmError::InvalidBeta(beta));
        }
        Ok(Self {
            spec,
            beta,
            lattice,
        })
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lattice(&self) -> &Arc<TorusLattice> {
        &self.lattice
    }

    /// `N beta`, the coefficient of `Re Tr` in the action.
    pub fn coupling(&self) -> f64 {
        self.spec.n() as f64 * self.beta
    }

    /// True when beta is at or above the threshold of the proven regime.
    pub fn above_threshold(&self) -> bool {
        self.beta >= beta_threshold(self.spec.family(), self.spec.n(), self.lattice.d())
    }
}

/// Link variables on the positively oriented edges, indexed like the
/// lattice's edges. `Q_{e^{-1}} = Q_e^{-1}` is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    spec: GroupSpec,
    links: Vec<Mat>,
}

impl GaugeField {
    pub fn identity(spec: GroupSpec, lattice: &TorusLattice) -> Self {
        Self {
            spec,
            links: vec![Mat::identity(spec.n()); lattice.n_edges()],
        }
    }

    pub fn haar<R: Rng + ?Sized>(spec: GroupSpec, lattice: &TorusLattice, rng: &mut R) -> Self {
        Self {
            spec,
            links: (0..lattice.n_edges())
                .map(|_| haar_sample(spec, rng).into_mat())
                .collect(),
        }
    }

    pub fn from_elements(
        spec: GroupSpec,
        lattice: &TorusLattice,
        elements: Vec<GroupElement>,
    ) -> Result<Self, YmError> {
        if elements.len() != lattice.n_edges() {
            return Err(YmError::LatticeMismatch {
                expected: lattice.n_edges(),
                got: elements.len(),
            });
        }
        let mut links = Vec::with_capacity(elements.len());
        for g in elements {
            if g.spec() != spec {
                return Err(YmError::SpecMismatch {
                    expected: spec,
                    got: g.spec(),
                });
            }
            links.push(g.into_mat());
        }
        Ok(Self { spec, links })
    }

    /// Validates every matrix against the group constraints.
    pub fn from_matrices(
        spec: GroupSpec,
        lattice: &TorusLattice,
        mats: Vec<Mat>,
    ) -> Result<Self, YmError> {
        let elements = mats
            .into_iter()
            .map(|m| GroupElement::new(spec, m))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_elements(spec, lattice, elements)
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    #[inline]
    pub fn link(&self, e: usize) -> &Mat {
        &self.links[e]
    }

    pub fn element(&self, e: usize) -> GroupElement {
        GroupElement::new_unchecked(self.spec, self.links[e].clone())
    }

    pub fn set_link(&mut self, e: usize, g: &GroupElement) -> Result<(), YmError> {
        if g.spec() != self.spec {
            return Err(YmError::SpecMismatch {
                expected: self.spec,
                got: g.spec(),
            });
        }
        self.links[e].copy_from(g.mat());
        Ok(())
    }

    pub fn links(&self) -> &[Mat] {
        &self.links
    }

    pub(crate) fn links_mut(&mut self) -> &mut [Mat] {
        &mut self.links
    }

    /// Largest constraint residual over all links.
    pub fn max_residual(&self) -> f64 {
        self.links
            .iter()
            .map(|m| crate::group::constraint_residual(self.spec, m))
            .fold(0.0, f64::max)
    }

    pub fn reunitarize(&mut self) {
        for m in &mut self.links {
            *m = reunitarize(self.spec, m);
        }
    }
}

/// Ordered product of oriented link matrices, inverses on backward edges.
pub fn path_product(links: &[Mat], d: usize, edges: &[OrientedEdge]) -> Mat {
    let n = links[0].n();
    let mut acc = Mat::identity(n);
    let mut tmp = Mat::zeros(n);
    for e in edges {
        let q = &links[e.index(d)];
        if e.forward {
            mul_into(&acc, q, &mut tmp);
        } else {
            mul_adj_into(&acc, q, &mut tmp);
        }
        std::mem::swap(&mut acc, &mut tmp);
    }
    acc
}

/// `Re Tr(Q_p)` for plaquette `p`.
pub fn plaquette_re_tr(field: &GaugeField, lattice: &TorusLattice, p: usize) -> f64 {
    path_product(&field.links, lattice.d(), lattice.plaquette_word(p))
        .trace()
        .re
}

/// `S(Q) = N beta sum_p Re Tr(Q_p)` over positively oriented plaquettes.
pub fn ym_action(field: &GaugeField, params: &YmParams) -> f64 {
    let lat = params.lattice();
    let sum: f64 = (0..lat.n_plaquettes())
        .map(|p| plaquette_re_tr(field, lat, p))
        .sum();
    params.coupling() * sum
}

/// Normalized trace `(1/N) Tr(Q_{e_1} ... Q_{e_n})` around `lp`.
pub fn wilson_loop(field: &GaugeField, lattice: &TorusLattice, edges: &[OrientedEdge]) -> C64 {
    let n = field.spec.n() as f64;
    path_product(&field.links, lattice.d(), edges).trace() / n
}

/// `Q_e -> g_x Q_e g_y^{-1}` for every edge `e = (x, y)`.
pub fn gauge_transform(
    field: &GaugeField,
    lattice: &TorusLattice,
    g: &[GroupElement],
) -> Result<GaugeField, YmError> {
    if g.len() != lattice.n_vertices() {
        return Err(YmError::LatticeMismatch {
            expected: lattice.n_vertices(),
            got: g.len(),
        });
    }
    if let Some(bad) = g.iter().find(|x| x.spec() != field.spec) {
        return Err(YmError::SpecMismatch {
            expected: field.spec,
            got: bad.spec(),
        });
    }
    let tor = lattice.torus();
    let n = field.spec.n();
    let mut tmp = Mat::zeros(n);
    let links = (0..lattice.n_edges())
        .map(|e| {
            let edge = lattice.edge(e);
            let x = edge.tail(tor);
            let y = edge.head(tor);
            mul_into(g[x].mat(), &field.links[e], &mut tmp);
            let mut out = Mat::zeros(n);
            mul_adj_into(&tmp, g[y].mat(), &mut out);
            out
        })
        .collect();
    Ok(GaugeField {
        spec: field.spec,
        links,
    })
}

/// Staple sum `M_e`: the action is `N beta Re Tr(Q_e M_e)` plus terms not
/// involving `Q_e`.
pub fn staple_sum(field: &GaugeField, lattice: &TorusLattice, e: usize) -> Mat {
    let n = field.spec.n();
    let mut out = Mat::zeros(n);
    let mut s = StapleScratch::new(n);
    staple_into(&field.links, lattice, e, &mut s, &mut out);
    out
}

pub(crate) struct StapleScratch {
    a: Mat,
    b: Mat,
}

impl StapleScratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            a: Mat::zeros(n),
            b: Mat::zeros(n),
        }
    }
}

fn oriented_mul(acc: &Mat, q: &Mat, forward: bool, out: &mut Mat) {
    if forward {
        mul_into(acc, q, out)
    } else {
        mul_adj_into(acc, q, out)
    }
}

pub(crate) fn staple_into(
    links: &[Mat],
    lattice: &TorusLattice,
    e: usize,
    s: &mut StapleScratch,
    out: &mut Mat,
) {
    let d = lattice.d();
    for z in out.data_mut() {
        *z = C64::new(0.0, 0.0);
    }
    for inc in lattice.incidence(e) {
        let word = lattice.plaquette_word(inc.plaquette);
        // the three edges following e cyclically, Tr(Q_e^{+-1} R)
        let w1 = word[(inc.position + 1) % 4];
        let w2 = word[(inc.position + 2) % 4];
        let w3 = word[(inc.position + 3) % 4];
        let q1 = &links[w1.index(d)];
        let q2 = &links[w2.index(d)];
        let q3 = &links[w3.index(d)];
        if w1.forward {
            s.a.copy_from(q1);
        } else {
            s.a = q1.adjoint();
        }
        oriented_mul(&s.a, q2, w2.forward, &mut s.b);
        oriented_mul(&s.b, q3, w3.forward, &mut s.a);
        if inc.forward {
            out.add_assign(&s.a);
        } else {
            // Re Tr(Q_e^dagger R) = Re Tr(Q_e R^dagger)
            let n = out.n();
            for i in 0..n {
                for j in 0..n {
                    let v = out.get(i, j) + s.a.get(j, i).conj();
                    out.set(i, j, v);
                }
            }
        }
    }
}

/// Metropolis acceptance probability `min(1, exp(delta_s))` for a proposal
/// raising the action by `delta_s`.
#[inline]
pub fn accept_probability(delta_s: f64) -> f64 {
    if delta_s >= 0.0 {
        1.0
    } else {
        delta_s.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Heat bath for SU(2) and U(1), Metropolis otherwise.
    Auto,
    Metropolis,
    HeatBath,
}

/// The update actually performed by a sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    /// beta = 0: every sweep redraws all variables from Haar measure.
    Haar,
    Metropolis,
    HeatBathSu2,
    HeatBathU1,
}

/// Chooses the update for a spin or link group and coupling.
pub fn resolve_update(spec: GroupSpec, beta: f64, algorithm: Algorithm) -> Result<Update, YmError> {
    let heat = match (spec.family(), spec.n()) {
        (Family::SU, 2) => Some(Update::HeatBathSu2),
        (Family::U, 1) => Some(Update::HeatBathU1),
        _ => None,
    };
    if beta == 0.0 {
        return Ok(Update::Haar);
    }
    match algorithm {
        Algorithm::Metropolis => Ok(Update::Metropolis),
        Algorithm::Auto => Ok(heat.unwrap_or(Update::Metropolis)),
        Algorithm::HeatBath => heat.ok_or(YmError::HeatBathUnsupported(spec)),
    }
}

/// Lower and upper bounds on the adaptive proposal scale.
pub const SCALE_RANGE: (f64, f64) = (1e-4, 6.0);

/// Robbins-Monro style adaptation towards 50% acceptance.
pub fn tune_scale(scale: f64, acceptance: f64) -> f64 {
    (scale * (acceptance - 0.5).exp()).clamp(SCALE_RANGE.0, SCALE_RANGE.1)
}

/// Single-edge update machinery for one gauge field.
#[derive(Debug, Clone)]
pub struct YmSampler {
    params: YmParams,
    field: GaugeField,
    update: Update,
    scale: f64,
    accepted: u64,
    proposed: u64,
}

impl YmSampler {
    pub fn new(
        params: YmParams,
        field: GaugeField,
        algorithm: Algorithm,
        scale: f64,
    ) -> Result<Self, YmError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(YmError::InvalidScale(scale));
        }
        if field.n_links() != params.lattice().n_edges() {
            return Err(YmError::LatticeMismatch {
                expected: params.lattice().n_edges(),
                got: field.n_links(),
            });
        }
        if field.spec() != params.spec() {
            return Err(YmError::SpecMismatch {
                expected: params.spec(),
                got: field.spec(),
            });
        }
        let update = resolve_update(params.spec(), params.beta(), algorithm)?;
        Ok(Self {
            params,
            field,
            update,
            scale,
            accepted: 0,
            proposed: 0,
        })
    }

    pub fn params(&self) -> &YmParams {
        &self.params
    }

    pub fn field(&self) -> &GaugeField {
        &self.field
    }

    pub fn into_field(self) -> GaugeField {
        self.field
    }

    pub fn update(&self) -> Update {
        self.update
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Acceptance over all Metropolis sweeps since the last reset.
    pub fn acceptance(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }

    pub fn reset_acceptance(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    /// One sweep over all edges in index order; returns the sweep's
    /// acceptance rate (1 for exact updates). With `tune`, the Metropolis
    /// scale adapts afterwards.
    pub fn sweep(&mut self, rng: &mut ChaCha8Rng, tune: bool) -> f64 {
        match self.update {
            Update::Haar => {
                let spec = self.params.spec();
                for m in self.field.links_mut() {
                    *m = haar_sample(spec, rng).into_mat();
                }
                1.0
            }
            Update::HeatBathSu2 | Update::HeatBathU1 => {
                self.heat_bath_sweep(rng);
                1.0
            }
            Update::Metropolis => {
                let rate = self.metropolis_sweep(rng);
                if tune {
                    self.scale = tune_scale(self.scale, rate);
                } else {
                    self.accepted += (rate * self.field.n_links() as f64).round() as u64;
                    self.proposed += self.field.n_links() as u64;
                }
                rate
            }
        }
    }

    fn heat_bath_sweep(&mut self, rng: &mut ChaCha8Rng) {
        let lat = self.params.lattice().clone();
        let c = self.params.coupling();
        let n = self.params.spec().n();
        let mut s = StapleScratch::new(n);
        let mut m = Mat::zeros(n);
        let mut q = Mat::zeros(n);
        for e in 0..lat.n_edges() {
            staple_into(&self.field.links, &lat, e, &mut s, &mut m);
            match self.update {
                Update::HeatBathSu2 => {
                    su2::su2_heat_bath(&m, c, rng, &mut q);
                    self.field.links[e].copy_from(&q);
                }
                _ => {
                    let z = su2::u1_heat_bath(m.get(0, 0), c, rng);
                    self.field.links[e].set(0, 0, z);
                }
            }
        }
    }

    fn metropolis_sweep(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let lat = self.params.lattice().clone();
        let spec = self.params.spec();
        let c = self.params.coupling();
        let n = spec.n();
        let mut s = StapleScratch::new(n);
        let mut m = Mat::zeros(n);
        let mut x = Mat::zeros(n);
        let mut coeffs = vec![0.0; spec.algebra_dim()];
        let mut proposal = Mat::zeros(n);
        let mut accepted = 0usize;
        for e in 0..lat.n_edges() {
            staple_into(&self.field.links, &lat, e, &mut s, &mut m);
            random_algebra_matrix(spec, self.scale, rng, &mut coeffs, &mut x);
            let step = exp_map_matrix(spec, &x);
            mul_into(&step, &self.field.links[e], &mut proposal);
            let old = crate::linalg::re_tr_mul(&self.field.links[e], &m);
            let new = crate::linalg::re_tr_mul(&proposal, &m);
            let u: f64 = rng.random();
            if u < accept_probability(c * (new - old)) {
                self.field.links[e].copy_from(&proposal);
                accepted += 1;
            }
        }
        self.field.reunitarize();
        accepted as f64 / lat.n_edges() as f64
    }

    /// Replaces internal state, used when resuming from a checkpoint.
    pub fn restore(&mut self, field: GaugeField, scale: f64) -> Result<(), YmError> {
        if field.n_links() != self.field.n_links() || field.spec() != self.field.spec() {
            return Err(YmError::LatticeMismatch {
                expected: self.field.n_links(),
                got: field.n_links(),
            });
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(YmError::InvalidScale(scale));
        }
        self.field = field;
        self.scale = scale;
        Ok(())
    }
}

/// Conditional expectation of every link given all other links, for SU(2)
/// and U(1); `None` for other groups.
pub fn improved_links(field: &GaugeField, params: &YmParams) -> Option<Vec<Mat>> {
    let spec = params.spec();
    let lat = params.lattice();
    let c = params.coupling();
    let n = spec.n();
    let su2 = matches!((spec.family(), n), (Family::SU, 2));
    let u1 = matches!((spec.family(), n), (Family::U, 1));
    if !(su2 || u1) {
        return None;
    }
    let mut s = StapleScratch::new(n);
    let mut m = Mat::zeros(n);
    Some(
        (0..lat.n_edges())
            .map(|e| {
                staple_into(&field.links, lat, e, &mut s, &mut m);
                if su2 {
                    su2::su2_conditional_mean(&m, c)
                } else {
                    Mat::scalar(1, su2::u1_conditional_mean(m.get(0, 0), c))
                }
            })
            .collect(),
    )
}

/// Greedy choice of loop positions whose links can be replaced by their
/// conditional means simultaneously: each chosen edge occurs once in the
/// loop and no two chosen edges lie on a common plaquette.
pub fn multihit_mask(lattice: &TorusLattice, edges: &[OrientedEdge]) -> Vec<bool> {
    let d = lattice.d();
    let mut blocked: HashSet<usize> = HashSet::new();
    let mut mask = vec![false; edges.len()];
    for (k, e) in edges.iter().enumerate() {
        let idx = e.index(d);
        let once = edges.iter().filter(|f| f.index(d) == idx).count() == 1;
        if !once {
            continue;
        }
        let plaqs: Vec<usize> = lattice.incidence(idx).iter().map(|i| i.plaquette).collect();
        if plaqs.iter().any(|p| blocked.contains(p)) {
            continue;
        }
        mask[k] = true;
        blocked.extend(plaqs);
    }
    mask
}

/// Product around `edges` with masked positions taken from `improved`.
pub fn mixed_path_product(
    links: &[Mat],
    improved: &[Mat],
    d: usize,
    edges: &[OrientedEdge],
    mask: &[bool],
) -> Mat {
    let n = links[0].n();
    let mut acc = Mat::identity(n);
    let mut tmp = Mat::zeros(n);
    for (e, &hit) in edges.iter().zip(mask) {
        let q = if hit {
            &improved[e.index(d)]
        } else {
            &links[e.index(d)]
        };
        oriented_mul(&acc, q, e.forward, &mut tmp);
        std::mem::swap(&mut acc, &mut tmp);
    }
    acc
}

/// Observables recorded by a Yang-Mills chain. Each contributes two columns,
/// real and imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum YmObservable {
    /// Wilson loop of one plaquette.
    Plaquette { index: usize },
    /// `(1/N) Tr Q_e` of one link.
    LinkTrace { edge: usize },
    /// `R x T` rectangles averaged over positions, planes and, for `R != T`,
    /// both orientations. With `improved`, links are replaced by their
    /// conditional means on a non-interacting subset (SU(2), U(1)).
    Rectangle { r: usize, t: usize, improved: bool },
}

struct LoopSet {
    loops: Vec<Vec<OrientedEdge>>,
    masks: Vec<Vec<bool>>,
}

fn rectangle_set(lattice: &TorusLattice, r: usize, t: usize) -> Result<LoopSet, YmError> {
    let d = lattice.d();
    let mut loops = Vec::new();
    let mut masks = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let mut orientations = vec![(i, j)];
            if r != t {
                orientations.push((j, i));
            }
            for axes in orientations {
                for x in 0..lattice.n_vertices() {
                    let lp = lattice.rectangular_loop(x, axes, r, t)?;
                    masks.push(multihit_mask(lattice, lp.edges()));
                    loops.push(lp.edges().to_vec());
                }
            }
        }
    }
    Ok(LoopSet { loops, masks })
}

enum Prepared {
    Plaquette(usize),
    Link(usize),
    Rectangles { set: LoopSet, improved: bool },
}

/// A Yang-Mills Markov chain with its observables.
pub struct YmChain {
    sampler: YmSampler,
    observables: Vec<Prepared>,
    needs_improved: bool,
}

impl YmChain {
    pub fn new(sampler: YmSampler, observables: &[YmObservable]) -> Result<Self, YmError> {
        let lat = sampler.params().lattice().clone();
        let mut prepared = Vec::with_capacity(observables.len());
        let mut needs_improved = false;
        for obs in observables {
            prepared.push(match *obs {
                YmObservable::Plaquette { index } => {
                    if index >= lat.n_plaquettes() {
                        return Err(YmError::LatticeMismatch {
                            expected: lat.n_plaquettes(),
                            got: index,
                        });
                    }
                    Prepared::Plaquette(index)
                }
                YmObservable::LinkTrace { edge } => {
                    if edge >= lat.n_edges() {
                        return Err(YmError::LatticeMismatch {
                            expected: lat.n_edges(),
                            got: edge,
                        });
                    }
                    Prepared::Link(edge)
                }
                YmObservable::Rectangle { r, t, improved } => {
                    let spec = sampler.params().spec();
                    let usable = improved
                        && sampler.params().beta() > 0.0
                        && matches!(
                            (spec.family(), spec.n()),
                            (Family::SU, 2) | (Family::U, 1)
                        );
                    needs_improved |= usable;
                    Prepared::Rectangles {
                        set: rectangle_set(&lat, r, t)?,
                        improved: usable,
                    }
                }
            });
        }
        Ok(Self {
            sampler,
            observables: prepared,
            needs_improved,
        })
    }

    pub fn sampler(&self) -> &YmSampler {
        &self.sampler
    }

    pub fn into_sampler(self) -> YmSampler {
        self.sampler
    }
}

impl Chain for YmChain {
    fn n_observables(&self) -> usize {
        2 * self.observables.len()
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng, burn_in: bool) {
        self.sampler.sweep(rng, burn_in);
    }

    fn measure(&mut self, out: &mut [f64]) {
        let field = self.sampler.field();
        let params = self.sampler.params();
        let lat = params.lattice();
        let d = lat.d();
        let n = params.spec().n() as f64;
        let improved = if self.needs_improved {
            improved_links(field, params)
        } else {
            None
        };
        for (k, obs) in self.observables.iter().enumerate() {
            let w = match obs {
                Prepared::Plaquette(p) => wilson_loop(field, lat, lat.plaquette_word(*p)),
                Prepared::Link(e) => field.link(*e).trace() / n,
                Prepared::Rectangles { set, improved: imp } => {
                    let mut acc = C64::new(0.0, 0.0);
                    for (lp, mask) in set.loops.iter().zip(&set.masks) {
                        let prod = match (imp, &improved) {
                            (true, Some(better)) => {
                                mixed_path_product(field.links(), better, d, lp, mask)
                            }
                            _ => path_product(field.links(), d, lp),
                        };
                        acc += prod.trace();
                    }
                    acc / (n * set.loops.len() as f64)
                }
            };
            out[2 * k] = w.re;
            out[2 * k + 1] = w.im;
        }
    }

    fn acceptance(&self) -> Option<f64> {
        self.sampler.acceptance()
    }
}

/// Runs `cfg.n_chains` chains from identity (cold) starts and returns their
/// traces; column `2k` / `2k+1` hold the real / imaginary part of
/// observable `k`.
pub fn run_ym(
    params: &YmParams,
    algorithm: Algorithm,
    observables: &[YmObservable],
    cfg: &ChainConfig,
) -> Result<(RunOutput, Vec<YmChain>), YmError> {
    // validate everything once up front so chain construction cannot fail
    let probe = YmSampler::new(
        params.clone(),
        GaugeField::identity(params.spec(), params.lattice()),
        algorithm,
        0.5,
    )?;
    YmChain::new(probe, observables)?;
    let out = run_chains_with_states(cfg, |_, _rng| {
        let field = GaugeField::identity(params.spec(), params.lattice());
        let sampler = YmSampler::new(params.clone(), field, algorithm, 0.5)
            .expect("validated above");
        YmChain::new(sampler, observables).expect("validated above")
    })?;
    Ok(out)
}

/// Exhaustive Metropolis kernels for the gauge model with links restricted
/// to the center subgroup `{z I}` (a finite abelian group) on a small
/// lattice. Used to check detailed balance of the acceptance rule exactly.
pub struct CenterToyChain {
    pub phases: Vec<C64>,
    pub n_edges: usize,
    /// Unnormalized `exp(S)` for each state (state = base-|Z| digits).
    pub weights: Vec<f64>,
}

impl CenterToyChain {
    pub fn new(params: &YmParams) -> Self {
        let spec = params.spec();
        let lat = params.lattice();
        let phases = crate::group::center_subgroup(spec);
        let k = phases.len();
        let n_edges = lat.n_edges();
        let n_states = k.pow(n_edges as u32);
        let weights = (0..n_states)
            .map(|s| {
                let field = Self::field_of(&phases, spec, n_edges, s);
                ym_action(&field, params).exp()
            })
            .collect();
        Self {
            phases,
            n_edges,
            weights,
        }
    }

    fn field_of(phases: &[C64], spec: GroupSpec, n_edges: usize, mut s: usize) -> GaugeField {
        let k = phases.len();
        let links = (0..n_edges)
            .map(|_| {
                let z = phases[s % k];
                s /= k;
                Mat::scalar(spec.n(), z)
            })
            .collect();
        GaugeField { spec, links }
    }

    pub fn n_states(&self) -> usize {
        self.weights.len()
    }

    /// Normalized stationary law.
    pub fn pi(&self) -> Vec<f64> {
        let z: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / z).collect()
    }

    /// Kernel of a Metropolis update at edge `e` with a uniform proposal
    /// `Q_e -> z Q_e`, z drawn from the center subgroup.
    pub fn edge_kernel(&self, e: usize) -> Vec<Vec<f64>> {
        let k = self.phases.len();
        let n = self.n_states();
        let stride = k.pow(e as u32);
        let mut p = vec![vec![0.0; n]; n];
        for (a, row) in p.iter_mut().enumerate() {
            let digit = (a / stride) % k;
            let mut stay = 1.0;
            for shift in 1..k {
                let nd = (digit + shift) % k;
                let b = a - digit * stride + nd * stride;
                let prob = accept_probability((self.weights[b] / self.weights[a]).ln()) / k as f64;
                row[b] += prob;
                stay -= prob;
            }
            row[a] += stay;
        }
        p
    }
}
