//! Discrete tori, their oriented edges and plaquettes, loops, and the
//! height-one slabs used to condition lattice gauge fields.
//!
//! Vertices are indexed lexicographically with coordinate 0 most significant.
//! The positively oriented edge `(x, dir)` has index `x * d + dir`, and the
//! positively oriented plaquette `(x, i < j)` has index `x * d(d-1)/2 + pair`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension {0} is out of range")]
    InvalidDimension(usize),
    #[error("side length {0} is out of range")]
    InvalidSide(usize),
    #[error("rectangle side {side} exceeds L/2 = {max}")]
    SideTooLong { side: usize, max: usize },
    #[error("rectangle sides must be positive")]
    ZeroSide,
    #[error("axes ({0}, {1}) are not two distinct lattice directions")]
    InvalidAxes(usize, usize),
    #[error("loop is empty")]
    EmptyLoop,
    #[error("loop edges {0} and {1} do not chain head to tail")]
    BrokenChain(usize, usize),
    #[error("loop does not return to its starting vertex")]
    NotClosed,
    #[error("slab height {k} is outside [0, {side})")]
    InvalidSlab { k: usize, side: usize },
    #[error("coordinate list has length {got}, expected {expected}")]
    BadCoordinates { expected: usize, got: usize },
    #[error("orientation must be +1 or -1, got {0}")]
    BadOrientation(i64),
}

/// The discrete torus `(Z / side Z)^dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Torus {
    dim: usize,
    side: usize,
    n_vertices: usize,
    strides: Vec<usize>,
}

impl Torus {
    pub fn new(dim: usize, side: usize) -> Result<Self, LatticeError> {
        if dim == 0 || dim > 8 {
            return Err(LatticeError::InvalidDimension(dim));
        }
        if side == 0 {
            return Err(LatticeError::InvalidSide(side));
        }
        let n_vertices = side
            .checked_pow(dim as u32)
            .filter(|&n| n <= 1 << 26)
            .ok_or(LatticeError::InvalidSide(side))?;
        let mut strides = vec![1; dim];
        for i in (0..dim.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * side;
        }
        Ok(Self {
            dim,
            side,
            n_vertices,
            strides,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn coords(&self, v: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|i| (v / self.strides[i]) % self.side)
            .collect()
    }

    #[inline]
    pub fn coord(&self, v: usize, axis: usize) -> usize {
        (v / self.strides[axis]) % self.side
    }

    /// Index of a coordinate vector; coordinates are reduced mod `side`.
    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (c % self.side) * s)
            .sum()
    }

    /// The vertex reached from `v` by moving `delta` steps along `axis`.
    #[inline]
    pub fn shift(&self, v: usize, axis: usize, delta: isize) -> usize {
        let c = self.coord(v, axis) as isize;
        let l = self.side as isize;
        let nc = (c + delta).rem_euclid(l) as usize;
        v - (c as usize) * self.strides[axis] + nc * self.strides[axis]
    }

    /// Graph distance `sum_i min(|x_i - y_i|, L - |x_i - y_i|)`.
    pub fn distance(&self, x: usize, y: usize) -> usize {
        (0..self.dim)
            .map(|i| {
                let a = self.coord(x, i);
                let b = self.coord(y, i);
                let diff = a.abs_diff(b);
                diff.min(self.side - diff)
            })
            .sum()
    }
}

/// An edge of the torus with an orientation. `forward` runs from `base` to
/// `base + e_dir`; the reverse runs from `base + e_dir` back to `base`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrientedEdge {
    pub base: usize,
    pub dir: usize,
    pub forward: bool,
}

impl OrientedEdge {
    pub fn forward(base: usize, dir: usize) -> Self {
        Self {
            base,
            dir,
            forward: true,
        }
    }

    pub fn backward(base: usize, dir: usize) -> Self {
        Self {
            base,
            dir,
            forward: false,
        }
    }

    pub fn reversed(self) -> Self {
        Self {
            forward: !self.forward,
            ..self
        }
    }

    /// Index of the underlying positively oriented edge.
    #[inline]
    pub fn index(&self, d: usize) -> usize {
        self.base * d + self.dir
    }

    pub fn tail(&self, torus: &Torus) -> usize {
        if self.forward {
            self.base
        } else {
            torus.shift(self.base, self.dir, 1)
        }
    }

    pub fn head(&self, torus: &Torus) -> usize {
        if self.forward {
            torus.shift(self.base, self.dir, 1)
        } else {
            self.base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plaquette {
    pub base: usize,
    pub i: usize,
    pub j: usize,
}

/// Occurrence of an edge in a plaquette boundary word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub plaquette: usize,
    /// Position of the edge in the four-letter word.
    pub position: usize,
    pub forward: bool,
}

/// The d-dimensional torus together with its precomputed edge and plaquette
/// tables. Immutable after construction.
#[derive(Debug, Clone)]
pub struct TorusLattice {
    torus: Torus,
    plaquettes: Vec<Plaquette>,
    words: Vec<[OrientedEdge; 4]>,
    incidence: Vec<Vec<Incidence>>,
}

impl TorusLattice {
    /// Builds the lattice and all of its tables (`d >= 2`, `L >= 2`).
    pub fn new(d: usize, side: usize) -> Result<Self, LatticeError> {
        if d < 2 {
            return Err(LatticeError::InvalidDimension(d));
        }
        if side < 2 {
            return Err(LatticeError::InvalidSide(side));
        }
        let torus = Torus::new(d, side)?;
        let nv = torus.n_vertices();
        let mut plaquettes = Vec::with_capacity(nv * d * (d - 1) / 2);
        let mut words = Vec::with_capacity(plaquettes.capacity());
        let mut incidence = vec![Vec::with_capacity(2 * (d - 1)); nv * d];
        for base in 0..nv {
            for i in 0..d {
                for j in i + 1..d {
                    let p = plaquettes.len();
                    let word = [
                        OrientedEdge::forward(base, i),
                        OrientedEdge::forward(torus.shift(base, i, 1), j),
                        OrientedEdge::backward(torus.shift(base, j, 1), i),
                        OrientedEdge::backward(base, j),
                    ];
                    for (position, e) in word.iter().enumerate() {
                        incidence[e.index(d)].push(Incidence {
                            plaquette: p,
                            position,
                            forward: e.forward,
                        });
                    }
                    plaquettes.push(Plaquette { base, i, j });
                    words.push(word);
                }
            }
        }
        Ok(Self {
            torus,
            plaquettes,
            words,
            incidence,
        })
    }

    #[inline]
    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.torus.dim()
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.torus.side()
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.torus.n_vertices()
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.n_vertices() * self.d()
    }

    #[inline]
    pub fn n_plaquettes(&self) -> usize {
        self.plaquettes.len()
    }

    pub fn plaquettes(&self) -> &[Plaquette] {
        &self.plaquettes
    }

    /// Boundary word of plaquette `p`: `+i, +j, -i, -j` from its base.
    #[inline]
    pub fn plaquette_word(&self, p: usize) -> &[OrientedEdge; 4] {
        &self.words[p]
    }

    /// The `2(d-1)` plaquettes containing positive edge `e`.
    #[inline]
    pub fn incidence(&self, e: usize) -> &[Incidence] {
        &self.incidence[e]
    }

    pub fn edge(&self, e: usize) -> OrientedEdge {
        OrientedEdge::forward(e / self.d(), e % self.d())
    }

    /// Index of the positive plaquette with base `x` in plane `(i, j)`, `i < j`.
    pub fn plaquette_index(&self, base: usize, i: usize, j: usize) -> usize {
        let d = self.d();
        debug_assert!(i < j && j < d);
        // pairs are enumerated (0,1), (0,2), .., (1,2), ..
        let pair = i * (2 * d - i - 1) / 2 + (j - i - 1);
        base * d * (d - 1) / 2 + pair
    }

    pub fn distance(&self, x: usize, y: usize) -> usize {
        self.torus.distance(x, y)
    }

    /// Plaquette `p`'s boundary as a loop.
    pub fn plaquette_loop(&self, p: usize) -> Loop {
        Loop {
            edges: self.words[p].to_vec(),
            extent: Some((1, 1)),
        }
    }

    /// The closed `R x T` rectangle at `corner`, `R` steps along `axes.0`
    /// then `T` along `axes.1`, back along `-axes.0` and `-axes.1`.
    pub fn rectangular_loop(
        &self,
        corner: usize,
        axes: (usize, usize),
        r: usize,
        t: usize,
    ) -> Result<Loop, LatticeError> {
        let (i, j) = axes;
        if i == j || i >= self.d() || j >= self.d() {
            return Err(LatticeError::InvalidAxes(i, j));
        }
        if r == 0 || t == 0 {
            return Err(LatticeError::ZeroSide);
        }
        let max = self.side() / 2;
        for side in [r, t] {
            if side > max {
                return Err(LatticeError::SideTooLong { side, max });
            }
        }
        let tor = &self.torus;
        let mut edges = Vec::with_capacity(2 * (r + t));
        let mut x = corner;
        for _ in 0..r {
            edges.push(OrientedEdge::forward(x, i));
            x = tor.shift(x, i, 1);
        }
        for _ in 0..t {
            edges.push(OrientedEdge::forward(x, j));
            x = tor.shift(x, j, 1);
        }
        for _ in 0..r {
            x = tor.shift(x, i, -1);
            edges.push(OrientedEdge::backward(x, i));
        }
        for _ in 0..t {
            x = tor.shift(x, j, -1);
            edges.push(OrientedEdge::backward(x, j));
        }
        Ok(Loop {
            edges,
            extent: Some((r, t)),
        })
    }

    pub fn slab(&self, k: usize) -> Result<SlabGeometry, LatticeError> {
        SlabGeometry::new(self, k)
    }
}

/// A closed walk of oriented edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loop {
    edges: Vec<OrientedEdge>,
    extent: Option<(usize, usize)>,
}

impl Loop {
    /// Validates that `edges` chain head to tail and close up.
    pub fn new(torus: &Torus, edges: Vec<OrientedEdge>) -> Result<Self, LatticeError> {
        if edges.is_empty() {
            return Err(LatticeError::EmptyLoop);
        }
        for (k, pair) in edges.windows(2).enumerate() {
            if pair[0].head(torus) != pair[1].tail(torus) {
                return Err(LatticeError::BrokenChain(k, k + 1));
            }
        }
        if edges[edges.len() - 1].head(torus) != edges[0].tail(torus) {
            return Err(LatticeError::NotClosed);
        }
        Ok(Self {
            edges,
            extent: None,
        })
    }

    pub fn edges(&self) -> &[OrientedEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Side lengths `(R, T)` for rectangular loops.
    pub fn extent(&self) -> Option<(usize, usize)> {
        self.extent
    }

    pub fn area(&self) -> Option<usize> {
        self.extent.map(|(r, t)| r * t)
    }

    pub fn to_records(&self, torus: &Torus) -> Vec<EdgeRecord> {
        self.edges
            .iter()
            .map(|e| EdgeRecord(torus.coords(e.base), e.dir, if e.forward { 1 } else { -1 }))
            .collect()
    }

    pub fn from_records(torus: &Torus, records: &[EdgeRecord]) -> Result<Self, LatticeError> {
        let mut edges = Vec::with_capacity(records.len());
        for EdgeRecord(coords, dir, orientation) in records {
            if coords.len() != torus.dim() {
                return Err(LatticeError::BadCoordinates {
                    expected: torus.dim(),
                    got: coords.len(),
                });
            }
            if *dir >= torus.dim() {
                return Err(LatticeError::InvalidAxes(*dir, *dir));
            }
            let forward = match orientation {
                1 => true,
                -1 => false,
                other => return Err(LatticeError::BadOrientation(*other)),
            };
            edges.push(OrientedEdge {
                base: torus.index(coords),
                dir: *dir,
                forward,
            });
        }
        Loop::new(torus, edges)
    }
}

/// JSON form of an oriented edge: `[base coordinates, dir, orientation]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord(pub Vec<usize>, pub usize, pub i64);

/// An edge of a slab slice, `tail -> head` along slice axis `dir`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceEdge {
    pub tail: usize,
    pub head: usize,
    pub dir: usize,
}

/// Positive edges of a torus, `x -> x + e_dir`, skipping self-loops.
pub fn torus_edges(torus: &Torus) -> Vec<SliceEdge> {
    if torus.side() < 2 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(torus.n_vertices() * torus.dim());
    for v in 0..torus.n_vertices() {
        for dir in 0..torus.dim() {
            out.push(SliceEdge {
                tail: v,
                head: torus.shift(v, dir, 1),
                dir,
            });
        }
    }
    out
}

/// The slab between the horizontal planes `x_{d-1} = k` and `k + 1`.
///
/// The slice is the `(d-1)`-torus of the first `d - 1` coordinates. Slice
/// edge `x * (d-1) + dir` sits below the parent edge `((x, k), dir)` (the
/// A side) and below `((x, k+1), dir)` (the B side). Vertical edges
/// `(x, k) -> (x, k+1)` are identified with slice vertex `x`.
#[derive(Debug, Clone)]
pub struct SlabGeometry {
    parent_d: usize,
    parent_side: usize,
    k: usize,
    slice: Torus,
    slice_edges: Vec<SliceEdge>,
    vertical: Vec<usize>,
    bottom: Vec<usize>,
    top: Vec<usize>,
}

impl SlabGeometry {
    pub fn new(parent: &TorusLattice, k: usize) -> Result<Self, LatticeError> {
        let d = parent.d();
        let side = parent.side();
        if k >= side {
            return Err(LatticeError::InvalidSlab { k, side });
        }
        let slice = Torus::new(d - 1, side)?;
        let up = d - 1;
        let to_parent = |x: usize, height: usize| x * side + height % side;
        let vertical = (0..slice.n_vertices())
            .map(|x| to_parent(x, k) * d + up)
            .collect();
        let slice_edges = torus_edges(&slice);
        let bottom = slice_edges
            .iter()
            .map(|e| to_parent(e.tail, k) * d + e.dir)
            .collect();
        let top = slice_edges
            .iter()
            .map(|e| to_parent(e.tail, k + 1) * d + e.dir)
            .collect();
        Ok(Self {
            parent_d: d,
            parent_side: side,
            k,
            slice,
            slice_edges,
            vertical,
            bottom,
            top,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn parent_shape(&self) -> (usize, usize) {
        (self.parent_d, self.parent_side)
    }

    pub fn slice(&self) -> &Torus {
        &self.slice
    }

    pub fn slice_edges(&self) -> &[SliceEdge] {
        &self.slice_edges
    }

    /// Parent edge index of the vertical edge above slice vertex `x`.
    pub fn vertical_edge_of(&self, x: usize) -> usize {
        self.vertical[x]
    }

    /// Parent edge in the bottom plane (A side) for slice edge `e`.
    pub fn bottom_edge_of(&self, e: usize) -> usize {
        self.bottom[e]
    }

    /// Parent edge in the top plane (B side) for slice edge `e`.
    pub fn top_edge_of(&self, e: usize) -> usize {
        self.top[e]
    }

    /// Parent plaquettes crossing the slab, one per slice edge, in slice edge
    /// order.
    pub fn vertical_plaquettes(&self, parent: &TorusLattice) -> Vec<usize> {
        let up = self.parent_d - 1;
        self.slice_edges
            .iter()
            .map(|e| {
                let base = e.tail * self.parent_side + self.k;
                parent.plaquette_index(base, e.dir, up)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    #[test]
    fn counts_match_closed_forms() {
        for d in 2..=4 {
            for l in 2..=6 {
                let lat = TorusLattice::new(d, l).unwrap();
                let nv = l.pow(d as u32);
                assert_eq!(lat.n_vertices(), nv);
                assert_eq!(lat.n_edges(), d * nv);
                assert_eq!(lat.n_plaquettes(), nv * d * (d - 1) / 2);
                for e in 0..lat.n_edges() {
                    assert_eq!(lat.incidence(e).len(), 2 * (d - 1));
                }
            }
        }
        assert_eq!(TorusLattice::new(2, 4).unwrap().n_edges(), 32);
        assert_eq!(TorusLattice::new(2, 4).unwrap().n_plaquettes(), 16);
        assert_eq!(TorusLattice::new(3, 4).unwrap().n_edges(), 192);
        assert_eq!(TorusLattice::new(3, 4).unwrap().n_plaquettes(), 192);
    }

    #[test]
    fn small_torus_incidence_by_brute_force() {
        let lat = TorusLattice::new(2, 2).unwrap();
        for e in 0..lat.n_edges() {
            let count = (0..lat.n_plaquettes())
                .filter(|&p| lat.plaquette_word(p).iter().any(|w| w.index(2) == e))
                .count();
            assert_eq!(count, 2);
        }
    }

    #[test]
    fn plaquette_words_are_closed_loops() {
        for (d, l) in [(2, 3), (3, 4), (4, 2)] {
            let lat = TorusLattice::new(d, l).unwrap();
            for p in 0..lat.n_plaquettes() {
                let word = lat.plaquette_word(p).to_vec();
                let lp = Loop::new(lat.torus(), word).unwrap();
                assert_eq!(lp.len(), 4);
                let pl = lat.plaquettes()[p];
                assert_eq!(lat.plaquette_index(pl.base, pl.i, pl.j), p);
            }
        }
    }

    #[test]
    fn rectangles() {
        let lat = TorusLattice::new(2, 8).unwrap();
        let unit = lat.rectangular_loop(0, (0, 1), 1, 1).unwrap();
        assert_eq!(unit.edges(), lat.plaquette_word(0));
        let r = lat.rectangular_loop(5, (0, 1), 3, 2).unwrap();
        assert_eq!(r.len(), 10);
        assert_eq!(r.area(), Some(6));
        assert_eq!(
            lat.rectangular_loop(0, (0, 1), 5, 1).unwrap_err(),
            LatticeError::SideTooLong { side: 5, max: 4 }
        );
    }

    /// Replays a rectangle as a walk of coordinate steps and checks it is a
    /// valid closed loop wrapping correctly around the torus.
    #[test]
    fn rectangles_replay_as_walks() {
        let lat = TorusLattice::new(3, 6).unwrap();
        let tor = lat.torus();
        for corner in [0, 7, 100, 215] {
            for (r, t) in [(1, 1), (2, 3), (3, 3)] {
                let lp = lat.rectangular_loop(corner, (2, 0), r, t).unwrap();
                let mut pos: Vec<isize> = tor.coords(corner).iter().map(|&c| c as isize).collect();
                for e in lp.edges() {
                    let here = tor.index(&pos.iter().map(|&c| c.rem_euclid(6) as usize).collect::<Vec<_>>());
                    assert_eq!(e.tail(tor), here);
                    pos[e.dir] += if e.forward { 1 } else { -1 };
                }
                let back: Vec<usize> = pos.iter().map(|&c| c.rem_euclid(6) as usize).collect();
                assert_eq!(tor.index(&back), corner);
                Loop::new(tor, lp.edges().to_vec()).unwrap();
            }
        }
    }

    #[test]
    fn broken_loops_are_rejected() {
        let lat = TorusLattice::new(2, 4).unwrap();
        let tor = lat.torus();
        let e = vec![OrientedEdge::forward(0, 0), OrientedEdge::forward(0, 1)];
        assert_eq!(Loop::new(tor, e).unwrap_err(), LatticeError::BrokenChain(0, 1));
        let e = vec![OrientedEdge::forward(0, 0)];
        assert_eq!(Loop::new(tor, e).unwrap_err(), LatticeError::NotClosed);
        assert_eq!(Loop::new(tor, vec![]).unwrap_err(), LatticeError::EmptyLoop);
    }

    #[test]
    fn loop_records_round_trip() {
        let lat = TorusLattice::new(3, 4).unwrap();
        let lp = lat.rectangular_loop(9, (0, 2), 2, 1).unwrap();
        let json = serde_json::to_string(&lp.to_records(lat.torus())).unwrap();
        let records: Vec<EdgeRecord> = serde_json::from_str(&json).unwrap();
        let back = Loop::from_records(lat.torus(), &records).unwrap();
        assert_eq!(back.edges(), lp.edges());
    }

    #[test]
    fn reversal_is_an_involution() {
        let e = OrientedEdge::forward(3, 1);
        assert_eq!(e.reversed().reversed(), e);
        let tor = Torus::new(2, 5).unwrap();
        assert_eq!(e.reversed().tail(&tor), e.head(&tor));
    }

    #[test]
    fn distance_examples() {
        let tor = Torus::new(2, 8).unwrap();
        assert_eq!(tor.distance(0, 0), 0);
        let y = tor.index(&[7, 0]);
        assert_eq!(tor.distance(0, y), 1);
    }

    #[test]
    fn distance_matches_bfs() {
        let tor = Torus::new(2, 6).unwrap();
        for src in [0, 7, 20, 35] {
            let mut dist = vec![usize::MAX; tor.n_vertices()];
            dist[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(v) = queue.pop_front() {
                for axis in 0..2 {
                    for delta in [-1, 1] {
                        let w = tor.shift(v, axis, delta);
                        if dist[w] == usize::MAX {
                            dist[w] = dist[v] + 1;
                            queue.push_back(w);
                        }
                    }
                }
            }
            for y in 0..tor.n_vertices() {
                assert_eq!(tor.distance(src, y), dist[y]);
            }
        }
    }

    #[test]
    fn distance_is_a_metric() {
        let tor = Torus::new(3, 5).unwrap();
        let n = tor.n_vertices();
        let mut s = 12345usize;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 33) % n
        };
        for _ in 0..500 {
            let (x, y, z) = (next(), next(), next());
            assert_eq!(tor.distance(x, y), tor.distance(y, x));
            assert!(tor.distance(x, z) <= tor.distance(x, y) + tor.distance(y, z));
        }
    }

    #[test]
    fn slab_shapes() {
        let lat = TorusLattice::new(2, 4).unwrap();
        let slab = lat.slab(0).unwrap();
        assert_eq!(slab.slice().n_vertices(), 4);
        assert_eq!(slab.slice_edges().len(), 4);
        let lat = TorusLattice::new(3, 4).unwrap();
        let slab = lat.slab(2).unwrap();
        assert_eq!(slab.slice().n_vertices(), 16);
        assert_eq!(slab.slice_edges().len(), 32);
        let mut touch = vec![0; 16];
        for e in slab.slice_edges() {
            touch[e.tail] += 1;
            touch[e.head] += 1;
        }
        assert!(touch.iter().all(|&c| c == 4));
        assert!(lat.slab(4).is_err());
    }

    #[test]
    fn vertical_plaquettes_use_one_a_one_b_two_vertical_edges() {
        let lat = TorusLattice::new(3, 4).unwrap();
        let slab = lat.slab(3).unwrap();
        let d = lat.d();
        let verticals: Vec<usize> = (0..16).map(|x| slab.vertical_edge_of(x)).collect();
        for (se, &p) in slab.vertical_plaquettes(&lat).iter().enumerate() {
            let word = lat.plaquette_word(p);
            let idx: Vec<usize> = word.iter().map(|w| w.index(d)).collect();
            assert_eq!(idx.iter().filter(|&&e| e == slab.bottom_edge_of(se)).count(), 1);
            assert_eq!(idx.iter().filter(|&&e| e == slab.top_edge_of(se)).count(), 1);
            assert_eq!(idx.iter().filter(|e| verticals.contains(e)).count(), 2);
        }
        // vertical edges are a bijection onto the parent's vertical edges at height k
        let mut all: Vec<usize> = (0..lat.n_edges())
            .filter(|&e| e % d == d - 1 && lat.torus().coord(e / d, d - 1) == 3)
            .collect();
        all.sort();
        let mut v = verticals.clone();
        v.sort();
        assert_eq!(all, v);
    }
}
