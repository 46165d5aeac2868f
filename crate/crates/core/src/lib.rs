//! Lattice Yang-Mills and slab σ-model simulation and analysis.

pub mod analysis;
pub mod chain;
pub mod group;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod seed;
pub mod sigma;
pub mod special;
pub mod stats;
pub mod su2;
pub mod ym;

pub use analysis::{AnalysisError, FitPoint, FitResult};
pub use chain::{ChainConfig, ChainError, RunOutput};
pub use group::{AlgebraElement, Family, GroupElement, GroupError, GroupSpec};
pub use lattice::{LatticeError, Loop, OrientedEdge, SlabGeometry, Torus, TorusLattice};
pub use linalg::{Mat, C64};
pub use seed::RngState;
pub use sigma::{BoundaryFields, SigmaError, SigmaField, SigmaGraph, SigmaParams};
pub use stats::{ComplexEstimate, Estimate, StatsError};
pub use ym::{Algorithm, GaugeField, YmError, YmParams};
