//! Simulation laboratory for the two-dimensional discrete Gaussian free field.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: the box `V_N`, bulk regions, per-vertex neighborhoods and box partitions.
//! * [`field`]: exact spectral sampling of the field and exact Green-function columns.
//! * [`multiscale`]: harmonic exit kernels, coarse-grained fields and the scale-split field `ψ`.
//! * [`gibbs`]: partition functions, Gibbs replicas, boundary mass and high points.
//! * [`overlap`]: overlaps `q`, `q_α`, the two-overlap distribution and the integral/derivative identities.
//! * [`closedform`]: limiting free energies, maximum and high-point exponents, and a two-level GREM sampler.
//! * [`pd`]: Poisson–Dirichlet weights and replica moments.
//!
//! All randomness flows through [`seed::derive_seed`] so that results do not depend on
//! how work is scheduled across threads.

// `!(x >= 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
mod error;
pub mod field;
pub mod gibbs;
pub mod lattice;
pub mod multiscale;
pub mod overlap;
pub mod pd;
pub mod seed;
mod spectral;
pub mod stats;

pub use error::{Error, Result};

pub use closedform::{Grem2Spec, SigmaPair};
pub use field::{DgffSampler, FieldSample, GreenCache, GreenColumn, PotentialKernelValue};
pub use gibbs::{GibbsContext, HighPoints, ReplicaDraw};
pub use lattice::{BoxGeometry, BoxRegion, Vertex, VertexSet};
pub use multiscale::{CoarseField, GeneralizedField, HarmonicKernel};
pub use overlap::{OverlapConfig, OverlapHistogram, OverlapValue, PairOverlaps};
pub use pd::{PdWeights, ReplicaPattern};
pub use seed::TaskKind;
