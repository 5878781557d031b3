//! Tools for studying the random-cluster (FK) model and the Ising model on
//! finite boxes of `Z^d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] builds finite regions with an explicit, deterministic edge
//!   indexing and ghost endpoints for boundary-crossing edges.
//! * [`bonds`] holds bond configurations, boundary wirings and cluster
//!   labelings.
//! * [`oracle`] enumerates FK and Ising measures exactly on micro-instances.
//! * [`sampler`] provides heat-bath and Swendsen–Wang chains, sprinkling and
//!   the sequential monotone coupling.
//! * [`ising`] holds the Ising-side quantities (surface tension, weak mixing).
//! * [`events`] and [`renorm`] implement the block events and the
//!   renormalized site field.
//! * `harness` (behind the `cli` feature) runs configured experiments.

// Range checks are written as `!(x >= a)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bonds;
pub mod error;
pub mod events;
pub mod geometry;
pub mod ising;
pub mod oracle;
pub mod renorm;
pub mod rng;
pub mod sampler;
pub mod stats;
mod unionfind;

#[cfg(feature = "cli")]
pub mod harness;

pub use bonds::{BondConfig, BoundarySpec, ClusterLabeling};
pub use error::{Error, Result};
pub use geometry::{AnnulusSpec, Region, RegionSpec};
pub use stats::EstimatorResult;
