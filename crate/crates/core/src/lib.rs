//! Approximate k-th nearest neighbor search over a set of disjoint balls.
//!
//! The distance from a query point `q` to a ball `b = ball(c, r)` is
//! `max(|q - c| - r, 0)`, and the k-th nearest distance `d_k(q)` is the k-th
//! smallest of those values. Two structures answer `(1 ± eps)`-approximate
//! k-th nearest queries:
//!
//! - [`Registry`] is a linear-size index built once; `k` and `eps` are chosen
//!   per query ([`Registry::knn`]).
//! - [`avd::AvdIndex`] fixes `k` and `eps` at build time and uses space
//!   proportional to `n / k` (up to `eps` factors). Queries are a point
//!   location plus constant work.
//!
//! Everything operates in unit-cube coordinates; [`normalize`] maps an
//! arbitrary ball set there. The [`oracle`] module carries brute-force
//! references used by the test suites.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// Parameter checks are written as `!(x > 0.0)` on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod avd;
mod error;
pub mod geom;
pub mod knn;
mod math;
pub mod oracle;
pub mod quadtree;
pub mod quorum;
pub mod registry;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use geom::{
    dist_point_ball, grid_approx, grid_cell, lift, normalize, packing_constant, product_norm, Ball,
    CanonicalCube, LiftedPoint, NormalizedInstance, Region, Transform, MAX_LEVEL,
};

pub use knn::{Branch, ConstantFactor, KnnAnswer};
pub use quadtree::{CellQuery, CompressedQuadtree, NodeId, RangeHit, RangeHits};
pub use registry::Registry;
