//! Numerical detectors for regions of instability of area-preserving
//! annulus maps: rotation numbers, periodic orbits, invariant manifolds,
//! essential saddles, invariant-circle barriers and connecting orbits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod ids;
pub mod manifolds;
pub mod periodic;
pub mod regions;
pub mod store;
pub mod topology;

pub use dynamics::{LiftPoint, LiftedMap, MapSpec};
pub use error::{Error, Result};
