//! Numerical lab for harmonic map heat flow from the unit disk into closed
//! submanifolds of Euclidean space.
//!
//! The flow is discretized with P1 finite elements on a ring-structured disk
//! mesh ([`mesh`]). Targets live in [`manifold`], the Laplace-type solvers in
//! [`elliptic`], the time stepping and its monitors in [`flow`], Coulomb
//! gauges and conservation laws in [`gauge`], the radial maximal function in
//! [`hardy`], and the scenario driver in [`lab`].

// `!(x > 0.0)` is used on purpose to reject NaN; index loops follow the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod elliptic;
pub mod error;
pub mod flow;
pub mod gauge;
pub mod hardy;
pub mod lab;
pub mod linalg;
pub mod manifold;
pub mod mesh;
pub mod par;

pub use error::{Error, Result};
