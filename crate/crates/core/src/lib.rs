//! Geodesic flow on ellipsoids in `R^n`.
//!
//! Two formulations are provided: the direct second-order equations for a
//! point `x` on `Σ x_j²/a_j = 1` with velocity `y`, and the Clebsch system for
//! `(y, l)` with `l = x ∧ y`, integrated in a local time and reconstructed
//! back to positions. Around them sit the conserved quantities, the Poisson
//! structure that makes the Uhlenbeck integrals commute, and a shooting
//! solver for two-point boundary value problems.
//!
//! Comparisons that test `x > 0` are written as `!(x > 0.0)` throughout so
//! that NaN lands on the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvp;
pub mod clebsch_flow;
pub mod conserved;
pub mod direct_flow;
pub mod error;
pub mod model;
pub mod ode;
pub mod poisson;
pub mod skew;
