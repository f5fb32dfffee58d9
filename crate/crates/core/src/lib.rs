//! Solvers for linear elliptic problems on a rectangle split by a vertical
//! interface whose value is prescribed nonlocally: a weighted sum of the
//! solution along interior vertical lines plus a given profile.
//!
//! Two solution paths cover the two classes of data:
//!
//! * [`fourier`] solves the constant-coefficient (Poisson) case on the unit
//!   square by sine-series separation; every mode reduces to a scalar
//!   two-point problem with a closed-form contact value.
//! * [`fd`] discretizes the general divergence-form operator with mixed
//!   derivatives on a uniform grid, and [`iterate`] resolves the nonlocal
//!   coupling by contact sweeps: one Dirichlet solve per subdomain per
//!   sweep, with the interface value updated from the line traces.
//!
//! [`geometry`] holds the problem description and admissibility rules,
//! [`expr`] a small expression language for coefficient and data fields,
//! and [`verify`] manufactured-solution and cross-validation helpers.
//!
//! The crate is `no_std` (with `alloc`); everything numeric is plain `f64`.

// Indexed loops mirror the banded/stencil index algebra, `!(x > 0)`-style
// tests deliberately reject NaN, and reference constants in tests keep the
// full precision they were computed with.
#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision
)]

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod expr;
pub mod fd;
pub mod field;
pub mod fourier;
pub mod geometry;
pub mod iterate;
pub mod quad;
pub mod verify;
