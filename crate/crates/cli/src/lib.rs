//! Command-line front end for the nonlocal contact solver: config parsing,
//! run dispatch, and artifact emission.

// `!(x > 0)`-style tests deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod runner;
