//! Generalized Cantor sum sets `C = { sum_i s_i b_i : b_i in D^i }` in `R^p`.
//!
//! The crate builds and validates sum-set specs, enumerates and samples their
//! level anchors, evaluates exact dimension formulas, constructs the doubling
//! dimension function attached to a spec, thins sequences toward target
//! dimensions, and checks all of it against a box-counting oracle.

// `!(x >= y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boxcount;
pub mod cli;
pub mod dimension;
pub mod dimfunc;
pub mod error;
pub mod export;
pub mod geometry;
pub mod logspace;
pub mod real;
pub mod seqcore;
pub mod thinning;

pub use error::{Error, Result};
pub use real::Real;
pub use seqcore::{DigitSystem, SeparationMode, SequenceSpec, SumSetSpec};
