// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod execution;
pub mod harness;
pub mod neighborhood;
pub mod physics;
pub mod real;
pub mod sorting;
pub mod variables;
