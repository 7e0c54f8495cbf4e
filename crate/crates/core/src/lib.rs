// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffcore;
pub mod graph;
pub mod sim;
pub mod models;
pub mod train;
