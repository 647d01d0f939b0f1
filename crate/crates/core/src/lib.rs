//! Equivalent-circuit simulation of a semiconductor optical amplifier and
//! metaheuristic search for drive waveforms that minimise its off-on
//! settling time.

// `!(x > 0.0)` is used deliberately so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod plant;
pub mod seed;
pub mod signals;

pub use error::{Error, Result};
