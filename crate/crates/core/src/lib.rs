//! Design-space simulator for composable GPU memory systems.
//!
//! The crate generates synthetic DL/HPC traces ([`workload`]), replays them
//! through an L2 / link / L3 / DRAM hierarchy ([`cache`]), turns the traffic
//! into runtimes with a limiter model ([`perf`]) and energy ([`energy`]),
//! checks package feasibility ([`package`]), and runs the sweeps and reports
//! built on top of all of that ([`sweep`], [`report`]).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arch;
pub mod cache;
pub mod energy;
pub mod error;
pub mod package;
pub mod perf;
pub mod report;
pub mod sweep;
pub mod units;
pub mod workload;

pub use error::{CopaError, Result};
