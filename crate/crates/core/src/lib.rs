//! Vehicular edge computing simulator: vehicles queue tasks, pick uplink
//! powers with soft actor-critic agents, and share models through
//! graph-weighted neighbor aggregation and RSU averaging.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aoi;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod error;
pub mod federated;
pub mod graph;
pub mod nn;
pub mod output;
pub mod rng;
pub mod sac;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
