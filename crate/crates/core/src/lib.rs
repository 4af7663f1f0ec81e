//! Secure key rate, QBER and secure distance modeling for differential
//! phase shift QKD links.
//!
//! The physics layers stack bottom-up: [`detector`] describes photon
//! counters (including up-conversion Si-APD receivers), [`link`] turns a
//! detector and fiber into click and error probabilities, [`security`]
//! holds the eavesdropping models, and [`rate`] combines them into secure
//! key rates and distances. [`montecarlo`] cross-checks the analytic link
//! with a seeded simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detector;
pub mod error;
pub mod link;
pub mod montecarlo;
pub mod rate;
pub mod search;
pub mod security;

pub use error::{Error, Result};
