//! Covert two-hop relaying with cooperative jamming: closed-form detection
//! and outage analysis, Monte Carlo oracles, and transmit-power optimization.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detection;
pub mod error;
pub mod experiments;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod optimize;
pub mod rate;
pub mod rng;

pub use error::{Error, Result};
pub use model::{Scheme, SystemParams};
pub use montecarlo::{MetricEstimate, Mode, PowerMode, SimConfig};
