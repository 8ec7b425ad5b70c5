//! Building blocks for task-based assessment of super-resolution networks.
//!
//! The crate covers the full chain: stochastic object models
//! ([`sim`]), measurement operators ([`degrade`]), a small CPU neural
//! network engine ([`nn`]) used both for SRCNN super-resolvers ([`sr`]) and
//! learned observers, linear and channelized Hotelling observers
//! ([`observers`]), and figures of merit ([`metrics`]).

pub mod degrade;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod observers;
pub mod rng;
pub mod sim;
pub mod sr;

pub use error::{Error, Result};
pub use grid::{ImageGrid, Window};
