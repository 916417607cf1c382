//! Exact inference, causal interventions and decision analytics for
//! panel-based dynamic Bayesian networks, with a bundled pollinator model.

pub mod analytics;
pub mod document;
pub mod error;
pub mod factor;
pub mod inference;
pub mod intervention;
pub mod network;
pub mod pollinator;
pub mod runs;
pub mod temporal;

pub use error::{Error, Result};
