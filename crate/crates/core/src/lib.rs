//! Phase classification of branching Markov chains.
//!
//! The crate computes spectral radii of transition kernels from finite
//! truncations and closed forms, generating-function and large-deviation
//! quantities, and simulates branching Markov chains to cross-check the
//! resulting transient / weakly recurrent / strongly recurrent verdicts.

pub mod error;
pub mod models;

pub use error::{Error, Result};
pub mod genfun;
pub mod ldp;
pub mod classify;
pub mod engine;
pub mod spectral;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
