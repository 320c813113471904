//! Zero-inflated Tweedie regression with gradient-boosted trees.

pub mod cli;
pub mod data;
pub mod em;
pub mod error;
pub mod gbdt;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod profile;
pub mod simulation;
pub mod tweedie;

pub use error::{Error, Result};
