//! Discrete-state active inference on a small tool-use grid.
//!
//! The crate contains a factored POMDP engine (state inference, expected free
//! energy with state and parameter information gain, Dirichlet learning of
//! transitions), the ground-truth grid, and a harness that runs the tool use,
//! tool discovery and tool innovation experiments and writes their metrics as
//! CSV.

pub mod categorical;
pub mod config;
pub mod engine;
pub mod env;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;

pub use error::{Error, Result};
