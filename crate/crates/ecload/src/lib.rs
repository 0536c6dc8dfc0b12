//! File formats, experiment runner and command line for `ecload-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod output;
pub mod world;

pub use error::{AppError, Result};
