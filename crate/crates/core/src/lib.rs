//! Day-ahead load forecasting for households and energy communities, and the
//! financial evaluation of forecasts through daily battery dispatch.
//!
//! This crate is `no_std` (with `alloc`); file formats, the experiment runner
//! and the command line live in the `ecload` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod dispatch;
pub mod error;
pub mod features;
pub mod harness;
pub mod math;
pub mod models;
pub mod neural;
pub mod synthgen;
pub mod time;

pub use error::{Error, ErrorKind, Result};
