//! Files, LLM access and the command line around `chainworld-core`.

#![forbid(unsafe_code)]

pub mod backends;
pub mod cli;
pub mod config;
pub mod conformance;
pub mod error;
pub mod format;
pub mod gateway;
pub mod io;
pub mod judge;
pub mod pipeline;
pub mod templates;

pub use error::{Error, Result};
