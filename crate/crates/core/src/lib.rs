//! Text world-model engine.
//!
//! World states, preconditions and effects are free-text propositions. This
//! crate holds the deterministic parts of the engine: the state algebra,
//! semantic matching over pluggable matchers, action validity and state
//! transition prediction, corpus refactoring into state traces, chaining
//! statistics, evaluation metrics and search-space analysis.
//!
//! Everything here is `no_std` (with `alloc`). Anything that talks to a
//! network, a file system or a thread pool lives in the `chainworld` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

mod error;

pub mod chaining;
pub mod evaluation;
pub mod inference;
pub mod matcher;
pub mod metrics;
pub mod plan;
pub mod prompt;
pub mod proposition;
pub mod search;
pub mod state;
pub mod world_model;

pub use error::{Error, Result};
pub use plan::{ActionPlan, ActionStep, Provenance, Stage};
pub use proposition::{normalize_proposition, Proposition};
pub use state::{apply_delta, diff_states, Applied, StateDelta, Warning, WorldState};
