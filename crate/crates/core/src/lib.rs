//! Incremental execution of networks of model operations.
//!
//! Models (typed graphs) and assignment sets live in slots; operation nodes
//! read and write slots and react to cached deltas. The [`scheduler`] finds
//! safe one-pass execution orders statically and falls back to fixpoint
//! iteration when none exists.

pub mod bench;
pub mod fixtures;
pub mod io;
pub mod model;
pub mod network;
pub mod operators;
pub mod scheduler;
