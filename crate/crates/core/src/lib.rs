//! Core engine for simulating structured psychiatric diagnostic interviews.
//!
//! This crate is `no_std` (alloc required) and holds everything that does
//! not need IO: domain types, the hierarchical diagnostic state machines,
//! the context tree, the disorder-symptom knowledge graph, deterministic
//! scripted agents, the per-session dialogue engine and the evaluation
//! metric kernels. File formats, the HTTP backend and the CLI live in the
//! companion `diasim` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agents;
pub mod backend;
pub mod knowledge;
pub mod machine;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scripted;
pub mod session;
pub mod tree;
