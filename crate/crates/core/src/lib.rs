//! Instrumented agentic retrieval-augmented runs and query-stream analysis.
//!
//! The collection side drives a pluggable text generator through the
//! think/search/answer tag protocol, intercepts every retrieval, and logs the
//! run as a [`trace::Trace`] in a sharded TSV store. The analysis side loads
//! trace collections and computes workload statistics, query-reformulation
//! Markov models, per-iteration dynamics and text-stream metrics.

pub mod analysis;
pub mod orchestrator;
pub mod par;
pub mod protocol;
pub mod retrieval;
pub mod tags;
pub mod trace;
