//! Semantic capability routing for dynamic IoT networks.
//!
//! The crate is organized around a routing protocol (`srp-diot`) whose routing
//! tables are indexed by compact ontology codes instead of keywords. When a
//! table outgrows its byte budget, entries are grouped under their ontology
//! ancestors so that routing information is compressed rather than discarded.
//!
//! Modules:
//!
//! - [`ontology`]: capability taxonomy generation and the two-bit-vector
//!   ontology coding scheme (all structural queries work on codes alone).
//! - [`metrics`]: the four per-entry metrics (coverage, hop, usage, stability)
//!   and their aggregation into a bounded integer utility.
//! - [`routing_table`]: the ONID-indexed table, its byte-size model, and the
//!   two-tier adaptive summarization engine.
//! - [`protocol`]: the node state machine (advertise, receive, look up with
//!   ancestor fallback, bounded random forwarding, and backtracking).
//! - [`baselines`]: centralized registry, controlled flooding, group-cache
//!   (GSD-like) and Chord-like DHT discovery for comparison runs.
//! - [`simnet`]: deterministic discrete-event simulator with geometric
//!   topology, waypoint mobility, Zipf workload, and traffic accounting.
//! - [`config`]: INI-style experiment configuration and sweep specs.

pub mod baselines;
pub mod config;
pub mod fixtures;
pub mod metrics;
pub mod ontology;
pub mod protocol;
pub mod routing_table;
pub mod simnet;

/// Identifier of a simulated network node.
pub type NodeId = u32;
