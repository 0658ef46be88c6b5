//! Measurement and monitoring pipeline for latency-aware role assignment in
//! Byzantine replicated state machines.
//!
//! Replicas log latency vectors, suspicions, complaints and configuration
//! proposals to a shared log. Every replica replays the same log into the
//! same monitors and so derives the same latency matrix, candidate set and
//! configuration.

pub mod canonical;
pub mod config;
pub mod latency;
pub mod log;
pub mod misbehavior;
pub mod model;
pub mod monitors;
pub mod pbft;
pub mod scalar;
pub mod suspicion;
pub mod timeouts;
pub mod tree;
pub mod tree_candidates;

pub use canonical::Canonical;
pub use config::{Configuration, Layout, ScoreContext, Topology};
pub use latency::{build_latency_vector, LatencyMatrix, LatencyVector};
pub use log::{LogEntry, LogPayload, SharedLog};
pub use model::{Error, ReplicaId, Result, RoundNumber, SystemParams, ViewNumber, DEFAULT_WINDOW};
pub use monitors::MonitorSet;
pub use pbft::StarConfig;
pub use scalar::{LatencyScalar, Slack};
pub use timeouts::TimeoutTable;
pub use tree::TreeConfig;

/// Integer microseconds.
pub type Micros = u64;
pub type MicrosMatrix = LatencyMatrix<Micros>;
pub type FloatMatrix = LatencyMatrix<f64>;
pub type MicrosTimeouts = TimeoutTable<Micros>;

/// Sentinel for "never" / unreachable.
pub const INF: Micros = u64::MAX;
