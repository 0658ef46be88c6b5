//! Deterministic round simulator for the monitoring pipeline: a synthetic
//! WAN, adversaries, and the reconfiguration loop over a shared log.

pub mod adversary;
pub mod baseline;
pub mod error;
pub mod experiment;
pub mod geo;
pub mod round;
pub mod scenario;
pub mod world;

pub use adversary::Adversaries;
pub use baseline::{baseline_score, kauri_sa_trees};
pub use error::{Result, SimError};
pub use experiment::{run_experiment, Cause, ExperimentReport, ReconfigEvent, RoundRow, Summary};
pub use geo::synth_latency_matrix;
pub use round::{run_round, Previous, RoundSetup, RoundTrace};
pub use scenario::{AdversaryKind, AdversarySpec, LatencySource, Mode, ScenarioSpec};
pub use world::World;
