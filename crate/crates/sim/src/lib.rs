//! Deterministic discrete-event simulation of the proof-of-location
//! network.
//!
//! [`run`] executes a [`ScenarioConfig`] — peers placed in a plane exchange
//! requests and responses over a disc radio model, gossip proofs and blocks
//! through the location-based overlay, mint blocks under the stake rule,
//! and optionally rotate pseudonyms — and returns a [`SimReport`] that is
//! byte-identical for identical configs. Adversary roles cover the five
//! analyzed attacks; [`scenarios`] holds the canned regression families.

mod runner;
mod truth;

pub mod config;
pub mod report;
pub mod scenarios;

pub use config::{AdversarySpec, AttackKind, CollusionCase, ConfigError, LatencyRange, ScenarioConfig};
pub use report::{EventRecord, OutputRecord, SimReport, SCHEMA_VERSION};
pub use runner::{run, M_PER_MICRODEG};
