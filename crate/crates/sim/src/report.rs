//! Run results and the line-record output schema.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Version stamped into every emitted record.
pub const SCHEMA_VERSION: u32 = 1;

/// One streamed event line (`polc run --events`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct EventRecord {
    pub time_ms: u64,
    pub peer: u32,
    pub action: String,
    pub detail: String,
}

/// Final result of one simulation run.
///
/// `fake_proofs_confirmed` is computed against the simulator's ground truth
/// (true positions at proof creation time), never against protocol state.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SimReport {
    pub seed: u64,
    /// Final main head per peer index, hex digests.
    pub final_heads: BTreeMap<u32, String>,
    /// Distinct proofs on the consensus branch (the most common honest
    /// head; ties toward the smallest digest).
    pub confirmed_proofs: u64,
    /// Proofs on any honest peer's main branch whose participants were not
    /// truly within range, or whose claims misplace a participant by more
    /// than the range.
    pub fake_proofs_confirmed: u64,
    /// Adversary-fabricated proofs that reached the consensus branch.
    pub adversary_proofs_confirmed: u64,
    /// Honest-peer rejection tallies keyed by stable reason strings.
    pub rejections: BTreeMap<String, u64>,
    /// All honest peers ended on the same head.
    pub convergence: bool,
    /// Fork-retained appends observed at honest peers.
    pub forks_observed: u64,
    /// Identity rotations executed.
    pub rotations: u64,
    /// Pseudonym links guessed by observer adversaries, when any observed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub linkage_guesses: Option<u64>,
    /// Per-event log, populated when `record_events` is set.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub events: Option<Vec<EventRecord>>,
}

impl SimReport {
    /// Canonical single-line JSON encoding; equal runs produce equal bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// One line of CLI output: an event or the final report, tagged and
/// schema-versioned.
#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutputRecord<'a> {
    Event { schema: u32, #[serde(flatten)] event: &'a EventRecord },
    Report { schema: u32, #[serde(flatten)] report: &'a SimReport },
}

impl<'a> OutputRecord<'a> {
    pub fn event(event: &'a EventRecord) -> Self {
        OutputRecord::Event { schema: SCHEMA_VERSION, event }
    }

    pub fn report(report: &'a SimReport) -> Self {
        OutputRecord::Report { schema: SCHEMA_VERSION, report }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}
