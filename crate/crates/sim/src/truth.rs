//! Ground-truth bookkeeping, outside the protocol.
//!
//! The registry records, at creation time, whether each proof honestly
//! reflects the world: were the two peers truly within range, and do the
//! claimed locations match where the participants actually stood. Reports
//! cross-check confirmed chains against this — never the other way around.

use std::collections::BTreeMap;

use polc_core::crypto::Digest;
use polc_core::geo::{distance_m, GeoLocation};
use polc_core::messages::ProofId;

#[derive(Debug, Clone, Copy)]
pub struct ProofTruth {
    /// Participants were not truly adjacent, or a claim misplaces one of
    /// them by more than the radio range.
    pub fake: bool,
    /// Created by an adversary's attack path.
    pub fabricated: bool,
}

#[derive(Debug, Default)]
pub struct TruthRegistry {
    proofs: BTreeMap<ProofId, ProofTruth>,
    /// Proof ids per block, recorded at creation; survives body pruning.
    blocks: BTreeMap<Digest, Vec<ProofId>>,
}

impl TruthRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Evaluates and records a proof created at a moment when the
    /// participants truly stood at `requester_true` / `responder_true` and
    /// claimed `requester_claim` / `responder_claim`. Unknown true
    /// positions (`None`) mark the proof fake outright: it names a peer
    /// that did not exist at creation time.
    #[allow(clippy::too_many_arguments)]
    pub fn register_proof(
        &mut self,
        id: ProofId,
        fabricated: bool,
        max_range_m: f64,
        requester_true: Option<GeoLocation>,
        responder_true: Option<GeoLocation>,
        requester_claim: GeoLocation,
        responder_claim: GeoLocation,
    ) {
        let fake = match (requester_true, responder_true) {
            (Some(rt), Some(st)) => {
                let too_far = |a, b| distance_m(a, b).map(|d| d > max_range_m).unwrap_or(true);
                too_far(rt, st) || too_far(requester_claim, rt) || too_far(responder_claim, st)
            }
            _ => true,
        };
        self.proofs.entry(id).or_insert(ProofTruth { fake, fabricated });
    }

    pub fn proof(&self, id: &ProofId) -> Option<ProofTruth> {
        self.proofs.get(id).copied()
    }

    pub fn register_block(&mut self, hash: Digest, proof_ids: Vec<ProofId>) {
        self.blocks.entry(hash).or_insert(proof_ids);
    }

    pub fn block_proofs(&self, hash: &Digest) -> Option<&[ProofId]> {
        self.blocks.get(hash).map(Vec::as_slice)
    }
}
