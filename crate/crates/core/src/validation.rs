//! The rule engine for requests, responses, gossiped proofs and blocks.
//!
//! All checks are stateless over an immutable context snapshot: the local
//! peer's chain view plus the two independent vantage points that defeat
//! collusion — the contact list keyed by overlay-declared locations and the
//! radio neighborhood keyed by true reachability. Callers snapshot the
//! context once per validation batch.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::chain::{Block, ChainStore};
use crate::crypto::{Digest, PublicKey, SigCache};
use crate::geo::{within_range, GeoLocation, RangeParams};
use crate::messages::{ProofId, ProofRequest, ProofResponse};

/// Why a message was rejected. Every rejection carries exactly one primary
/// code; the codes are stable strings surfaced in simulator reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    /// Sender is not both an overlay contact and radio-reachable.
    NotAContact,
    /// A signature does not verify under the claimed key.
    BadSignature,
    /// A claimed location is further than the short-range reach allows.
    OutOfRange,
    /// The referenced block is not the expected anchor (head for requests,
    /// within the latest `T` for proofs, within `2T` for blocks).
    StaleAnchor,
    /// The response came from a peer the request was never sent to.
    NotAddressee,
    /// The proof already exists in the chain view or the pending set.
    DuplicateProof,
    /// The request timestamp is outside the freshness window.
    StaleTimestamp,
    /// Requester and responder are the same peer.
    SelfProof,
    /// The collusion cross-checks failed: a participant claiming adjacency
    /// is radio-silent, or a claimed location contradicts the overlay
    /// declaration.
    CollusionSuspect,
    /// Encoded coordinates violate the coordinate invariants.
    InvalidCoordinates,
    /// The producer already minted a block within the latest `T` blocks.
    MonopolyViolation,
    /// The producer is not the eligible leader for this branch.
    NotLeader,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::NotAContact => "not_a_contact",
            RejectReason::BadSignature => "bad_signature",
            RejectReason::OutOfRange => "out_of_range",
            RejectReason::StaleAnchor => "stale_anchor",
            RejectReason::NotAddressee => "not_addressee",
            RejectReason::DuplicateProof => "duplicate_proof",
            RejectReason::StaleTimestamp => "stale_timestamp",
            RejectReason::SelfProof => "self_proof",
            RejectReason::CollusionSuspect => "collusion_suspect",
            RejectReason::InvalidCoordinates => "invalid_coordinates",
            RejectReason::MonopolyViolation => "monopoly_violation",
            RejectReason::NotLeader => "not_leader",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The local peer's vantage point, minus the chain handle.
///
/// `overlay_contacts` and `overlay_locations` come from the location-based
/// overlay (declared locations); `radio_reachable` reflects who is
/// physically within short-range reach right now. Honest peers declare
/// truthfully, so for them the two views agree.
#[derive(Debug, Clone)]
pub struct PeerView {
    pub local_pk: PublicKey,
    pub local_location: GeoLocation,
    pub overlay_contacts: BTreeSet<PublicKey>,
    pub radio_reachable: BTreeSet<PublicKey>,
    /// Declared locations of peers this peer knows through the overlay.
    /// Sub-checks against declarations are skipped for peers not listed.
    pub overlay_locations: BTreeMap<PublicKey, GeoLocation>,
    pub range: RangeParams,
    pub now_ms: u64,
    pub freshness_window_ms: u64,
    /// Test hook: disables every range comparison (admissibility, proof
    /// proximity and the collusion cross-checks). Exists so the attack
    /// regression suite can prove it detects a disabled defense; never set
    /// in production paths.
    pub skip_range_checks: bool,
}

impl PeerView {
    /// Range check honoring the mutation hook. Invalid coordinates count as
    /// out of range rather than panicking; the structural checks report
    /// them precisely.
    fn in_range(&self, a: GeoLocation, b: GeoLocation) -> bool {
        if self.skip_range_checks {
            return true;
        }
        within_range(a, b, self.range).unwrap_or(false)
    }
}

/// Everything a validation rule may consult.
#[derive(Clone, Copy)]
pub struct ValidationContext<'a> {
    pub chain: &'a ChainStore,
    pub view: &'a PeerView,
    /// Optional signature-verdict memoization shared across validations.
    pub sig_cache: Option<&'a SigCache>,
}

impl<'a> ValidationContext<'a> {
    pub fn chain_head(&self) -> Digest {
        self.chain.head()
    }

    fn cached(&self, key: Digest, compute: impl FnOnce() -> bool) -> bool {
        match self.sig_cache {
            Some(cache) => cache.check(key, compute),
            None => compute(),
        }
    }

    /// Structural validity of a proof: coordinates, distinct participants,
    /// both signatures. Memoized under the proof id.
    fn proof_structural(&self, p: &ProofResponse) -> Result<(), RejectReason> {
        if !p.location.is_valid() || !p.request.location.is_valid() {
            return Err(RejectReason::InvalidCoordinates);
        }
        if p.responder_pk == p.request.requester_pk {
            return Err(RejectReason::SelfProof);
        }
        if !self.cached(p.proof_id().0, || p.verify_signatures()) {
            return Err(RejectReason::BadSignature);
        }
        Ok(())
    }
}

/// Outcome of [`verify_request`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestVerdict {
    Accept,
    Reject {
        reason: RejectReason,
        /// Set on anchor mismatches: the two peers disagree about the chain
        /// tip and should start a synchronization exchange.
        needs_sync: bool,
    },
}

impl RequestVerdict {
    fn reject(reason: RejectReason) -> Self {
        RequestVerdict::Reject { reason, needs_sync: false }
    }

    pub fn is_accept(&self) -> bool {
        matches!(self, RequestVerdict::Accept)
    }
}

/// Validates a proof-of-location request received over the short-range
/// channel, in rule order:
///
/// 1. the requester is a known overlay contact *and* radio-reachable;
/// 2. the signature verifies;
/// 3. the claimed location is within short-range reach of here;
/// 4. the request anchors at the chain head — a mismatch additionally asks
///    the caller to trigger chain synchronization;
/// 5. the timestamp lies within the freshness window.
pub fn verify_request(req: &ProofRequest, ctx: &ValidationContext<'_>) -> RequestVerdict {
    let view = ctx.view;
    if !req.location.is_valid() {
        return RequestVerdict::reject(RejectReason::InvalidCoordinates);
    }
    if !view.overlay_contacts.contains(&req.requester_pk) || !view.radio_reachable.contains(&req.requester_pk) {
        return RequestVerdict::reject(RejectReason::NotAContact);
    }
    if !ctx.cached(req.digest(), || req.verify_signature()) {
        return RequestVerdict::reject(RejectReason::BadSignature);
    }
    if !view.in_range(req.location, view.local_location) {
        return RequestVerdict::reject(RejectReason::OutOfRange);
    }
    if req.prev_block_hash != ctx.chain_head() {
        return RequestVerdict::Reject { reason: RejectReason::StaleAnchor, needs_sync: true };
    }
    if view.now_ms.abs_diff(req.timestamp_ms) > view.freshness_window_ms {
        return RequestVerdict::reject(RejectReason::StaleTimestamp);
    }
    RequestVerdict::Accept
}

/// Validates a response to a request this peer produced. `sent_to` is the
/// set of peers the request was addressed to. Only the original requester
/// runs this (`ctx.view.local_pk == res.request.requester_pk`).
///
/// 1. the responder is one of the peers the request was sent to;
/// 2. both the response signature and the embedded request signature
///    verify;
/// 3. the responder's claimed location is within short-range reach of here.
pub fn verify_response(
    res: &ProofResponse,
    ctx: &ValidationContext<'_>,
    sent_to: &BTreeSet<PublicKey>,
) -> Result<(), RejectReason> {
    let view = ctx.view;
    if !res.location.is_valid() {
        return Err(RejectReason::InvalidCoordinates);
    }
    if res.responder_pk == res.request.requester_pk {
        return Err(RejectReason::SelfProof);
    }
    if !sent_to.contains(&res.responder_pk) {
        return Err(RejectReason::NotAddressee);
    }
    if !ctx.cached(res.proof_id().0, || res.verify_signatures()) {
        return Err(RejectReason::BadSignature);
    }
    if !view.in_range(res.location, view.local_location) {
        return Err(RejectReason::OutOfRange);
    }
    Ok(())
}

/// Validates a proof-of-location relayed through gossip, from the vantage
/// point of an uninvolved third party.
///
/// Checks, in order: both signatures; the two claimed locations are within
/// short-range reach of each other; the proof is not already confirmed in
/// the chain view nor queued in `pending`; the anchor refers to one of the
/// latest `T` blocks; and the collusion cross-checks — a participant
/// claiming to be within reach of here must actually be radio-reachable,
/// and a participant's claimed location must agree with its overlay
/// declaration whenever that declaration is known.
pub fn verify_gossiped_proof(
    p: &ProofResponse,
    ctx: &ValidationContext<'_>,
    pending: &BTreeSet<ProofId>,
) -> Result<(), RejectReason> {
    let view = ctx.view;
    ctx.proof_structural(p)?;
    if !view.in_range(p.request.location, p.location) {
        return Err(RejectReason::OutOfRange);
    }
    let id = p.proof_id();
    if pending.contains(&id) {
        return Err(RejectReason::DuplicateProof);
    }
    match ctx.chain.proof_ids_in_horizon(ctx.chain_head()) {
        Ok(confirmed) if confirmed.contains(&id) => return Err(RejectReason::DuplicateProof),
        _ => {}
    }
    if !ctx.chain.anchor_window().contains(&p.request.prev_block_hash) {
        return Err(RejectReason::StaleAnchor);
    }
    let participants = [
        (p.request.requester_pk, p.request.location),
        (p.responder_pk, p.location),
    ];
    for (pk, claimed) in participants {
        if pk == view.local_pk {
            continue; // the local peer knows where it is
        }
        if view.in_range(claimed, view.local_location) && !view.radio_reachable.contains(&pk) {
            return Err(RejectReason::CollusionSuspect);
        }
        if let Some(declared) = view.overlay_locations.get(&pk) {
            if !view.in_range(claimed, *declared) {
                return Err(RejectReason::CollusionSuspect);
            }
        }
    }
    Ok(())
}

/// Outcome of [`verify_block`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockVerdict {
    /// Valid and extends the current head.
    Accept,
    /// Valid and extends a known non-head block within the `2T` horizon;
    /// keep it as a competing branch.
    Fork,
    Reject(RejectReason),
}

/// Validates a block against the local chain view.
///
/// A block must: verify under its producer's signature; anchor at the head
/// (outcome [`BlockVerdict::Accept`]) or at a known block within the `2T`
/// horizon (outcome [`BlockVerdict::Fork`]); contain only proofs that pass
/// signature and proximity checks; repeat no proof confirmed on the branch
/// it extends; respect the monopoly guard (its producer minted none of the
/// latest `T` blocks of that branch); be minted by the eligible leader for
/// that branch (any producer is acceptable while the stake window is
/// empty); and, for proofs naming this peer, name only counterparts this
/// peer knows through the overlay.
pub fn verify_block(b: &Block, ctx: &ValidationContext<'_>) -> BlockVerdict {
    let view = ctx.view;
    if b.proofs.is_empty() {
        // Unconstructible through the public constructors; rejected
        // defensively for hand-rolled bytes.
        return BlockVerdict::Reject(RejectReason::BadSignature);
    }
    if !ctx.cached(b.block_hash(), || b.verify_signature()) {
        return BlockVerdict::Reject(RejectReason::BadSignature);
    }

    let head = ctx.chain_head();
    let is_extension = b.prev_hash == head;
    if !is_extension {
        let Some(prev_height) = ctx.chain.height_of(&b.prev_hash) else {
            return BlockVerdict::Reject(RejectReason::StaleAnchor);
        };
        let head_height = ctx.chain.head_height();
        if head_height.saturating_sub(prev_height) > ctx.chain.params().horizon() {
            return BlockVerdict::Reject(RejectReason::StaleAnchor);
        }
    }

    let mut seen = BTreeSet::new();
    for p in &b.proofs {
        match ctx.proof_structural(p) {
            Ok(()) => {}
            // Structural failures inside a block discredit the whole block.
            Err(reason) => return BlockVerdict::Reject(reason),
        }
        if !view.in_range(p.request.location, p.location) {
            return BlockVerdict::Reject(RejectReason::OutOfRange);
        }
        if !seen.insert(p.proof_id()) {
            return BlockVerdict::Reject(RejectReason::DuplicateProof);
        }
        // Proofs about this peer must involve counterparts it knows.
        let locals = [
            (p.request.requester_pk, p.responder_pk),
            (p.responder_pk, p.request.requester_pk),
        ];
        for (me, counterpart) in locals {
            if me == view.local_pk && !view.overlay_contacts.contains(&counterpart) {
                return BlockVerdict::Reject(RejectReason::NotAContact);
            }
        }
    }

    match ctx.chain.proof_ids_in_horizon(b.prev_hash) {
        Ok(confirmed) => {
            if b.proofs.iter().any(|p| confirmed.contains(&p.proof_id())) {
                return BlockVerdict::Reject(RejectReason::DuplicateProof);
            }
        }
        Err(_) => return BlockVerdict::Reject(RejectReason::StaleAnchor),
    }

    match ctx.chain.producers_in_window(b.prev_hash) {
        Ok(recent) => {
            if recent.contains(&b.producer_pk) {
                return BlockVerdict::Reject(RejectReason::MonopolyViolation);
            }
        }
        Err(_) => return BlockVerdict::Reject(RejectReason::StaleAnchor),
    }

    match ctx.chain.compute_stake(b.prev_hash) {
        Ok(stake) if stake.is_empty() => {} // fresh network: anyone may mint
        Ok(_) => match ctx.chain.eligible_leader(b.prev_hash) {
            Ok(Some(leader)) if leader == b.producer_pk => {}
            Ok(_) => return BlockVerdict::Reject(RejectReason::NotLeader),
            Err(_) => return BlockVerdict::Reject(RejectReason::StaleAnchor),
        },
        Err(_) => return BlockVerdict::Reject(RejectReason::StaleAnchor),
    }

    if is_extension {
        BlockVerdict::Accept
    } else {
        BlockVerdict::Fork
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{AppendOutcome, ChainParams};
    use crate::crypto::{hash, PeerIdentity, SigCache};
    use crate::messages::{make_request, make_response};
    use crate::testkit;

    struct Net {
        ids: Vec<PeerIdentity>,
        store: ChainStore,
    }

    // Peers sit 11 m apart on the equator; range 100 m.
    fn net(n: usize) -> Net {
        Net { ids: testkit::identities(n), store: ChainStore::new(ChainParams::new(5, false)) }
    }

    fn view_for(net: &Net, me: usize, now: u64) -> PeerView {
        let located: Vec<(PublicKey, GeoLocation)> = net
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.public_key(), testkit::spot_m(i as f64 * 11.0)))
            .collect();
        let everyone: BTreeSet<PublicKey> =
            located.iter().map(|(pk, _)| *pk).filter(|pk| *pk != net.ids[me].public_key()).collect();
        PeerView {
            local_pk: net.ids[me].public_key(),
            local_location: testkit::spot_m(me as f64 * 11.0),
            overlay_contacts: everyone.clone(),
            radio_reachable: everyone,
            overlay_locations: located.into_iter().collect(),
            range: RangeParams::default(),
            now_ms: now,
            freshness_window_ms: 30_000,
            skip_range_checks: false,
        }
    }

    fn ctx<'a>(net: &'a Net, view: &'a PeerView) -> ValidationContext<'a> {
        ValidationContext { chain: &net.store, view, sig_cache: None }
    }

    #[test]
    fn honest_request_anchored_at_head_is_accepted() {
        let net = net(2);
        let req = make_request(&net.ids[0], testkit::spot_m(0.0), net.store.head(), 1_000).unwrap();
        let view = view_for(&net, 1, 1_000);
        assert_eq!(verify_request(&req, &ctx(&net, &view)), RequestVerdict::Accept);
    }

    #[test]
    fn request_rule_1_unknown_requester_is_not_a_contact() {
        let net = net(2);
        let stranger = testkit::identity(99);
        let req = make_request(&stranger, testkit::spot_m(0.0), net.store.head(), 1_000).unwrap();
        let view = view_for(&net, 1, 1_000);
        assert_eq!(
            verify_request(&req, &ctx(&net, &view)),
            RequestVerdict::reject(RejectReason::NotAContact)
        );
    }

    #[test]
    fn request_rule_1_requires_radio_reachability_too() {
        let net = net(2);
        let req = make_request(&net.ids[0], testkit::spot_m(0.0), net.store.head(), 1_000).unwrap();
        let mut view = view_for(&net, 1, 1_000);
        view.radio_reachable.clear();
        assert_eq!(
            verify_request(&req, &ctx(&net, &view)),
            RequestVerdict::reject(RejectReason::NotAContact)
        );
    }

    #[test]
    fn request_rule_2_tampered_signature_is_rejected() {
        let net = net(2);
        let mut req = make_request(&net.ids[0], testkit::spot_m(0.0), net.store.head(), 1_000).unwrap();
        req.timestamp_ms += 1;
        let view = view_for(&net, 1, 1_000);
        assert_eq!(
            verify_request(&req, &ctx(&net, &view)),
            RequestVerdict::reject(RejectReason::BadSignature)
        );
    }

    #[test]
    fn request_rule_3_distant_claim_is_out_of_range() {
        let net = net(2);
        // Claim a spot ~10 km east; the verifier sits at the origin.
        let req = make_request(&net.ids[0], testkit::spot_m(10_000.0), net.store.head(), 1_000).unwrap();
        let view = view_for(&net, 1, 1_000);
        assert_eq!(
            verify_request(&req, &ctx(&net, &view)),
            RequestVerdict::reject(RejectReason::OutOfRange)
        );
    }

    #[test]
    fn request_rule_4_wrong_anchor_asks_for_sync() {
        let net = net(2);
        let req = make_request(&net.ids[0], testkit::spot_m(0.0), hash(b"elsewhere"), 1_000).unwrap();
        let view = view_for(&net, 1, 1_000);
        assert_eq!(
            verify_request(&req, &ctx(&net, &view)),
            RequestVerdict::Reject { reason: RejectReason::StaleAnchor, needs_sync: true }
        );
    }

    #[test]
    fn request_outside_freshness_window_is_stale() {
        let net = net(2);
        let req = make_request(&net.ids[0], testkit::spot_m(0.0), net.store.head(), 1_000).unwrap();
        let view = view_for(&net, 1, 100_000);
        assert_eq!(
            verify_request(&req, &ctx(&net, &view)),
            RequestVerdict::reject(RejectReason::StaleTimestamp)
        );
    }

    #[test]
    fn response_rules_accept_addressee_and_reject_each_failure() {
        let net = net(3);
        let requester = &net.ids[0];
        let req = make_request(requester, testkit::spot_m(0.0), net.store.head(), 1_000).unwrap();
        let res = make_response(&req, &net.ids[1], testkit::spot_m(11.0), 1_001).unwrap();
        let view = view_for(&net, 0, 1_001);
        let sent_to: BTreeSet<PublicKey> = [net.ids[1].public_key()].into();

        // Rule order: addressee, signature, range.
        assert_eq!(verify_response(&res, &ctx(&net, &view), &sent_to), Ok(()));

        let never_sent: BTreeSet<PublicKey> = [net.ids[2].public_key()].into();
        assert_eq!(
            verify_response(&res, &ctx(&net, &view), &never_sent),
            Err(RejectReason::NotAddressee)
        );

        let mut tampered = res.clone();
        tampered.timestamp_ms += 1;
        assert_eq!(
            verify_response(&tampered, &ctx(&net, &view), &sent_to),
            Err(RejectReason::BadSignature)
        );

        let far = make_response(&req, &net.ids[1], testkit::spot_m(5_000.0), 1_001).unwrap();
        assert_eq!(
            verify_response(&far, &ctx(&net, &view), &sent_to),
            Err(RejectReason::OutOfRange)
        );
    }

    #[test]
    fn response_with_tampered_embedded_request_is_rejected() {
        let net = net(2);
        let req = make_request(&net.ids[0], testkit::spot_m(0.0), net.store.head(), 1_000).unwrap();
        let mut res = make_response(&req, &net.ids[1], testkit::spot_m(11.0), 1_001).unwrap();
        res.request.timestamp_ms += 1;
        // Re-sign the outer response so only the embedded signature is bad.
        res.signature = net.ids[1].sign(&res.signing_bytes());
        let view = view_for(&net, 0, 1_001);
        let sent_to: BTreeSet<PublicKey> = [net.ids[1].public_key()].into();
        assert_eq!(
            verify_response(&res, &ctx(&net, &view), &sent_to),
            Err(RejectReason::BadSignature)
        );
    }

    #[test]
    fn gossiped_proof_between_mutual_contacts_is_accepted() {
        let net = net(3);
        let proof = testkit::proof_between(&net.ids[0], &net.ids[1], net.store.head(), 1_000);
        let view = view_for(&net, 2, 1_000);
        assert_eq!(verify_gossiped_proof(&proof, &ctx(&net, &view), &BTreeSet::new()), Ok(()));
    }

    #[test]
    fn gossiped_proof_with_distant_participants_is_out_of_range() {
        let net = net(3);
        let req = make_request(&net.ids[0], testkit::spot_m(0.0), net.store.head(), 1_000).unwrap();
        let res = make_response(&req, &net.ids[1], testkit::spot_m(9_000.0), 1_001).unwrap();
        let view = view_for(&net, 2, 1_001);
        assert_eq!(
            verify_gossiped_proof(&res, &ctx(&net, &view), &BTreeSet::new()),
            Err(RejectReason::OutOfRange)
        );
    }

    #[test]
    fn relaying_the_same_proof_twice_is_a_duplicate() {
        let net = net(3);
        let proof = testkit::proof_between(&net.ids[0], &net.ids[1], net.store.head(), 1_000);
        let view = view_for(&net, 2, 1_000);
        let mut pending = BTreeSet::new();
        assert_eq!(verify_gossiped_proof(&proof, &ctx(&net, &view), &pending), Ok(()));
        pending.insert(proof.proof_id());
        assert_eq!(
            verify_gossiped_proof(&proof, &ctx(&net, &view), &pending),
            Err(RejectReason::DuplicateProof)
        );
    }

    #[test]
    fn confirmed_proof_relayed_again_is_a_duplicate() {
        let mut net = net(3);
        let proof = testkit::proof_between(&net.ids[0], &net.ids[1], net.store.head(), 1_000);
        let block = Block::new(vec![proof.clone()], &net.ids[0], net.store.head()).unwrap();
        net.store.insert_unchecked(block);
        let view = view_for(&net, 2, 1_000);
        assert_eq!(
            verify_gossiped_proof(&proof, &ctx(&net, &view), &BTreeSet::new()),
            Err(RejectReason::DuplicateProof)
        );
    }

    #[test]
    fn proof_anchored_deeper_than_t_is_stale() {
        let mut net = net(3);
        let anchors: Vec<Digest> = {
            let mut tips = vec![net.store.head()];
            for ts in 0..6u64 {
                let p = testkit::proof_between(&net.ids[0], &net.ids[1], *tips.last().unwrap(), ts);
                let b = Block::new(vec![p], &net.ids[(ts % 3) as usize], *tips.last().unwrap()).unwrap();
                tips.push(net.store.insert_unchecked(b));
            }
            tips
        };
        // T=5, height 6: genesis and block 1 are out of the anchor window.
        let fresh = testkit::proof_between_at(&net.ids[0], &net.ids[1], anchors[1], 2_000, 0.0, 11.0);
        let view = view_for(&net, 2, 2_000);
        assert_eq!(
            verify_gossiped_proof(&fresh, &ctx(&net, &view), &BTreeSet::new()),
            Err(RejectReason::StaleAnchor)
        );
    }

    #[test]
    fn claimed_adjacency_without_radio_contact_is_collusion() {
        let net = net(3);
        // Both participants claim to be right next to peer 2 (at 22 m),
        // but neither is radio-reachable from it.
        let proof = testkit::proof_between_at(&net.ids[0], &net.ids[1], net.store.head(), 1_000, 22.0, 33.0);
        let mut view = view_for(&net, 2, 1_000);
        view.radio_reachable.clear();
        view.overlay_locations.clear();
        assert_eq!(
            verify_gossiped_proof(&proof, &ctx(&net, &view), &BTreeSet::new()),
            Err(RejectReason::CollusionSuspect)
        );
    }

    #[test]
    fn claim_contradicting_overlay_declaration_is_collusion() {
        let net = net(3);
        // Participant 0 claims ~5 km away from where the overlay says it is.
        let proof = testkit::proof_between_at(&net.ids[0], &net.ids[1], net.store.head(), 1_000, 5_000.0, 5_011.0);
        let view = view_for(&net, 2, 1_000);
        assert_eq!(
            verify_gossiped_proof(&proof, &ctx(&net, &view), &BTreeSet::new()),
            Err(RejectReason::CollusionSuspect)
        );
    }

    #[test]
    fn declaration_check_is_skipped_when_unknown() {
        let net = net(3);
        let proof = testkit::proof_between_at(&net.ids[0], &net.ids[1], net.store.head(), 1_000, 5_000.0, 5_011.0);
        let mut view = view_for(&net, 2, 1_000);
        view.overlay_locations.clear();
        // Far-away claim, no adjacency to the observer, declarations unknown.
        assert_eq!(verify_gossiped_proof(&proof, &ctx(&net, &view), &BTreeSet::new()), Ok(()));
    }

    #[test]
    fn self_proof_is_rejected_everywhere() {
        let net = net(2);
        let req = make_request(&net.ids[0], testkit::spot_m(0.0), net.store.head(), 1_000).unwrap();
        let mut res = make_response(&req, &net.ids[1], testkit::spot_m(11.0), 1_001).unwrap();
        res.responder_pk = net.ids[0].public_key();
        let view = view_for(&net, 1, 1_001);
        assert_eq!(
            verify_gossiped_proof(&res, &ctx(&net, &view), &BTreeSet::new()),
            Err(RejectReason::SelfProof)
        );
    }

    #[test]
    fn leader_block_on_head_is_accepted_and_advances_head() {
        let mut net = net(3);
        let view = view_for(&net, 2, 1_000);
        let proof = testkit::proof_between(&net.ids[0], &net.ids[1], net.store.head(), 1_000);
        let block = Block::new(vec![proof], &net.ids[2], net.store.head()).unwrap();
        let hash = block.block_hash();
        assert_eq!(net.store.append(block, &view, None), AppendOutcome::Accepted);
        assert_eq!(net.store.head(), hash);
    }

    #[test]
    fn same_producer_twice_within_t_is_a_monopoly_violation() {
        let mut net = net(3);
        net.store = ChainStore::new(ChainParams::new(10, false));
        let view = view_for(&net, 2, 1_000);
        let p1 = testkit::proof_between(&net.ids[0], &net.ids[1], net.store.head(), 1_000);
        let b1 = Block::new(vec![p1], &net.ids[0], net.store.head()).unwrap();
        assert_eq!(net.store.append(b1, &view, None), AppendOutcome::Accepted);

        let p2 = testkit::proof_between_at(&net.ids[0], &net.ids[1], net.store.head(), 2_000, 0.0, 11.0);
        let b2 = Block::new(vec![p2], &net.ids[0], net.store.head()).unwrap();
        assert_eq!(
            net.store.append(b2, &view, None),
            AppendOutcome::Rejected(RejectReason::MonopolyViolation)
        );
    }

    #[test]
    fn block_repeating_a_confirmed_proof_is_a_duplicate() {
        let mut net = net(3);
        let view = view_for(&net, 2, 1_000);
        let proof = testkit::proof_between(&net.ids[0], &net.ids[1], net.store.head(), 1_000);
        let b1 = Block::new(vec![proof.clone()], &net.ids[0], net.store.head()).unwrap();
        assert_eq!(net.store.append(b1, &view, None), AppendOutcome::Accepted);

        let b2 = Block::new(vec![proof], &net.ids[1], net.store.head()).unwrap();
        assert_eq!(
            net.store.append(b2, &view, None),
            AppendOutcome::Rejected(RejectReason::DuplicateProof)
        );
    }

    #[test]
    fn block_on_sibling_of_head_is_retained_as_fork() {
        let mut net = net(4);
        let view = view_for(&net, 3, 1_000);
        let genesis = net.store.head();
        let p1 = testkit::proof_between(&net.ids[0], &net.ids[1], genesis, 1_000);
        let b1 = Block::new(vec![p1], &net.ids[0], genesis).unwrap();
        assert_eq!(net.store.append(b1, &view, None), AppendOutcome::Accepted);

        // A competing block at the same height, from a different producer.
        let p2 = testkit::proof_between_at(&net.ids[1], &net.ids[2], genesis, 1_001, 11.0, 22.0);
        let b2 = Block::new(vec![p2], &net.ids[1], genesis).unwrap();
        assert_eq!(net.store.append(b2, &view, None), AppendOutcome::ForkRetained);
    }

    #[test]
    fn block_anchored_beyond_the_fork_horizon_is_stale() {
        let mut net = net(3);
        net.store = ChainStore::new(ChainParams::new(1, false));
        let view = view_for(&net, 2, 0);
        let mut tips = vec![net.store.head()];
        for ts in 0..4u64 {
            let leader = net.store.eligible_leader(net.store.head()).unwrap();
            let producer = net
                .ids
                .iter()
                .find(|id| Some(id.public_key()) == leader)
                .unwrap_or(&net.ids[2]);
            let p = testkit::proof_between(&net.ids[0], &net.ids[1], *tips.last().unwrap(), ts);
            let b = Block::new(vec![p], producer, *tips.last().unwrap()).unwrap();
            let outcome = net.store.append(b, &view, None);
            assert!(matches!(outcome, AppendOutcome::Accepted), "setup block {ts}: {outcome:?}");
            tips.push(net.store.head());
        }
        // T=1, horizon 2, head height 4: anchoring at height 1 is too deep.
        let p = testkit::proof_between_at(&net.ids[0], &net.ids[1], tips[1], 99, 0.0, 11.0);
        let b = Block::new(vec![p], &net.ids[1], tips[1]).unwrap();
        assert_eq!(
            net.store.append(b, &view, None),
            AppendOutcome::Rejected(RejectReason::StaleAnchor)
        );
    }

    #[test]
    fn non_leader_block_is_rejected_once_stake_exists() {
        let mut net = net(4);
        let view = view_for(&net, 3, 1_000);
        let genesis = net.store.head();
        // Build stake: A and B appear in the first block, minted by C.
        let p = testkit::proof_between(&net.ids[0], &net.ids[1], genesis, 1_000);
        let b1 = Block::new(vec![p], &net.ids[2], genesis).unwrap();
        assert_eq!(net.store.append(b1, &view, None), AppendOutcome::Accepted);

        let leader = net.store.eligible_leader(net.store.head()).unwrap().unwrap();
        let non_leader = net
            .ids
            .iter()
            .find(|id| id.public_key() != leader && id.public_key() != net.ids[2].public_key())
            .unwrap();
        let p2 = testkit::proof_between_at(&net.ids[0], &net.ids[1], net.store.head(), 2_000, 0.0, 11.0);
        let b2 = Block::new(vec![p2], non_leader, net.store.head()).unwrap();
        assert_eq!(
            net.store.append(b2, &view, None),
            AppendOutcome::Rejected(RejectReason::NotLeader)
        );
    }

    #[test]
    fn proof_naming_local_peer_requires_known_counterpart() {
        let mut net = net(3);
        let view = {
            let mut v = view_for(&net, 1, 1_000);
            // Peer 1 no longer knows peer 0 through the overlay.
            v.overlay_contacts.remove(&net.ids[0].public_key());
            v
        };
        let proof = testkit::proof_between(&net.ids[0], &net.ids[1], net.store.head(), 1_000);
        let block = Block::new(vec![proof], &net.ids[2], net.store.head()).unwrap();
        assert_eq!(
            net.store.append(block, &view, None),
            AppendOutcome::Rejected(RejectReason::NotAContact)
        );
    }

    #[test]
    fn verdicts_are_deterministic_for_a_fixed_context() {
        let net = net(3);
        let view = view_for(&net, 2, 1_000);
        let proof = testkit::proof_between(&net.ids[0], &net.ids[1], net.store.head(), 1_000);
        let first = verify_gossiped_proof(&proof, &ctx(&net, &view), &BTreeSet::new());
        for _ in 0..5 {
            assert_eq!(verify_gossiped_proof(&proof, &ctx(&net, &view), &BTreeSet::new()), first);
        }
    }

    #[test]
    fn sig_cache_does_not_change_verdicts() {
        let net = net(3);
        let view = view_for(&net, 2, 1_000);
        let good = testkit::proof_between(&net.ids[0], &net.ids[1], net.store.head(), 1_000);
        let mut bad = good.clone();
        bad.timestamp_ms += 1;

        let cache = SigCache::new();
        for p in [&good, &bad] {
            let plain = {
                let c = ValidationContext { chain: &net.store, view: &view, sig_cache: None };
                verify_gossiped_proof(p, &c, &BTreeSet::new())
            };
            for _ in 0..3 {
                let c = ValidationContext { chain: &net.store, view: &view, sig_cache: Some(&cache) };
                assert_eq!(verify_gossiped_proof(p, &c, &BTreeSet::new()), plain);
            }
        }
    }
}
