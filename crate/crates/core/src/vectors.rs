//! Golden encoding vectors for cross-implementation conformance.
//!
//! The same values are printed by `polc vectors` and documented in
//! `ENCODING.md`; a doc-sync test keeps the three in lockstep. Inputs are
//! fully pinned (fixed seeds, coordinates and timestamps), and both signing
//! and hashing are deterministic, so every byte here is reproducible.

use crate::chain::Block;
use crate::crypto::{generate_identity, hash, Digest, PublicKey};
use crate::geo::GeoLocation;
use crate::messages::{encode_request, make_request, make_response};

/// Named hex vectors, in print order.
pub fn golden_vectors() -> Vec<(&'static str, String)> {
    let genesis = hash(b"");

    // Fully pinned degenerate request: all-zero key, location (0,0),
    // zero hash, timestamp 0 — signing bytes only (no key can sign it).
    let zero_signing = encode_request(
        &PublicKey([0; 32]),
        GeoLocation::new(0, 0).unwrap(),
        &Digest([0; 32]),
        0,
    );

    // A signed exchange between two seeded identities. Requester at
    // (44.8015 N, 10.3279 E), responder ~80 m east.
    let requester = generate_identity([0x11; 32]);
    let responder = generate_identity([0x22; 32]);
    let req_loc = GeoLocation::new(44_801_500, 10_327_900).unwrap();
    let res_loc = GeoLocation::new(44_801_500, 10_328_900).unwrap();
    let request = make_request(&requester, req_loc, genesis, 1_000).unwrap();
    let response = make_response(&request, &responder, res_loc, 1_500).unwrap();
    let block = Block::new(vec![response.clone()], &responder, genesis).unwrap();

    vec![
        ("genesis_digest", genesis.to_string()),
        ("request_signing_zero", hex::encode(zero_signing)),
        ("requester_public_key", requester.public_key().to_string()),
        ("responder_public_key", responder.public_key().to_string()),
        ("request_wire", hex::encode(request.wire_bytes())),
        ("request_digest", request.digest().to_string()),
        ("response_wire", hex::encode(response.wire_bytes())),
        ("proof_id", response.proof_id().to_string()),
        ("block_wire", hex::encode(block.wire_bytes())),
        ("block_hash", block.block_hash().to_string()),
    ]
}
