//! Deterministic builders shared by unit tests, integration tests and the
//! simulator's test suites. Not part of the protocol surface.

use crate::crypto::{generate_identity, Digest, PeerIdentity};
use crate::geo::{GeoLocation, EARTH_RADIUS_M};
use crate::messages::{make_request, make_response, ProofResponse};

/// Meters represented by one micro-degree of longitude on the equator.
pub const M_PER_LON_MICRODEG: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0e6;

/// Identity seeded from an index.
pub fn identity(index: u64) -> PeerIdentity {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&index.to_be_bytes());
    seed[31] = 0xA5;
    generate_identity(seed)
}

/// `n` identities seeded from indices `0..n`.
pub fn identities(n: usize) -> Vec<PeerIdentity> {
    (0..n as u64).map(identity).collect()
}

/// A point on the equator `east_m` meters east of (0, 0).
pub fn spot_m(east_m: f64) -> GeoLocation {
    let lon = (east_m / M_PER_LON_MICRODEG).round() as i32;
    GeoLocation::new(0, lon).expect("test spot within coordinate range")
}

/// A well-formed proof between two peers 11 m apart, anchored at `anchor`.
pub fn proof_between(requester: &PeerIdentity, responder: &PeerIdentity, anchor: Digest, ts: u64) -> ProofResponse {
    proof_between_at(requester, responder, anchor, ts, 0.0, 11.0)
}

/// A well-formed proof with explicit claimed positions (meters east of the
/// origin) for each participant.
pub fn proof_between_at(
    requester: &PeerIdentity,
    responder: &PeerIdentity,
    anchor: Digest,
    ts: u64,
    requester_east_m: f64,
    responder_east_m: f64,
) -> ProofResponse {
    let req = make_request(requester, spot_m(requester_east_m), anchor, ts).expect("valid test request");
    make_response(&req, responder, spot_m(responder_east_m), ts + 1).expect("valid test response")
}
