//! Proof-of-location request/response messages and their canonical
//! encodings.
//!
//! The canonical encoding is the exact byte sequence that is signed, hashed
//! and sent: fixed field order, fixed-width big-endian integers, no framing.
//! Each message type is prefixed with a distinct one-byte domain tag so a
//! signature over one type can never validate as another. Golden hex
//! vectors for every encoding live in `ENCODING.md` and behind
//! `polc vectors`.

use thiserror::Error;

use crate::crypto::{self, Digest, PeerIdentity, PublicKey, Signature, DIGEST_LEN, PUBLIC_KEY_LEN, SIGNATURE_LEN};
use crate::geo::{GeoError, GeoLocation};

/// Domain-separation tag prefixed to request signing bytes.
pub const REQUEST_TAG: u8 = 0x01;
/// Domain-separation tag prefixed to response signing bytes.
pub const RESPONSE_TAG: u8 = 0x02;
/// Domain-separation tag prefixed to block signing bytes.
pub const BLOCK_TAG: u8 = 0x03;

/// Tag + pk(32) + lat(4) + lon(4) + prev hash(32) + timestamp(8).
pub const REQUEST_SIGNING_LEN: usize = 1 + PUBLIC_KEY_LEN + 4 + 4 + DIGEST_LEN + 8;
/// Signing bytes followed by the detached signature.
pub const REQUEST_WIRE_LEN: usize = REQUEST_SIGNING_LEN + SIGNATURE_LEN;
/// Tag + embedded request wire + pk(32) + lat(4) + lon(4) + timestamp(8).
pub const RESPONSE_SIGNING_LEN: usize = 1 + REQUEST_WIRE_LEN + PUBLIC_KEY_LEN + 4 + 4 + 8;
/// Signing bytes followed by the detached signature.
pub const RESPONSE_WIRE_LEN: usize = RESPONSE_SIGNING_LEN + SIGNATURE_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MessageError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("a peer cannot attest its own location (responder equals requester)")]
    SelfResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("wrong length: expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("wrong domain tag: expected {expected:#04x}, got {got:#04x}")]
    Tag { expected: u8, got: u8 },
    #[error("encoded coordinates out of range")]
    InvalidCoordinates,
    #[error("block proof count {0} exceeds the decode limit")]
    TooManyProofs(u32),
    #[error("a block must contain at least one proof")]
    EmptyBlock,
}

/// Identity of a proof-of-location: the digest of the canonical encoding of
/// a [`ProofResponse`]. Used for duplicate detection in gossip and blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProofId(pub Digest);

impl std::fmt::Display for ProofId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// A signed claim "I am at `location`, my chain ends at `prev_block_hash`".
///
/// Broadcast over the short-range channel to the requester's neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofRequest {
    pub requester_pk: PublicKey,
    pub location: GeoLocation,
    pub prev_block_hash: Digest,
    pub timestamp_ms: u64,
    /// Signature over [`ProofRequest::signing_bytes`] under `requester_pk`.
    pub signature: Signature,
}

impl ProofRequest {
    /// The canonical bytes covered by the request signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        encode_request(&self.requester_pk, self.location, &self.prev_block_hash, self.timestamp_ms)
    }

    /// Canonical wire encoding: signing bytes followed by the signature.
    pub fn wire_bytes(&self) -> Vec<u8> {
        let mut out = self.signing_bytes();
        out.extend_from_slice(&self.signature.0);
        out
    }

    /// Digest of the wire encoding; stable identity for dedup and for
    /// matching responses to in-flight requests.
    pub fn digest(&self) -> Digest {
        crypto::hash(&self.wire_bytes())
    }

    /// Checks the request signature under `requester_pk`.
    pub fn verify_signature(&self) -> bool {
        crypto::verify(&self.signature, &self.signing_bytes(), &self.requester_pk)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() != REQUEST_WIRE_LEN {
            return Err(CodecError::Length { expected: REQUEST_WIRE_LEN, got: bytes.len() });
        }
        if bytes[0] != REQUEST_TAG {
            return Err(CodecError::Tag { expected: REQUEST_TAG, got: bytes[0] });
        }
        let mut r = Reader::new(&bytes[1..]);
        let requester_pk = PublicKey(r.array::<PUBLIC_KEY_LEN>());
        let lat = r.i32();
        let lon = r.i32();
        let prev_block_hash = Digest(r.array::<DIGEST_LEN>());
        let timestamp_ms = r.u64();
        let signature = Signature(r.array::<SIGNATURE_LEN>());
        let location = GeoLocation::new(lat, lon).map_err(|_| CodecError::InvalidCoordinates)?;
        Ok(Self { requester_pk, location, prev_block_hash, timestamp_ms, signature })
    }
}

/// Canonical signing bytes of a request (tag + the four signed fields).
pub fn encode_request(
    requester_pk: &PublicKey,
    location: GeoLocation,
    prev_block_hash: &Digest,
    timestamp_ms: u64,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(REQUEST_SIGNING_LEN);
    out.push(REQUEST_TAG);
    out.extend_from_slice(&requester_pk.0);
    out.extend_from_slice(&location.lat_microdeg.to_be_bytes());
    out.extend_from_slice(&location.lon_microdeg.to_be_bytes());
    out.extend_from_slice(&prev_block_hash.0);
    out.extend_from_slice(&timestamp_ms.to_be_bytes());
    out
}

/// Builds and signs a request anchored at chain tip `tip`.
pub fn make_request(
    id: &PeerIdentity,
    location: GeoLocation,
    tip: Digest,
    now_ms: u64,
) -> Result<ProofRequest, MessageError> {
    if !location.is_valid() {
        return Err(GeoError::InvalidCoordinates {
            lat_microdeg: location.lat_microdeg,
            lon_microdeg: location.lon_microdeg,
        }
        .into());
    }
    let signing = encode_request(&id.public_key(), location, &tip, now_ms);
    Ok(ProofRequest {
        requester_pk: id.public_key(),
        location,
        prev_block_hash: tip,
        timestamp_ms: now_ms,
        signature: id.sign(&signing),
    })
}

/// A signed answer wrapping the received request verbatim. A verified
/// response *is* a proof-of-location: it attests that requester and
/// responder were within short-range reach at the stated coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofResponse {
    pub request: ProofRequest,
    pub responder_pk: PublicKey,
    pub location: GeoLocation,
    pub timestamp_ms: u64,
    /// Signature over [`ProofResponse::signing_bytes`] under `responder_pk`.
    pub signature: Signature,
}

impl ProofResponse {
    /// The canonical bytes covered by the response signature. Embeds the
    /// full request wire encoding, signature included.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RESPONSE_SIGNING_LEN);
        out.push(RESPONSE_TAG);
        out.extend_from_slice(&self.request.wire_bytes());
        out.extend_from_slice(&self.responder_pk.0);
        out.extend_from_slice(&self.location.lat_microdeg.to_be_bytes());
        out.extend_from_slice(&self.location.lon_microdeg.to_be_bytes());
        out.extend_from_slice(&self.timestamp_ms.to_be_bytes());
        out
    }

    /// Canonical wire encoding: signing bytes followed by the signature.
    pub fn wire_bytes(&self) -> Vec<u8> {
        let mut out = self.signing_bytes();
        out.extend_from_slice(&self.signature.0);
        out
    }

    /// Checks the response signature under `responder_pk`. Does not check
    /// the embedded request signature; see [`ProofResponse::verify_signatures`].
    pub fn verify_signature(&self) -> bool {
        crypto::verify(&self.signature, &self.signing_bytes(), &self.responder_pk)
    }

    /// Checks both the response signature and the embedded request
    /// signature.
    pub fn verify_signatures(&self) -> bool {
        self.verify_signature() && self.request.verify_signature()
    }

    pub fn proof_id(&self) -> ProofId {
        ProofId(crypto::hash(&self.wire_bytes()))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() != RESPONSE_WIRE_LEN {
            return Err(CodecError::Length { expected: RESPONSE_WIRE_LEN, got: bytes.len() });
        }
        if bytes[0] != RESPONSE_TAG {
            return Err(CodecError::Tag { expected: RESPONSE_TAG, got: bytes[0] });
        }
        let request = ProofRequest::decode(&bytes[1..1 + REQUEST_WIRE_LEN])?;
        let mut r = Reader::new(&bytes[1 + REQUEST_WIRE_LEN..]);
        let responder_pk = PublicKey(r.array::<PUBLIC_KEY_LEN>());
        let lat = r.i32();
        let lon = r.i32();
        let timestamp_ms = r.u64();
        let signature = Signature(r.array::<SIGNATURE_LEN>());
        let location = GeoLocation::new(lat, lon).map_err(|_| CodecError::InvalidCoordinates)?;
        Ok(Self { request, responder_pk, location, timestamp_ms, signature })
    }
}

/// Builds and signs a response embedding `req` verbatim. Fails when the
/// responder is the requester: a peer cannot attest itself.
pub fn make_response(
    req: &ProofRequest,
    id: &PeerIdentity,
    location: GeoLocation,
    now_ms: u64,
) -> Result<ProofResponse, MessageError> {
    if id.public_key() == req.requester_pk {
        return Err(MessageError::SelfResponse);
    }
    if !location.is_valid() {
        return Err(GeoError::InvalidCoordinates {
            lat_microdeg: location.lat_microdeg,
            lon_microdeg: location.lon_microdeg,
        }
        .into());
    }
    let mut res = ProofResponse {
        request: req.clone(),
        responder_pk: id.public_key(),
        location,
        timestamp_ms: now_ms,
        signature: Signature([0; SIGNATURE_LEN]),
    };
    res.signature = id.sign(&res.signing_bytes());
    Ok(res)
}

/// Stable identity of a proof for duplicate detection.
pub fn proof_id(p: &ProofResponse) -> ProofId {
    p.proof_id()
}

/// Cursor over fixed-width big-endian fields.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn array<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        out
    }

    pub(crate) fn i32(&mut self) -> i32 {
        i32::from_be_bytes(self.array::<4>())
    }

    pub(crate) fn u32(&mut self) -> u32 {
        u32::from_be_bytes(self.array::<4>())
    }

    pub(crate) fn u64(&mut self) -> u64 {
        u64::from_be_bytes(self.array::<8>())
    }

    pub(crate) fn slice(&mut self, n: usize) -> &'a [u8] {
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        out
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::generate_identity;
    use proptest::prelude::*;

    fn id(byte: u8) -> PeerIdentity {
        generate_identity([byte; 32])
    }

    fn loc(lat: i32, lon: i32) -> GeoLocation {
        GeoLocation::new(lat, lon).unwrap()
    }

    #[test]
    fn request_encoding_has_fixed_width() {
        let req = make_request(&id(1), loc(44_801_500, 10_327_900), crypto::hash(b""), 1_000).unwrap();
        // tag + (32 + 4 + 4 + 32 + 8) field bytes
        assert_eq!(req.signing_bytes().len(), 1 + 80);
        assert_eq!(req.signing_bytes().len(), REQUEST_SIGNING_LEN);
        assert_eq!(req.wire_bytes().len(), REQUEST_WIRE_LEN);
    }

    #[test]
    fn equal_fields_encode_identically_and_sign_deterministically() {
        let a = make_request(&id(1), loc(1, 2), crypto::hash(b"x"), 42).unwrap();
        let b = make_request(&id(1), loc(1, 2), crypto::hash(b"x"), 42).unwrap();
        assert_eq!(a.wire_bytes(), b.wire_bytes());
    }

    #[test]
    fn zeroed_request_signing_bytes_are_pinned() {
        // Golden vector: all-zero key, location (0,0), zero hash, timestamp 0.
        let bytes = encode_request(&PublicKey([0; 32]), loc(0, 0), &Digest([0; 32]), 0);
        let mut expected = String::from("01");
        expected.push_str(&"00".repeat(80));
        assert_eq!(hex::encode(bytes), expected);
    }

    #[test]
    fn tampered_request_fails_verification() {
        let mut req = make_request(&id(1), loc(5, 5), crypto::hash(b""), 7).unwrap();
        assert!(req.verify_signature());
        req.location = loc(5, 6);
        assert!(!req.verify_signature());
    }

    #[test]
    fn response_embeds_request_verbatim() {
        let req = make_request(&id(1), loc(0, 0), crypto::hash(b""), 10).unwrap();
        let res = make_response(&req, &id(2), loc(0, 100), 11).unwrap();
        assert_eq!(res.request, req);
        assert!(res.verify_signatures());
        assert_eq!(res.wire_bytes().len(), RESPONSE_WIRE_LEN);
    }

    #[test]
    fn self_response_is_rejected() {
        let req = make_request(&id(1), loc(0, 0), crypto::hash(b""), 10).unwrap();
        assert_eq!(make_response(&req, &id(1), loc(0, 0), 11), Err(MessageError::SelfResponse));
    }

    #[test]
    fn response_with_tampered_embedded_request_fails() {
        let req = make_request(&id(1), loc(0, 0), crypto::hash(b""), 10).unwrap();
        let mut res = make_response(&req, &id(2), loc(0, 100), 11).unwrap();
        res.request.timestamp_ms = 99;
        assert!(!res.request.verify_signature());
        assert!(!res.verify_signatures());
    }

    #[test]
    fn proof_ids_are_stable_and_timestamp_sensitive() {
        let req = make_request(&id(1), loc(0, 0), crypto::hash(b""), 10).unwrap();
        let a = make_response(&req, &id(2), loc(0, 100), 11).unwrap();
        let b = make_response(&req, &id(2), loc(0, 100), 11).unwrap();
        let c = make_response(&req, &id(2), loc(0, 100), 12).unwrap();
        assert_eq!(a.proof_id(), b.proof_id());
        assert_ne!(a.proof_id(), c.proof_id());
    }

    #[test]
    fn ten_thousand_random_proofs_have_distinct_ids() {
        let requester = id(1);
        let responder = id(2);
        let mut ids = std::collections::BTreeSet::new();
        for ts in 0u64..10_000 {
            let req = make_request(&requester, loc(0, 0), crypto::hash(b""), ts).unwrap();
            let res = make_response(&req, &responder, loc(0, 100), ts).unwrap();
            assert!(ids.insert(res.proof_id()), "collision at ts {ts}");
        }
    }

    #[test]
    fn request_signature_never_validates_as_response_signature() {
        // Domain tags make the signing payloads structurally distinct even
        // over matching field bytes.
        let requester = id(1);
        let req = make_request(&requester, loc(3, 4), crypto::hash(b"t"), 99).unwrap();
        let mut forged = req.signing_bytes();
        forged[0] = RESPONSE_TAG;
        assert!(!crypto::verify(&req.signature, &forged, &requester.public_key()));
    }

    #[test]
    fn decode_rejects_bad_tag_length_and_coordinates() {
        let req = make_request(&id(1), loc(0, 0), crypto::hash(b""), 1).unwrap();
        let mut bytes = req.wire_bytes();
        bytes[0] = 0x7f;
        assert!(matches!(ProofRequest::decode(&bytes), Err(CodecError::Tag { .. })));
        assert!(matches!(ProofRequest::decode(&bytes[..10]), Err(CodecError::Length { .. })));

        let mut bad_coords = req.clone();
        bad_coords.location = GeoLocation { lat_microdeg: 90_000_001, lon_microdeg: 0 };
        assert!(matches!(
            ProofRequest::decode(&bad_coords.wire_bytes()),
            Err(CodecError::InvalidCoordinates)
        ));
    }

    prop_compose! {
        fn arb_loc()(lat in -90_000_000i32..=90_000_000, lon in -180_000_000i32..180_000_000) -> GeoLocation {
            GeoLocation { lat_microdeg: lat, lon_microdeg: lon }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn request_round_trips(seed in 0u8..255, l in arb_loc(), anchor in any::<[u8; 32]>(), ts in any::<u64>()) {
            let req = make_request(&id(seed), l, Digest(anchor), ts).unwrap();
            let decoded = ProofRequest::decode(&req.wire_bytes()).unwrap();
            prop_assert_eq!(decoded, req);
        }

        #[test]
        fn response_round_trips(l1 in arb_loc(), l2 in arb_loc(), ts in any::<u64>()) {
            let req = make_request(&id(1), l1, crypto::hash(b"anchor"), ts).unwrap();
            let res = make_response(&req, &id(2), l2, ts.wrapping_add(1)).unwrap();
            let decoded = ProofResponse::decode(&res.wire_bytes()).unwrap();
            prop_assert_eq!(decoded, res);
        }
    }
}
