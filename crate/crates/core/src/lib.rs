//! Decentralized proof-of-location over a block chain.
//!
//! Peers identified by public keys exchange signed location claims over a
//! short-range channel. A verified response is a *proof-of-location*: an
//! attestation that two peers were within radio reach of each other at the
//! stated coordinates and time. Proofs are gossiped, validated against the
//! local chain view and the location-based overlay, and persisted in a
//! hash-linked chain whose producer is selected by a proof-of-stake rule
//! over the latest `T` blocks.
//!
//! Module map:
//! - [`crypto`] — identities, signatures, digests.
//! - [`geo`] — coordinates, great-circle distance, range admissibility.
//! - [`messages`] — request/response types and canonical byte encodings.
//! - [`chain`] — block tree, stake table, leader eligibility, fork choice,
//!   header-only pruning.
//! - [`validation`] — the rule engine for requests, responses, gossiped
//!   proofs and blocks.
//! - [`overlay`] — the simulated location-based overlay and the radio
//!   reachability model.
//! - [`vectors`] — golden encoding vectors for cross-implementation checks.

pub mod chain;
pub mod crypto;
pub mod geo;
pub mod messages;
pub mod overlay;
pub mod testkit;
pub mod validation;
pub mod vectors;

pub use chain::{AppendOutcome, Block, BlockHeader, ChainError, ChainParams, ChainStore, StakeTable};
pub use crypto::{generate_identity, hash, sign, verify, Digest, PeerIdentity, PublicKey, SigCache, Signature};
pub use geo::{distance_m, within_range, GeoError, GeoLocation, RangeParams};
pub use messages::{make_request, make_response, proof_id, CodecError, MessageError, ProofId, ProofRequest, ProofResponse};
pub use overlay::{build_view, contacts_of, radio_neighbors, OverlayError, OverlayParams, PeerRecord, ViewParams, World};
pub use validation::{
    verify_block, verify_gossiped_proof, verify_request, verify_response, BlockVerdict, PeerView,
    RejectReason, RequestVerdict, ValidationContext,
};
