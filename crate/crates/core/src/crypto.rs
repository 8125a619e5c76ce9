//! Identities, signatures and hashing.
//!
//! A peer's network identifier is the public half of an Ed25519 key pair;
//! the peer signs every protocol message with the private half. Blocks and
//! proofs are addressed by SHA-256 digests of their canonical encodings.
//! Ed25519 signing is deterministic, which keeps simulations and golden
//! vectors reproducible.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use ed25519_dalek::{Signer as _, Verifier as _};
use sha2::{Digest as _, Sha256};

/// Byte length of a public key.
pub const PUBLIC_KEY_LEN: usize = 32;
/// Byte length of a signature.
pub const SIGNATURE_LEN: usize = 64;
/// Byte length of a digest.
pub const DIGEST_LEN: usize = 32;

/// A peer's network identifier: the 32-byte public half of its key pair.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &hex::encode(self.0)[..12])
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// A detached Ed25519 signature over a canonical message encoding.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", &hex::encode(self.0)[..12])
    }
}

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &hex::encode(self.0)[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// A peer's key pair. The public half doubles as the peer's id on the wire.
#[derive(Clone)]
pub struct PeerIdentity {
    public_key: PublicKey,
    signing_key: ed25519_dalek::SigningKey,
}

impl fmt::Debug for PeerIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Never print the private half.
        write!(f, "PeerIdentity({})", &hex::encode(self.public_key.0)[..12])
    }
}

impl PeerIdentity {
    /// Derives an identity deterministically from a 32-byte seed.
    pub fn from_seed(seed: [u8; 32]) -> Self {
        let signing_key = ed25519_dalek::SigningKey::from_bytes(&seed);
        let public_key = PublicKey(signing_key.verifying_key().to_bytes());
        Self { public_key, signing_key }
    }

    /// Generates an identity from caller-provided randomness. Thin wrapper
    /// over [`PeerIdentity::from_seed`] for non-simulated use.
    pub fn generate<R: rand_core::RngCore + rand_core::CryptoRng>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_seed(seed)
    }

    pub fn public_key(&self) -> PublicKey {
        self.public_key
    }

    /// Signs `payload` with the private key. Deterministic: equal payloads
    /// yield equal signatures.
    pub fn sign(&self, payload: &[u8]) -> Signature {
        Signature(self.signing_key.sign(payload).to_bytes())
    }
}

/// Derives an identity deterministically from a 32-byte seed.
pub fn generate_identity(seed: [u8; 32]) -> PeerIdentity {
    PeerIdentity::from_seed(seed)
}

/// Signs `payload` under `id`'s private key.
pub fn sign(payload: &[u8], id: &PeerIdentity) -> Signature {
    id.sign(payload)
}

/// Returns true iff `sig` was produced over `payload` by the private key
/// matching `pk`. Invalid key encodings verify as false.
pub fn verify(sig: &Signature, payload: &[u8], pk: &PublicKey) -> bool {
    let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    vk.verify(payload, &sig).is_ok()
}

/// SHA-256 of `payload`.
pub fn hash(payload: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(payload);
    Digest(h.finalize().into())
}

/// Memoizes signature-verification verdicts keyed by a content digest.
///
/// Verification is a pure function of (payload, key, signature), so a verdict
/// computed once holds for every revalidation of the same bytes. Peers see
/// the same proofs many times — once per gossip relay and again inside
/// blocks — and the cache collapses those to one curve operation.
///
/// Single-threaded by construction (`RefCell`); share one per simulation or
/// per validation batch, not across threads.
#[derive(Default)]
pub struct SigCache {
    verdicts: RefCell<HashMap<Digest, bool>>,
}

impl SigCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the verdict stored under `key`, computing and memoizing it on
    /// a miss. `key` must commit to payload, key and signature bytes (any
    /// canonical content digest does).
    pub fn check(&self, key: Digest, compute: impl FnOnce() -> bool) -> bool {
        if let Some(&v) = self.verdicts.borrow().get(&key) {
            return v;
        }
        let v = compute();
        self.verdicts.borrow_mut().insert(key, v);
        v
    }

    pub fn len(&self) -> usize {
        self.verdicts.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.borrow().is_empty()
    }
}
