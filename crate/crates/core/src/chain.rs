//! Block tree storage and proof-of-stake consensus.
//!
//! Blocks batch proofs-of-location and are linked by the hash of the
//! previous block. The store keeps the whole tree within the fork horizon,
//! selects the main head with a deterministic fork-choice rule, computes
//! the stake table over the latest `T` blocks, and — when pruning is
//! enabled — demotes bodies older than `2T` per branch to header-only
//! entries (producer id and previous-block reference).
//!
//! The genesis anchor is not a block: it is the digest of the empty byte
//! sequence, and the first real block references it as `prev_hash`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::crypto::{self, Digest, PeerIdentity, PublicKey, SigCache, Signature, DIGEST_LEN, PUBLIC_KEY_LEN, SIGNATURE_LEN};
use crate::messages::{CodecError, ProofId, ProofResponse, Reader, BLOCK_TAG, RESPONSE_WIRE_LEN};
use crate::validation::{self, BlockVerdict, PeerView, RejectReason, ValidationContext};

/// Decode guard against absurd proof counts.
const MAX_PROOFS_PER_BLOCK: u32 = 65_536;

/// A signed batch of proofs-of-location.
///
/// Proofs are kept in canonical order (sorted by proof id) so the block
/// hash does not depend on arrival order at the producer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub proofs: Vec<ProofResponse>,
    pub producer_pk: PublicKey,
    pub prev_hash: Digest,
    /// Signature over [`Block::signing_bytes`] under `producer_pk`.
    pub signature: Signature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("a block must contain at least one proof")]
    Empty,
    #[error("proof ids inside a block must be pairwise distinct")]
    DuplicateProofIds,
}

impl Block {
    /// Builds and signs a block over `proofs`, sorted into canonical order.
    pub fn new(mut proofs: Vec<ProofResponse>, producer: &PeerIdentity, prev_hash: Digest) -> Result<Self, BlockError> {
        if proofs.is_empty() {
            return Err(BlockError::Empty);
        }
        proofs.sort_by_cached_key(|p| p.proof_id());
        if proofs.windows(2).any(|w| w[0].proof_id() == w[1].proof_id()) {
            return Err(BlockError::DuplicateProofIds);
        }
        let mut block = Self {
            proofs,
            producer_pk: producer.public_key(),
            prev_hash,
            signature: Signature([0; SIGNATURE_LEN]),
        };
        block.signature = producer.sign(&block.signing_bytes());
        Ok(block)
    }

    /// The canonical bytes covered by the block signature:
    /// tag, proof count, proof wire encodings, producer id, previous hash.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 4 + self.proofs.len() * RESPONSE_WIRE_LEN + PUBLIC_KEY_LEN + DIGEST_LEN);
        out.push(BLOCK_TAG);
        out.extend_from_slice(&(self.proofs.len() as u32).to_be_bytes());
        for p in &self.proofs {
            out.extend_from_slice(&p.wire_bytes());
        }
        out.extend_from_slice(&self.producer_pk.0);
        out.extend_from_slice(&self.prev_hash.0);
        out
    }

    /// Canonical wire encoding: signing bytes followed by the signature.
    pub fn wire_bytes(&self) -> Vec<u8> {
        let mut out = self.signing_bytes();
        out.extend_from_slice(&self.signature.0);
        out
    }

    /// Digest of the wire encoding; the value the next block's `prev_hash`
    /// refers to.
    pub fn block_hash(&self) -> Digest {
        crypto::hash(&self.wire_bytes())
    }

    pub fn verify_signature(&self) -> bool {
        crypto::verify(&self.signature, &self.signing_bytes(), &self.producer_pk)
    }

    pub fn header(&self) -> BlockHeader {
        BlockHeader {
            block_hash: self.block_hash(),
            producer_pk: self.producer_pk,
            prev_hash: self.prev_hash,
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let min = 1 + 4 + PUBLIC_KEY_LEN + DIGEST_LEN + SIGNATURE_LEN;
        if bytes.len() < min {
            return Err(CodecError::Length { expected: min, got: bytes.len() });
        }
        if bytes[0] != BLOCK_TAG {
            return Err(CodecError::Tag { expected: BLOCK_TAG, got: bytes[0] });
        }
        let mut r = Reader::new(&bytes[1..]);
        let count = r.u32();
        if count == 0 {
            return Err(CodecError::EmptyBlock);
        }
        if count > MAX_PROOFS_PER_BLOCK {
            return Err(CodecError::TooManyProofs(count));
        }
        let expected = min + count as usize * RESPONSE_WIRE_LEN;
        if bytes.len() != expected {
            return Err(CodecError::Length { expected, got: bytes.len() });
        }
        let mut proofs = Vec::with_capacity(count as usize);
        for _ in 0..count {
            proofs.push(ProofResponse::decode(r.slice(RESPONSE_WIRE_LEN))?);
        }
        let producer_pk = PublicKey(r.array::<PUBLIC_KEY_LEN>());
        let prev_hash = Digest(r.array::<DIGEST_LEN>());
        let signature = Signature(r.array::<SIGNATURE_LEN>());
        debug_assert_eq!(r.remaining(), 0);
        Ok(Self { proofs, producer_pk, prev_hash, signature })
    }
}

/// What survives pruning: enough to check linkage and the monopoly guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockHeader {
    pub block_hash: Digest,
    pub producer_pk: PublicKey,
    pub prev_hash: Digest,
}

/// Consensus parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainParams {
    /// The stake window `T`: blocks counted for stake, and the window within
    /// which a producer may mint at most once. The fork/pruning horizon is
    /// `2T`.
    pub stake_window: u64,
    /// When set, bodies older than `2T` per branch are demoted to headers.
    pub prune: bool,
}

impl ChainParams {
    pub fn new(stake_window: u64, prune: bool) -> Self {
        assert!(stake_window >= 1, "stake window must be positive");
        Self { stake_window, prune }
    }

    pub fn horizon(&self) -> u64 {
        2 * self.stake_window
    }
}

/// Proof appearances per peer over the latest `T` blocks of a branch.
/// A peer is counted once per proof it appears in, as requester or
/// responder.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StakeTable {
    counts: BTreeMap<PublicKey, u64>,
}

impl StakeTable {
    pub fn count(&self, pk: &PublicKey) -> u64 {
        self.counts.get(pk).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PublicKey, u64)> {
        self.counts.iter().map(|(pk, c)| (pk, *c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("block {0} is not stored")]
    UnknownBlock(Digest),
    #[error("body of block {0} was pruned but is needed here")]
    MissingBody(Digest),
}

/// Outcome of [`ChainStore::append`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    /// Valid on the current head; the head advanced.
    Accepted,
    /// Valid on a non-head ancestor within the fork horizon; branch kept and
    /// fork choice re-evaluated.
    ForkRetained,
    /// The exact block is already stored; nothing changed.
    AlreadyKnown,
    /// Invalid; the block was not stored.
    Rejected(RejectReason),
}

#[derive(Debug, Clone)]
struct StoredBlock {
    producer_pk: PublicKey,
    prev_hash: Digest,
    height: u64,
    /// `None` after pruning demoted this entry to a header.
    body: Option<Block>,
}

/// The block tree of one peer.
///
/// Single-writer: mutations (`append`, `sync`, `prune`) are serialized by
/// the owner; reads may run against an immutable snapshot.
#[derive(Debug, Clone)]
pub struct ChainStore {
    entries: BTreeMap<Digest, StoredBlock>,
    children: BTreeMap<Digest, BTreeSet<Digest>>,
    head: Digest,
    genesis: Digest,
    params: ChainParams,
}

impl ChainStore {
    pub fn new(params: ChainParams) -> Self {
        let genesis = crypto::hash(b"");
        Self {
            entries: BTreeMap::new(),
            children: BTreeMap::new(),
            head: genesis,
            genesis,
            params,
        }
    }

    pub fn params(&self) -> ChainParams {
        self.params
    }

    /// The genesis anchor digest: `hash("")`. Not a block; the first block's
    /// `prev_hash`.
    pub fn genesis(&self) -> Digest {
        self.genesis
    }

    pub fn head(&self) -> Digest {
        self.head
    }

    pub fn head_height(&self) -> u64 {
        self.height_of(&self.head).unwrap_or(0)
    }

    /// Height of a stored block (genesis anchor is height 0).
    pub fn height_of(&self, hash: &Digest) -> Option<u64> {
        if *hash == self.genesis {
            return Some(0);
        }
        self.entries.get(hash).map(|e| e.height)
    }

    pub fn contains(&self, hash: &Digest) -> bool {
        *hash == self.genesis || self.entries.contains_key(hash)
    }

    /// Full body of a stored block, when not pruned away.
    pub fn body(&self, hash: &Digest) -> Option<&Block> {
        self.entries.get(hash).and_then(|e| e.body.as_ref())
    }

    pub fn producer_of(&self, hash: &Digest) -> Option<PublicKey> {
        self.entries.get(hash).map(|e| e.producer_pk)
    }

    pub fn parent_of(&self, hash: &Digest) -> Option<Digest> {
        self.entries.get(hash).map(|e| e.prev_hash)
    }

    pub fn block_count(&self) -> usize {
        self.entries.len()
    }

    /// Stake over the latest `min(T, height)` blocks of the branch ending at
    /// `tip`. Requires full bodies over that window.
    pub fn compute_stake(&self, tip: Digest) -> Result<StakeTable, ChainError> {
        let mut counts: BTreeMap<PublicKey, u64> = BTreeMap::new();
        let mut cur = tip;
        for _ in 0..self.params.stake_window {
            if cur == self.genesis {
                break;
            }
            let entry = self.entries.get(&cur).ok_or(ChainError::UnknownBlock(cur))?;
            let body = entry.body.as_ref().ok_or(ChainError::MissingBody(cur))?;
            for p in &body.proofs {
                *counts.entry(p.request.requester_pk).or_insert(0) += 1;
                *counts.entry(p.responder_pk).or_insert(0) += 1;
            }
            cur = entry.prev_hash;
        }
        Ok(StakeTable { counts })
    }

    /// Producers of the latest `min(T, height)` blocks ending at `tip`.
    /// Header-only entries suffice.
    pub fn producers_in_window(&self, tip: Digest) -> Result<BTreeSet<PublicKey>, ChainError> {
        let mut out = BTreeSet::new();
        let mut cur = tip;
        for _ in 0..self.params.stake_window {
            if cur == self.genesis {
                break;
            }
            let entry = self.entries.get(&cur).ok_or(ChainError::UnknownBlock(cur))?;
            out.insert(entry.producer_pk);
            cur = entry.prev_hash;
        }
        Ok(out)
    }

    /// The peer entitled to produce the next block on the branch ending at
    /// `tip`: the stake plurality winner among peers that produced none of
    /// the latest `T` blocks. Ties break to the lexicographically smallest
    /// public key. `None` when the stake window is empty (fresh network,
    /// anyone may mint) or every staked peer is blocked by the monopoly
    /// guard.
    pub fn eligible_leader(&self, tip: Digest) -> Result<Option<PublicKey>, ChainError> {
        let stake = self.compute_stake(tip)?;
        if stake.is_empty() {
            return Ok(None);
        }
        let recent = self.producers_in_window(tip)?;
        Ok(stake
            .counts
            .iter()
            .filter(|(pk, _)| !recent.contains(*pk))
            .max_by(|(pk_a, ca), (pk_b, cb)| ca.cmp(cb).then_with(|| pk_b.cmp(pk_a)))
            .map(|(pk, _)| *pk))
    }

    /// Digests a fresh proof request may anchor to: the latest
    /// `min(T, height)` block hashes on the main branch, plus the genesis
    /// anchor while the chain is shorter than `T`.
    pub fn anchor_window(&self) -> BTreeSet<Digest> {
        let mut out = BTreeSet::new();
        let mut cur = self.head;
        for _ in 0..self.params.stake_window {
            out.insert(cur);
            if cur == self.genesis {
                break;
            }
            match self.entries.get(&cur) {
                Some(e) => cur = e.prev_hash,
                None => break,
            }
        }
        out
    }

    /// Proof ids confirmed on the branch ending at `from` (inclusive),
    /// restricted to blocks whose height lies within the `2T` horizon below
    /// the current head. The height bound keeps the scan identical between
    /// pruned and unpruned stores.
    pub fn proof_ids_in_horizon(&self, from: Digest) -> Result<BTreeSet<ProofId>, ChainError> {
        let min_height = self.head_height().saturating_sub(self.params.horizon()) + 1;
        let mut out = BTreeSet::new();
        let mut cur = from;
        while cur != self.genesis {
            let entry = self.entries.get(&cur).ok_or(ChainError::UnknownBlock(cur))?;
            if entry.height < min_height {
                break;
            }
            let body = entry.body.as_ref().ok_or(ChainError::MissingBody(cur))?;
            for p in &body.proofs {
                out.insert(p.proof_id());
            }
            cur = entry.prev_hash;
        }
        Ok(out)
    }

    /// Leaves of the block tree (blocks with no children), sorted by digest.
    /// The genesis anchor is the only leaf of an empty store.
    pub fn leaves(&self) -> Vec<Digest> {
        if self.entries.is_empty() {
            return vec![self.genesis];
        }
        self.entries
            .keys()
            .filter(|h| self.children.get(h).map_or(true, BTreeSet::is_empty))
            .copied()
            .collect()
    }

    /// Deterministic fork choice over the stored block set: the longest leaf
    /// branch wins; equal lengths break toward the greater tip-producer
    /// stake on that branch, then toward the smallest tip digest. A pure
    /// function of the stored set — arrival order never matters.
    pub fn choose_head(&self) -> Digest {
        let mut best: Option<(Digest, u64, Option<u64>)> = None; // (tip, height, lazy stake)
        for leaf in self.leaves() {
            let height = self.height_of(&leaf).unwrap_or(0);
            match &mut best {
                None => best = Some((leaf, height, None)),
                Some((best_tip, best_height, best_stake)) => {
                    if height < *best_height {
                        continue;
                    }
                    if height > *best_height {
                        best = Some((leaf, height, None));
                        continue;
                    }
                    let tip_stake = self.tip_producer_stake(leaf);
                    if best_stake.is_none() {
                        *best_stake = Some(self.tip_producer_stake(*best_tip));
                    }
                    let current_best = best_stake.unwrap_or(0);
                    if tip_stake > current_best || (tip_stake == current_best && leaf < *best_tip) {
                        best = Some((leaf, height, Some(tip_stake)));
                    }
                }
            }
        }
        best.map(|(tip, _, _)| tip).unwrap_or(self.genesis)
    }

    fn tip_producer_stake(&self, tip: Digest) -> u64 {
        let Some(producer) = self.producer_of(&tip) else { return 0 };
        self.compute_stake(tip).map(|t| t.count(&producer)).unwrap_or(0)
    }

    /// Validates `block` against this store and the caller's view, then
    /// stores it and re-evaluates the fork choice. Rejected blocks are not
    /// stored.
    pub fn append(&mut self, block: Block, view: &PeerView, sig_cache: Option<&SigCache>) -> AppendOutcome {
        let hash = block.block_hash();
        if self.entries.contains_key(&hash) {
            return AppendOutcome::AlreadyKnown;
        }
        let verdict = {
            let ctx = ValidationContext { chain: self, view, sig_cache };
            validation::verify_block(&block, &ctx)
        };
        let outcome = match verdict {
            BlockVerdict::Reject(reason) => return AppendOutcome::Rejected(reason),
            BlockVerdict::Accept => AppendOutcome::Accepted,
            BlockVerdict::Fork => AppendOutcome::ForkRetained,
        };
        self.insert(block, hash);
        self.head = self.choose_head();
        if self.params.prune {
            self.prune();
        }
        outcome
    }

    /// Stores a block without validation. For ingesting pre-validated data
    /// and for test harnesses; the parent must already be stored.
    pub fn insert_unchecked(&mut self, block: Block) -> Digest {
        let hash = block.block_hash();
        if self.entries.contains_key(&hash) {
            return hash;
        }
        assert!(self.contains(&block.prev_hash), "insert_unchecked: parent not stored");
        self.insert(block, hash);
        self.head = self.choose_head();
        if self.params.prune {
            self.prune();
        }
        hash
    }

    fn insert(&mut self, block: Block, hash: Digest) {
        let parent_height = self.height_of(&block.prev_hash).expect("validated parent");
        let stored = StoredBlock {
            producer_pk: block.producer_pk,
            prev_hash: block.prev_hash,
            height: parent_height + 1,
            body: Some(block),
        };
        self.children.entry(stored.prev_hash).or_default().insert(hash);
        self.entries.insert(hash, stored);
    }

    /// Demotes bodies deeper than `2T` below every leaf to header-only
    /// entries. Consensus decisions within the horizon are unaffected.
    pub fn prune(&mut self) {
        let horizon = self.params.horizon();
        let mut keep: BTreeSet<Digest> = BTreeSet::new();
        for leaf in self.leaves() {
            let mut cur = leaf;
            for _ in 0..horizon {
                if cur == self.genesis {
                    break;
                }
                keep.insert(cur);
                match self.entries.get(&cur) {
                    Some(e) => cur = e.prev_hash,
                    None => break,
                }
            }
        }
        for (hash, entry) in self.entries.iter_mut() {
            if entry.body.is_some() && !keep.contains(hash) {
                entry.body = None;
            }
        }
    }

    /// Builds the next block for this peer: every pending proof not already
    /// confirmed within the horizon of the head branch, anchored at the
    /// head. `None` when nothing remains to confirm.
    ///
    /// Callers are expected to have validated the pending proofs and to hold
    /// leader eligibility; adversarial harnesses may skip either.
    pub fn assemble_block(
        &self,
        pending: &BTreeMap<ProofId, ProofResponse>,
        producer: &PeerIdentity,
    ) -> Option<Block> {
        let confirmed = self.proof_ids_in_horizon(self.head).unwrap_or_default();
        let fresh: Vec<ProofResponse> = pending
            .iter()
            .filter(|(id, _)| !confirmed.contains(id))
            .map(|(_, p)| p.clone())
            .collect();
        if fresh.is_empty() {
            return None;
        }
        Some(Block::new(fresh, producer, self.head).expect("pending ids are distinct and non-empty"))
    }

    /// Applies a remote branch block by block via [`ChainStore::append`].
    /// Invalid blocks are rejected individually; the rest still apply.
    pub fn sync(&mut self, remote: &[Block], view: &PeerView, sig_cache: Option<&SigCache>) -> SyncSummary {
        let mut summary = SyncSummary::default();
        for block in remote {
            match self.append(block.clone(), view, sig_cache) {
                AppendOutcome::Accepted => summary.accepted += 1,
                AppendOutcome::ForkRetained => summary.forks += 1,
                AppendOutcome::AlreadyKnown => summary.already_known += 1,
                AppendOutcome::Rejected(_) => summary.rejected += 1,
            }
        }
        summary
    }

    /// Main-branch bodies, oldest first, starting from the deepest block
    /// whose body is still stored.
    pub fn main_branch_bodies(&self) -> Vec<&Block> {
        let mut out = Vec::new();
        let mut cur = self.head;
        while cur != self.genesis {
            let Some(entry) = self.entries.get(&cur) else { break };
            let Some(body) = entry.body.as_ref() else { break };
            out.push(body);
            cur = entry.prev_hash;
        }
        out.reverse();
        out
    }

    /// Serializes the main branch as a length-prefixed sequence of canonical
    /// block encodings (the same bytes that were signed), oldest first.
    pub fn dump(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for block in self.main_branch_bodies() {
            let bytes = block.wire_bytes();
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    /// Parses a [`ChainStore::dump`] byte stream back into blocks.
    pub fn load(bytes: &[u8]) -> Result<Vec<Block>, CodecError> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            if bytes.len() - pos < 4 {
                return Err(CodecError::Length { expected: pos + 4, got: bytes.len() });
            }
            let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
            pos += 4;
            if bytes.len() - pos < len {
                return Err(CodecError::Length { expected: pos + len, got: bytes.len() });
            }
            out.push(Block::decode(&bytes[pos..pos + len])?);
            pos += len;
        }
        Ok(out)
    }
}

/// Counts from one [`ChainStore::sync`] pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SyncSummary {
    pub accepted: usize,
    pub forks: usize,
    pub already_known: usize,
    pub rejected: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;

    fn params(t: u64) -> ChainParams {
        ChainParams::new(t, false)
    }

    #[test]
    fn empty_chain_has_empty_stake_table() {
        let store = ChainStore::new(params(5));
        let stake = store.compute_stake(store.head()).unwrap();
        assert!(stake.is_empty());
        assert_eq!(store.head(), store.genesis());
        assert_eq!(store.head_height(), 0);
    }

    #[test]
    fn stake_counts_both_roles_per_proof() {
        // One block with proofs {(A<->B), (A<->C), (B<->C)}: 2 each.
        let ids = testkit::identities(3);
        let (a, b, c) = (&ids[0], &ids[1], &ids[2]);
        let mut store = ChainStore::new(params(5));
        let proofs = vec![
            testkit::proof_between(a, b, store.genesis(), 1),
            testkit::proof_between(a, c, store.genesis(), 2),
            testkit::proof_between(b, c, store.genesis(), 3),
        ];
        let block = Block::new(proofs, a, store.genesis()).unwrap();
        let tip = store.insert_unchecked(block);
        let stake = store.compute_stake(tip).unwrap();
        for id in [a, b, c] {
            assert_eq!(stake.count(&id.public_key()), 2);
        }
    }

    #[test]
    fn stake_window_excludes_blocks_older_than_t() {
        let ids = testkit::identities(4);
        let mut store = ChainStore::new(params(2));
        // Block 1 proofs involve peer 3; later blocks do not.
        let mut tip = store.genesis();
        for (minter, other) in [(0usize, 3usize), (1, 2), (2, 0)] {
            let proof = testkit::proof_between(&ids[minter], &ids[other], tip, minter as u64);
            let block = Block::new(vec![proof], &ids[minter], tip).unwrap();
            tip = store.insert_unchecked(block);
        }
        let stake = store.compute_stake(tip).unwrap();
        // Window covers only the latest 2 blocks; peer 3 appeared only in block 1.
        assert_eq!(stake.count(&ids[3].public_key()), 0);
        assert_eq!(stake.count(&ids[2].public_key()), 2);
    }

    #[test]
    fn leader_is_strict_argmax_when_nobody_minted_recently() {
        let ids = testkit::identities(3);
        let (a, b) = (&ids[0], &ids[1]);
        let mut store = ChainStore::new(params(5));
        // Minter is a third party so neither A nor B is monopoly-blocked.
        let mut proofs = Vec::new();
        for ts in 0..5 {
            proofs.push(testkit::proof_between(a, b, store.genesis(), ts));
        }
        proofs.push(testkit::proof_between(a, &ids[2], store.genesis(), 99));
        let block = Block::new(proofs, &ids[2], store.genesis()).unwrap();
        let tip = store.insert_unchecked(block);
        let stake = store.compute_stake(tip).unwrap();
        assert!(stake.count(&a.public_key()) > stake.count(&b.public_key()));
        assert_eq!(store.eligible_leader(tip).unwrap(), Some(a.public_key()));
    }

    #[test]
    fn leader_skips_recent_producer() {
        let ids = testkit::identities(3);
        let (a, b, c) = (&ids[0], &ids[1], &ids[2]);
        let mut store = ChainStore::new(params(5));
        // A mints the block, so A is blocked even with the larger stake.
        let proofs = vec![
            testkit::proof_between(a, b, store.genesis(), 1),
            testkit::proof_between(a, c, store.genesis(), 2),
        ];
        let block = Block::new(proofs, a, store.genesis()).unwrap();
        let tip = store.insert_unchecked(block);
        let stake = store.compute_stake(tip).unwrap();
        assert_eq!(stake.count(&a.public_key()), 2);
        let leader = store.eligible_leader(tip).unwrap().unwrap();
        assert_ne!(leader, a.public_key());
        // B and C tie at 1; the smaller public key wins.
        let expected = b.public_key().min(c.public_key());
        assert_eq!(leader, expected);
    }

    #[test]
    fn leader_tie_breaks_to_smallest_public_key() {
        let ids = testkit::identities(3);
        let (a, b) = (&ids[0], &ids[1]);
        let mut store = ChainStore::new(params(5));
        let proofs = vec![testkit::proof_between(a, b, store.genesis(), 1)];
        let block = Block::new(proofs, &ids[2], store.genesis()).unwrap();
        let tip = store.insert_unchecked(block);
        // A and B both have stake 1.
        let expected = a.public_key().min(b.public_key());
        assert_eq!(store.eligible_leader(tip).unwrap(), Some(expected));
    }

    #[test]
    fn anchor_window_covers_latest_t_and_genesis_when_short() {
        let ids = testkit::identities(2);
        let mut store = ChainStore::new(params(3));
        assert!(store.anchor_window().contains(&store.genesis()));

        let mut tips = vec![store.genesis()];
        for ts in 0..4u64 {
            let proof = testkit::proof_between(&ids[0], &ids[1], *tips.last().unwrap(), ts);
            let block = Block::new(vec![proof], &ids[ts as usize % 2], *tips.last().unwrap()).unwrap();
            tips.push(store.insert_unchecked(block));
        }
        // Height 4, T=3: anchors are blocks 2, 3, 4; genesis and block 1 are out.
        let window = store.anchor_window();
        assert_eq!(window.len(), 3);
        assert!(window.contains(&tips[4]) && window.contains(&tips[3]) && window.contains(&tips[2]));
        assert!(!window.contains(&tips[1]) && !window.contains(&store.genesis()));
    }

    #[test]
    fn prune_demotes_bodies_beyond_two_t() {
        let ids = testkit::identities(2);
        let mut store = ChainStore::new(ChainParams::new(1, true));
        let mut tips = vec![store.genesis()];
        for ts in 0..5u64 {
            let proof = testkit::proof_between(&ids[0], &ids[1], *tips.last().unwrap(), ts);
            let block = Block::new(vec![proof], &ids[ts as usize % 2], *tips.last().unwrap()).unwrap();
            tips.push(store.insert_unchecked(block));
        }
        // T=1, horizon 2: blocks 1-3 are headers, 4-5 keep bodies.
        for h in 1..=3 {
            assert!(store.body(&tips[h]).is_none(), "block {h} should be pruned");
            assert!(store.producer_of(&tips[h]).is_some(), "header {h} must remain");
        }
        for h in 4..=5 {
            assert!(store.body(&tips[h]).is_some(), "block {h} should keep its body");
        }
        // Linkage from head to genesis survives via headers.
        let mut cur = store.head();
        let mut steps = 0;
        while cur != store.genesis() {
            cur = store.parent_of(&cur).unwrap();
            steps += 1;
        }
        assert_eq!(steps, 5);
    }

    #[test]
    fn prune_is_a_no_op_on_short_chains() {
        let ids = testkit::identities(2);
        let mut store = ChainStore::new(ChainParams::new(3, true));
        let mut tip = store.genesis();
        for ts in 0..4u64 {
            let proof = testkit::proof_between(&ids[0], &ids[1], tip, ts);
            let block = Block::new(vec![proof], &ids[ts as usize % 2], tip).unwrap();
            tip = store.insert_unchecked(block);
        }
        assert!(store.main_branch_bodies().len() == 4);
    }

    #[test]
    fn dump_load_round_trips_the_main_branch() {
        let ids = testkit::identities(2);
        let mut store = ChainStore::new(params(5));
        let mut tip = store.genesis();
        for ts in 0..3u64 {
            let proof = testkit::proof_between(&ids[0], &ids[1], tip, ts);
            let block = Block::new(vec![proof], &ids[ts as usize % 2], tip).unwrap();
            tip = store.insert_unchecked(block);
        }
        let blocks = ChainStore::load(&store.dump()).unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks.last().unwrap().block_hash(), store.head());
        for (loaded, original) in blocks.iter().zip(store.main_branch_bodies()) {
            assert_eq!(loaded, original);
        }
    }

    #[test]
    fn block_decode_round_trips_and_rejects_malformed() {
        let ids = testkit::identities(2);
        let genesis = crypto::hash(b"");
        let proof = testkit::proof_between(&ids[0], &ids[1], genesis, 1);
        let block = Block::new(vec![proof], &ids[0], genesis).unwrap();
        let bytes = block.wire_bytes();
        assert_eq!(Block::decode(&bytes).unwrap(), block);
        assert!(block.verify_signature());

        let mut bad_tag = bytes.clone();
        bad_tag[0] = 0x09;
        assert!(matches!(Block::decode(&bad_tag), Err(CodecError::Tag { .. })));
        assert!(matches!(Block::decode(&bytes[..20]), Err(CodecError::Length { .. })));
    }

    #[test]
    fn blocks_hash_independently_of_proof_arrival_order() {
        let ids = testkit::identities(3);
        let genesis = crypto::hash(b"");
        let p1 = testkit::proof_between(&ids[0], &ids[1], genesis, 1);
        let p2 = testkit::proof_between(&ids[1], &ids[2], genesis, 2);
        let fwd = Block::new(vec![p1.clone(), p2.clone()], &ids[0], genesis).unwrap();
        let rev = Block::new(vec![p2, p1], &ids[0], genesis).unwrap();
        assert_eq!(fwd.block_hash(), rev.block_hash());
    }

    #[test]
    fn empty_and_duplicate_blocks_are_unconstructible() {
        let ids = testkit::identities(2);
        let genesis = crypto::hash(b"");
        assert_eq!(Block::new(vec![], &ids[0], genesis), Err(BlockError::Empty));
        let p = testkit::proof_between(&ids[0], &ids[1], genesis, 1);
        assert_eq!(
            Block::new(vec![p.clone(), p], &ids[0], genesis),
            Err(BlockError::DuplicateProofIds)
        );
    }
}
