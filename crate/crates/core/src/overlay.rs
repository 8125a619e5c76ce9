//! The simulated location-based overlay and the short-range radio model.
//!
//! These are the two independent vantage points the validation rules lean
//! on: contact lists are keyed by the locations peers *declare* to the
//! overlay, radio reachability by where they *actually* are. Honest peers
//! declare truthfully, so the views coincide; for adversaries they diverge,
//! and that divergence is what the collusion checks detect.
//!
//! The overlay itself is modeled as exact k-nearest-neighbor over declared
//! locations — the protocol only ever uses it as an oracle for "known
//! contact" and "declared location". The radio is a perfect disc over true
//! positions; loss and latency live in the simulator's delivery layer.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::chain::ChainStore;
use crate::crypto::{PublicKey, SigCache};
use crate::geo::{distance_m, GeoLocation, RangeParams};
use crate::validation::{PeerView, ValidationContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OverlayError {
    #[error("peer is not part of the world")]
    UnknownPeer,
}

/// One peer as the simulator sees it: what it advertises to the overlay and
/// where it really is. Honest peers keep the two equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeerRecord {
    pub pk: PublicKey,
    pub declared_location: GeoLocation,
    pub true_location: GeoLocation,
}

/// Overlay sizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlayParams {
    /// Neighbor-list size handed to each peer.
    pub k_contacts: usize,
}

impl OverlayParams {
    pub fn new(k_contacts: usize) -> Self {
        assert!(k_contacts >= 1, "k_contacts must be at least 1");
        Self { k_contacts }
    }
}

/// The set of peers currently participating, keyed by public key.
#[derive(Debug, Clone, Default)]
pub struct World {
    peers: BTreeMap<PublicKey, PeerRecord>,
}

impl World {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: PeerRecord) {
        self.peers.insert(record.pk, record);
    }

    pub fn remove(&mut self, pk: &PublicKey) -> Option<PeerRecord> {
        self.peers.remove(pk)
    }

    pub fn get(&self, pk: &PublicKey) -> Option<&PeerRecord> {
        self.peers.get(pk)
    }

    pub fn contains(&self, pk: &PublicKey) -> bool {
        self.peers.contains_key(pk)
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PeerRecord> {
        self.peers.values()
    }
}

/// The `k_contacts` peers nearest to `p`'s declared location, by declared
/// distance, excluding `p` itself. Distance ties break toward the smaller
/// public key.
pub fn contacts_of(world: &World, p: &PublicKey, params: OverlayParams) -> Result<BTreeSet<PublicKey>, OverlayError> {
    let me = world.get(p).ok_or(OverlayError::UnknownPeer)?;
    let mut by_distance: Vec<(f64, PublicKey)> = world
        .iter()
        .filter(|r| r.pk != *p)
        .map(|r| {
            let d = distance_m(me.declared_location, r.declared_location).unwrap_or(f64::INFINITY);
            (d, r.pk)
        })
        .collect();
    by_distance.sort_by(|(da, pa), (db, pb)| da.total_cmp(db).then_with(|| pa.cmp(pb)));
    Ok(by_distance.into_iter().take(params.k_contacts).map(|(_, pk)| pk).collect())
}

/// Peers whose *true* location is within `r` of `p`'s true location,
/// excluding `p`. Declared locations play no part: an adversary declaring
/// a far-away spot still shows up in its physical neighbors' radio sets.
pub fn radio_neighbors(world: &World, p: &PublicKey, r: RangeParams) -> Result<BTreeSet<PublicKey>, OverlayError> {
    let me = world.get(p).ok_or(OverlayError::UnknownPeer)?;
    Ok(world
        .iter()
        .filter(|other| other.pk != *p)
        .filter(|other| {
            distance_m(me.true_location, other.true_location).map(|d| d <= r.max_range_m).unwrap_or(false)
        })
        .map(|other| other.pk)
        .collect())
}

/// Declared locations `p` knows through the overlay: its own contacts plus
/// every peer whose contact list includes `p`. A location-based overlay
/// advertises presence in both directions within a neighborhood.
pub fn known_declared_locations(
    world: &World,
    p: &PublicKey,
    params: OverlayParams,
) -> Result<BTreeMap<PublicKey, GeoLocation>, OverlayError> {
    let mut known: BTreeSet<PublicKey> = contacts_of(world, p, params)?;
    for other in world.iter() {
        if other.pk == *p || known.contains(&other.pk) {
            continue;
        }
        if contacts_of(world, &other.pk, params)?.contains(p) {
            known.insert(other.pk);
        }
    }
    Ok(known
        .into_iter()
        .filter_map(|pk| world.get(&pk).map(|r| (pk, r.declared_location)))
        .collect())
}

/// Inputs for assembling a validation view.
#[derive(Debug, Clone, Copy)]
pub struct ViewParams {
    pub overlay: OverlayParams,
    pub range: RangeParams,
    pub now_ms: u64,
    pub freshness_window_ms: u64,
}

/// Assembles the peer's immutable vantage point: overlay contacts and known
/// declarations from declared locations, radio reachability from true
/// positions, and the local true location. Later world mutations do not
/// affect the returned snapshot.
pub fn build_view(world: &World, p: &PublicKey, params: &ViewParams) -> Result<PeerView, OverlayError> {
    let me = world.get(p).ok_or(OverlayError::UnknownPeer)?;
    Ok(PeerView {
        local_pk: *p,
        local_location: me.true_location,
        overlay_contacts: contacts_of(world, p, params.overlay)?,
        radio_reachable: radio_neighbors(world, p, params.range)?,
        overlay_locations: known_declared_locations(world, p, params.overlay)?,
        range: params.range,
        now_ms: params.now_ms,
        freshness_window_ms: params.freshness_window_ms,
        skip_range_checks: false,
    })
}

/// Convenience wrapper pairing a fresh view with the peer's chain handle.
pub fn build_context<'a>(
    world: &World,
    p: &PublicKey,
    store: &'a ChainStore,
    view: &'a PeerView,
    sig_cache: Option<&'a SigCache>,
) -> ValidationContext<'a> {
    debug_assert!(world.contains(p));
    debug_assert_eq!(view.local_pk, *p);
    ValidationContext { chain: store, view, sig_cache }
}
