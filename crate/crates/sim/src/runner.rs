//! The deterministic discrete-event simulator.
//!
//! A single-threaded event loop with a total order on events (time, then a
//! global sequence number). Every random draw — placement, latency, loss,
//! rotation times, rotated identities — flows from one ChaCha20 generator
//! seeded with `ScenarioConfig::seed`, so a config reproduces its report
//! bit for bit.
//!
//! Peers exchange requests and responses over a disc-shaped radio channel
//! (true positions), gossip proofs and blocks to their overlay contacts
//! (declared positions), mint blocks when stake makes them the leader, and
//! repair divergent chains through point-to-point sync exchanges triggered
//! by anchor mismatches.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::rc::Rc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};

use polc_core::chain::{AppendOutcome, Block, ChainParams, ChainStore};
use polc_core::crypto::{generate_identity, Digest, PeerIdentity, PublicKey, SigCache, Signature};
use polc_core::geo::{GeoLocation, RangeParams, EARTH_RADIUS_M};
use polc_core::messages::{make_request, make_response, ProofId, ProofRequest, ProofResponse};
use polc_core::overlay::{build_view, contacts_of, radio_neighbors, OverlayParams, PeerRecord, ViewParams, World};
use polc_core::validation::{
    verify_gossiped_proof, verify_request, verify_response, PeerView, RejectReason, RequestVerdict,
    ValidationContext,
};

use crate::config::{AttackKind, CollusionCase, ConfigError, ScenarioConfig};
use crate::report::{EventRecord, SimReport};
use crate::truth::TruthRegistry;

/// Meters spanned by one micro-degree of arc on the sphere (equator).
pub const M_PER_MICRODEG: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0e6;

/// Runs one scenario to completion and reports the outcome.
pub fn run(config: ScenarioConfig) -> Result<SimReport, ConfigError> {
    config.validate()?;
    let mut sim = Simulation::new(config);
    sim.bootstrap();
    while let Some(Reverse(scheduled)) = sim.queue.pop() {
        if scheduled.time > sim.cfg.duration_ms {
            continue; // beyond the horizon; keep draining
        }
        sim.now = scheduled.time;
        sim.dispatch(scheduled.event);
    }
    sim.check_post_hoc_invariants();
    Ok(sim.into_report())
}

#[derive(Debug, Clone)]
enum Message {
    Request(Rc<ProofRequest>),
    Response(Rc<ProofResponse>),
    GossipProof(Rc<ProofResponse>),
    GossipBlock(Rc<Block>),
    SyncRequest,
    SyncBranch(Rc<Vec<Block>>),
}

#[derive(Debug, Clone)]
enum Event {
    RequestTick { peer: usize },
    AdversaryTick { peer: usize },
    Rotate { peer: usize },
    Deliver { to: usize, from: PublicKey, msg: Message },
}

#[derive(Debug)]
struct Scheduled {
    time: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

/// Messages a handler wants sent, resolved to targets at emission time.
enum Outgoing {
    /// Short-range broadcast: reaches current radio neighbors.
    RadioBroadcast(Message),
    /// Short-range reply: reaches the peer only while it is in radio range.
    RadioTo(PublicKey, Message),
    /// Overlay gossip: reaches current overlay contacts.
    Gossip(Message),
    /// Overlay gossip emitted on behalf of a co-conspirator.
    GossipAs(usize, Message),
    /// Point-to-point over the peer-to-peer network (sync traffic).
    Direct(PublicKey, Message),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Honest,
    Adversary(AttackKind),
}

/// Colluder plan fixed at world construction.
#[derive(Debug, Clone, Copy)]
struct CollusionPlan {
    partner: usize,
    case: CollusionCase,
    claim_requester: GeoLocation,
    claim_responder: GeoLocation,
}

#[derive(Default)]
struct AdversaryState {
    partner_identity: Option<PeerIdentity>,
    collusion: Option<CollusionPlan>,
    /// Observer sightings: pk -> (first time+spot, last time+spot).
    sightings: BTreeMap<PublicKey, ((u64, GeoLocation), (u64, GeoLocation))>,
}

struct PeerState {
    identity: PeerIdentity,
    role: Role,
    store: ChainStore,
    pending: BTreeMap<ProofId, ProofResponse>,
    pending_ids: BTreeSet<ProofId>,
    seen_proofs: BTreeSet<ProofId>,
    seen_blocks: BTreeSet<Digest>,
    /// Request digest -> (peers it was sent to, creation time).
    outstanding: BTreeMap<Digest, (BTreeSet<PublicKey>, u64)>,
    /// Heads this peer already minted on.
    minted_on: BTreeSet<Digest>,
    /// Sync exchanges already started, keyed by (peer, own head).
    synced: BTreeSet<(PublicKey, Digest)>,
    view_cache: Option<(u64, PeerView)>,
    adv: AdversaryState,
}

struct Simulation {
    cfg: ScenarioConfig,
    rng: ChaCha20Rng,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    now: u64,
    quiesce_deadline: u64,
    world: World,
    world_version: u64,
    peers: Vec<PeerState>,
    /// Current pk -> peer index (tracks rotation).
    index_of: BTreeMap<PublicKey, usize>,
    /// Every pk that ever existed -> peer index; never pruned.
    pk_directory: BTreeMap<PublicKey, usize>,
    /// True planar positions in meters, static per peer.
    positions: Vec<(f64, f64)>,
    sig_cache: SigCache,
    truth: TruthRegistry,
    rejections: BTreeMap<RejectReason, u64>,
    forks: u64,
    rotations: u64,
    events: Option<Vec<EventRecord>>,
}

fn spot(x_m: f64, y_m: f64) -> GeoLocation {
    GeoLocation::new((y_m / M_PER_MICRODEG).round() as i32, (x_m / M_PER_MICRODEG).round() as i32)
        .expect("scenario worlds stay within coordinate range")
}

fn offset_east(loc: GeoLocation, east_m: f64) -> GeoLocation {
    GeoLocation::new(loc.lat_microdeg, loc.lon_microdeg + (east_m / M_PER_MICRODEG).round() as i32)
        .expect("offset stays within coordinate range")
}

impl Simulation {
    fn new(cfg: ScenarioConfig) -> Self {
        let n = cfg.n_peers as usize;
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

        // Identities and placements draw from the run generator in index
        // order.
        let mut identities = Vec::with_capacity(n);
        for _ in 0..n {
            let mut seed = [0u8; 32];
            rng.fill_bytes(&mut seed);
            identities.push(generate_identity(seed));
        }
        let mut positions: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let x = rng.gen_range(0.0..cfg.world_extent_m);
                let y = rng.gen_range(0.0..cfg.world_extent_m);
                (x, y)
            })
            .collect();

        let roles: Vec<Role> = {
            let mut roles = vec![Role::Honest; n];
            for spec in &cfg.adversaries {
                roles[spec.peer as usize] = Role::Adversary(spec.kind);
            }
            roles
        };

        // Colluding pairs stand together in a corner of the world: far from
        // the spots they will lie about, and adjacent to each other so case
        // d's genuine proof is physically real.
        for (i, role) in roles.iter().enumerate() {
            if let Role::Adversary(AttackKind::Collusion { partner, .. }) = role {
                let partner = *partner as usize;
                if i < partner {
                    let corner = 0.04 * cfg.world_extent_m;
                    positions[i] = (corner, corner);
                    positions[partner] = (corner + 20.0, corner);
                }
            }
        }

        // Fake spots are aimed at honest bystanders well away from the
        // colluding pair. Among sufficiently distant honest peers, prefer
        // the ones with the most packed neighborhoods: a claim planted in a
        // crowd is refutable by everyone around it. Case b additionally
        // needs a declaration spot far from the claim spot.
        let pick_spots = |positions: &Vec<(f64, f64)>, a: usize, b: usize| -> (usize, usize) {
            let honest: Vec<usize> = roles
                .iter()
                .enumerate()
                .filter(|(_, r)| matches!(r, Role::Honest))
                .map(|(i, _)| i)
                .collect();
            let dist = |p: usize, q: (f64, f64)| {
                ((positions[p].0 - q.0).powi(2) + (positions[p].1 - q.1).powi(2)).sqrt()
            };
            let crowd = |p: usize| {
                honest.iter().filter(|&&q| q != p && dist(q, positions[p]) <= 75.0).count()
            };
            let mut distant: Vec<usize> = honest
                .iter()
                .copied()
                .filter(|&p| dist(p, positions[a]) > 120.0 && dist(p, positions[b]) > 120.0)
                .collect();
            if distant.is_empty() {
                distant = honest.clone();
            }
            distant.sort_by(|&p, &q| crowd(q).cmp(&crowd(p)).then_with(|| p.cmp(&q)));
            let observer = distant[0];
            let decl_b = distant
                .iter()
                .copied()
                .filter(|&p| dist(p, positions[observer]) > 150.0)
                .max_by(|&p, &q| crowd(p).cmp(&crowd(q)).then_with(|| q.cmp(&p)))
                .or_else(|| {
                    honest
                        .iter()
                        .copied()
                        .filter(|&p| p != observer)
                        .max_by(|&p, &q| {
                            dist(p, positions[observer])
                                .total_cmp(&dist(q, positions[observer]))
                                .then_with(|| q.cmp(&p))
                        })
                })
                .unwrap_or(observer);
            (observer, decl_b)
        };

        let mut declared: Vec<GeoLocation> = positions.iter().map(|&(x, y)| spot(x, y)).collect();
        let mut plans: BTreeMap<usize, CollusionPlan> = BTreeMap::new();
        for (i, role) in roles.iter().enumerate() {
            let Role::Adversary(AttackKind::Collusion { case, partner }) = role else { continue };
            let partner = *partner as usize;
            if i > partner {
                continue; // the lower index leads
            }
            let ranked = ranked_observers(&positions, i, partner);
            let observer = ranked.first().copied().unwrap_or(0);
            let second = ranked.get(1).copied().unwrap_or(observer);
            let observer_spot = spot(positions[observer].0, positions[observer].1);
            let second_spot = spot(positions[second].0, positions[second].1);
            let (claim_req, claim_res) = match case {
                // Fabricated adjacency right next to the distant observer.
                CollusionCase::A | CollusionCase::B | CollusionCase::C => {
                    (offset_east(observer_spot, 8.0), offset_east(observer_spot, 16.0))
                }
                // The proof is genuine: claims are the true positions.
                CollusionCase::D => (
                    spot(positions[i].0, positions[i].1),
                    spot(positions[partner].0, positions[partner].1),
                ),
            };
            match case {
                CollusionCase::A => {
                    declared[i] = claim_req;
                    declared[partner] = claim_res;
                }
                CollusionCase::B => {
                    declared[i] = offset_east(second_spot, 8.0);
                    declared[partner] = offset_east(second_spot, 16.0);
                }
                CollusionCase::C => {} // declared stays truthful
                CollusionCase::D => {
                    // The responder hides behind a fake declaration near the
                    // observer; the requester declares truthfully so the
                    // genuine proof can spread through its neighborhood.
                    declared[partner] = offset_east(observer_spot, 16.0);
                }
            }
            plans.insert(
                i,
                CollusionPlan { partner, case: *case, claim_requester: claim_req, claim_responder: claim_res },
            );
        }

        let mut world = World::new();
        let mut index_of = BTreeMap::new();
        let mut pk_directory = BTreeMap::new();
        for (i, id) in identities.iter().enumerate() {
            let pk = id.public_key();
            world.insert(PeerRecord {
                pk,
                declared_location: declared[i],
                true_location: spot(positions[i].0, positions[i].1),
            });
            index_of.insert(pk, i);
            pk_directory.insert(pk, i);
        }

        let peers: Vec<PeerState> = identities
            .into_iter()
            .enumerate()
            .map(|(i, identity)| {
                let mut adv = AdversaryState::default();
                if let Some(plan) = plans.get(&i) {
                    adv.collusion = Some(*plan);
                }
                PeerState {
                    identity,
                    role: roles[i],
                    store: ChainStore::new(ChainParams::new(cfg.stake_window, cfg.prune)),
                    pending: BTreeMap::new(),
                    pending_ids: BTreeSet::new(),
                    seen_proofs: BTreeSet::new(),
                    seen_blocks: BTreeSet::new(),
                    outstanding: BTreeMap::new(),
                    minted_on: BTreeSet::new(),
                    synced: BTreeSet::new(),
                    view_cache: None,
                    adv,
                }
            })
            .collect();

        // Colluding leads sign on behalf of their partners: key material is
        // shared out of band.
        let mut peers = peers;
        let plan_entries: Vec<(usize, usize)> = plans.iter().map(|(i, p)| (*i, p.partner)).collect();
        for (lead, partner) in plan_entries {
            let partner_identity = peers[partner].identity.clone();
            peers[lead].adv.partner_identity = Some(partner_identity);
        }

        let quiesce_tail = (10 * cfg.latency_ms.max_ms).max(2_500);
        let quiesce_deadline = cfg.duration_ms.saturating_sub(quiesce_tail);
        let record = cfg.record_events;

        Self {
            cfg,
            rng,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            quiesce_deadline,
            world,
            world_version: 0,
            peers,
            index_of,
            pk_directory,
            positions,
            sig_cache: SigCache::new(),
            truth: TruthRegistry::new(),
            rejections: BTreeMap::new(),
            forks: 0,
            rotations: 0,
            events: record.then(Vec::new),
        }
    }

    fn bootstrap(&mut self) {
        let n = self.peers.len();
        let period = self.cfg.request_period_ms;
        for i in 0..n {
            let phase = 100 + (i as u64 * period) / n.max(1) as u64;
            match self.peers[i].role {
                Role::Honest => {
                    self.schedule(phase, Event::RequestTick { peer: i });
                    self.schedule_rotation(i);
                }
                Role::Adversary(AttackKind::IdentityObserver) => {}
                Role::Adversary(AttackKind::Collusion { partner, .. }) => {
                    // Only the lead injects; give the first block a chance
                    // to appear before the first fabrication.
                    if i < partner as usize {
                        self.schedule(phase + period, Event::AdversaryTick { peer: i });
                    }
                }
                Role::Adversary(_) => {
                    self.schedule(phase + period / 2, Event::AdversaryTick { peer: i });
                }
            }
        }
    }

    fn schedule(&mut self, time: u64, event: Event) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(Scheduled { time, seq, event }));
    }

    fn schedule_rotation(&mut self, peer: usize) {
        let rate_per_hour = self.cfg.pseudonym_rotation_rate_per_hour;
        if rate_per_hour <= 0.0 {
            return;
        }
        let rate_per_ms = rate_per_hour / 3_600_000.0;
        let exp = Exp::new(rate_per_ms).expect("positive rotation rate");
        let dt = exp.sample(&mut self.rng).ceil().max(1.0) as u64;
        let at = self.now.saturating_add(dt);
        if at <= self.cfg.duration_ms {
            self.schedule(at, Event::Rotate { peer });
        }
    }

    fn dispatch(&mut self, event: Event) {
        match event {
            Event::RequestTick { peer } => self.honest_tick(peer),
            Event::AdversaryTick { peer } => self.adversary_tick(peer),
            Event::Rotate { peer } => self.rotate_identity(peer),
            Event::Deliver { to, from, msg } => self.on_deliver(to, from, msg),
        }
    }

    // ------------------------------------------------------------------
    // Views and context plumbing
    // ------------------------------------------------------------------

    /// Snapshot of the peer's vantage point, rebuilt when the world changed.
    fn view_for(&mut self, me: usize) -> PeerView {
        let pk = self.peers[me].identity.public_key();
        let stale = self.peers[me]
            .view_cache
            .as_ref()
            .map(|(version, _)| *version != self.world_version)
            .unwrap_or(true);
        if stale {
            let params = ViewParams {
                overlay: OverlayParams::new(self.cfg.k_contacts),
                range: RangeParams::new(self.cfg.max_range_m).expect("validated config"),
                now_ms: self.now,
                freshness_window_ms: self.cfg.freshness_window_ms,
            };
            let mut view = build_view(&self.world, &pk, &params).expect("peer is in the world");
            view.skip_range_checks = self.cfg.skip_range_checks;
            self.peers[me].view_cache = Some((self.world_version, view));
        }
        let (_, view) = self.peers[me].view_cache.as_ref().expect("just built");
        let mut view = view.clone();
        view.now_ms = self.now;
        view
    }

    fn note_reject(&mut self, me: usize, reason: RejectReason, what: &str) {
        if matches!(self.peers[me].role, Role::Honest) {
            *self.rejections.entry(reason).or_insert(0) += 1;
        }
        self.log(me, &format!("{what}_rejected"), reason.as_str());
    }

    fn log(&mut self, peer: usize, action: &str, detail: &str) {
        if let Some(events) = self.events.as_mut() {
            events.push(EventRecord {
                time_ms: self.now,
                peer: peer as u32,
                action: action.to_string(),
                detail: detail.to_string(),
            });
        }
    }

    fn true_location_of(&self, pk: &PublicKey) -> Option<GeoLocation> {
        self.pk_directory.get(pk).map(|&i| {
            let (x, y) = self.positions[i];
            spot(x, y)
        })
    }

    fn register_proof_truth(&mut self, res: &ProofResponse, fabricated: bool) {
        let requester_true = self.true_location_of(&res.request.requester_pk);
        let responder_true = self.true_location_of(&res.responder_pk);
        self.truth.register_proof(
            res.proof_id(),
            fabricated,
            self.cfg.max_range_m,
            requester_true,
            responder_true,
            res.request.location,
            res.location,
        );
    }

    // ------------------------------------------------------------------
    // Delivery
    // ------------------------------------------------------------------

    /// Schedules one independent copy per recipient with uniform latency,
    /// dropping each copy independently with the configured loss
    /// probability.
    fn deliver(&mut self, from: PublicKey, targets: &BTreeSet<PublicKey>, msg: &Message) {
        let min = self.cfg.latency_ms.min_ms;
        let max = self.cfg.latency_ms.max_ms;
        let loss = self.cfg.message_loss_prob;
        for pk in targets {
            let Some(&to) = self.index_of.get(pk) else { continue };
            let latency = if min == max { min } else { self.rng.gen_range(min..=max) };
            if loss > 0.0 && self.rng.gen_bool(loss) {
                continue;
            }
            let time = self.now + latency;
            self.schedule(time, Event::Deliver { to, from, msg: msg.clone() });
        }
    }

    fn emit(&mut self, from_idx: usize, actions: Vec<Outgoing>) {
        let range = RangeParams::new(self.cfg.max_range_m).expect("validated config");
        let overlay = OverlayParams::new(self.cfg.k_contacts);
        for action in actions {
            match action {
                Outgoing::RadioBroadcast(msg) => {
                    let from = self.peers[from_idx].identity.public_key();
                    let targets = radio_neighbors(&self.world, &from, range).unwrap_or_default();
                    self.deliver(from, &targets, &msg);
                }
                Outgoing::RadioTo(to, msg) => {
                    let from = self.peers[from_idx].identity.public_key();
                    let mut targets = radio_neighbors(&self.world, &from, range).unwrap_or_default();
                    targets.retain(|pk| *pk == to);
                    self.deliver(from, &targets, &msg);
                }
                Outgoing::Gossip(msg) => {
                    let from = self.peers[from_idx].identity.public_key();
                    let targets = contacts_of(&self.world, &from, overlay).unwrap_or_default();
                    self.deliver(from, &targets, &msg);
                }
                Outgoing::GossipAs(idx, msg) => {
                    let from = self.peers[idx].identity.public_key();
                    let targets = contacts_of(&self.world, &from, overlay).unwrap_or_default();
                    self.deliver(from, &targets, &msg);
                }
                Outgoing::Direct(to, msg) => {
                    let from = self.peers[from_idx].identity.public_key();
                    let targets: BTreeSet<PublicKey> = [to].into();
                    self.deliver(from, &targets, &msg);
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Honest behavior
    // ------------------------------------------------------------------

    fn honest_tick(&mut self, me: usize) {
        let next = self.now + self.cfg.request_period_ms;
        if next <= self.cfg.duration_ms {
            self.schedule(next, Event::RequestTick { peer: me });
        }
        let mut out = Vec::new();
        let view = self.view_for(me);
        if self.now <= self.quiesce_deadline {
            let cutoff = self.now.saturating_sub(4 * self.cfg.request_period_ms);
            self.peers[me].outstanding.retain(|_, (_, created)| *created >= cutoff);

            let identity = self.peers[me].identity.clone();
            let head = self.peers[me].store.head();
            if let Ok(req) = make_request(&identity, view.local_location, head, self.now) {
                // Broadcast physically reaches every radio neighbor, but only
                // mutual contacts can produce verifiable responses.
                let sent_to: BTreeSet<PublicKey> =
                    view.radio_reachable.intersection(&view.overlay_contacts).cloned().collect();
                if !sent_to.is_empty() {
                    self.peers[me].outstanding.insert(req.digest(), (sent_to, self.now));
                    self.log(me, "request_sent", "");
                    out.push(Outgoing::RadioBroadcast(Message::Request(Rc::new(req))));
                }
            }
        }
        self.mint_check(me, &view, &mut out);
        self.emit(me, out);
    }

    fn on_deliver(&mut self, to: usize, from: PublicKey, msg: Message) {
        let out = match self.peers[to].role {
            Role::Honest => self.honest_handle(to, from, msg),
            Role::Adversary(kind) => self.adversary_handle(to, kind, from, msg),
        };
        self.emit(to, out);
    }

    fn honest_handle(&mut self, me: usize, from: PublicKey, msg: Message) -> Vec<Outgoing> {
        let mut out = Vec::new();
        match msg {
            Message::Request(req) => {
                let view = self.view_for(me);
                let verdict = {
                    let ctx = ValidationContext {
                        chain: &self.peers[me].store,
                        view: &view,
                        sig_cache: Some(&self.sig_cache),
                    };
                    verify_request(&req, &ctx)
                };
                match verdict {
                    RequestVerdict::Accept => {
                        let identity = self.peers[me].identity.clone();
                        if let Ok(res) = make_response(&req, &identity, view.local_location, self.now) {
                            self.register_proof_truth(&res, false);
                            self.log(me, "response_sent", "");
                            out.push(Outgoing::RadioTo(req.requester_pk, Message::Response(Rc::new(res))));
                        }
                    }
                    RequestVerdict::Reject { reason, needs_sync } => {
                        self.note_reject(me, reason, "request");
                        if needs_sync {
                            self.sync_exchange(me, from, &mut out);
                        }
                    }
                }
            }
            Message::Response(res) => {
                let view = self.view_for(me);
                let key = res.request.digest();
                let sent_to = self.peers[me].outstanding.get(&key).map(|(s, _)| s.clone()).unwrap_or_default();
                let verdict = {
                    let ctx = ValidationContext {
                        chain: &self.peers[me].store,
                        view: &view,
                        sig_cache: Some(&self.sig_cache),
                    };
                    verify_response(&res, &ctx, &sent_to)
                };
                match verdict {
                    Ok(()) => {
                        let id = res.proof_id();
                        if self.peers[me].seen_proofs.insert(id) {
                            self.peers[me].pending.insert(id, (*res).clone());
                            self.peers[me].pending_ids.insert(id);
                            self.log(me, "proof_pending", "");
                            out.push(Outgoing::Gossip(Message::GossipProof(res)));
                        }
                    }
                    Err(reason) => self.note_reject(me, reason, "response"),
                }
            }
            Message::GossipProof(proof) => {
                let id = proof.proof_id();
                if !self.peers[me].seen_proofs.insert(id) {
                    return out; // flood duplicate, drop silently
                }
                let view = self.view_for(me);
                let verdict = {
                    let ctx = ValidationContext {
                        chain: &self.peers[me].store,
                        view: &view,
                        sig_cache: Some(&self.sig_cache),
                    };
                    verify_gossiped_proof(&proof, &ctx, &self.peers[me].pending_ids)
                };
                match verdict {
                    Ok(()) => {
                        self.peers[me].pending.insert(id, (*proof).clone());
                        self.peers[me].pending_ids.insert(id);
                        self.log(me, "proof_pending", "");
                        out.push(Outgoing::Gossip(Message::GossipProof(proof)));
                    }
                    // Discarded and not disseminated further.
                    Err(reason) => self.note_reject(me, reason, "proof"),
                }
            }
            Message::GossipBlock(block) => {
                let hash = block.block_hash();
                if !self.peers[me].seen_blocks.insert(hash) {
                    return out;
                }
                let view = self.view_for(me);
                let outcome = self.peers[me].store.append((*block).clone(), &view, Some(&self.sig_cache));
                match outcome {
                    AppendOutcome::Accepted | AppendOutcome::ForkRetained => {
                        if outcome == AppendOutcome::ForkRetained {
                            self.forks += 1;
                            self.log(me, "block_fork", "");
                        } else {
                            self.log(me, "block_accepted", "");
                        }
                        for p in &block.proofs {
                            let id = p.proof_id();
                            self.peers[me].pending.remove(&id);
                            self.peers[me].pending_ids.remove(&id);
                        }
                        out.push(Outgoing::Gossip(Message::GossipBlock(block)));
                    }
                    AppendOutcome::AlreadyKnown => {}
                    AppendOutcome::Rejected(reason) => {
                        self.note_reject(me, reason, "block");
                        if reason == RejectReason::StaleAnchor {
                            self.sync_exchange(me, from, &mut out);
                        }
                    }
                }
            }
            Message::SyncRequest => {
                let branch: Vec<Block> = self.peers[me].store.main_branch_bodies().into_iter().cloned().collect();
                if !branch.is_empty() {
                    out.push(Outgoing::Direct(from, Message::SyncBranch(Rc::new(branch))));
                }
            }
            Message::SyncBranch(blocks) => {
                let view = self.view_for(me);
                let summary = self.peers[me].store.sync(&blocks, &view, Some(&self.sig_cache));
                self.forks += summary.forks as u64;
                if summary.accepted + summary.forks > 0 {
                    self.log(me, "sync_applied", "");
                    self.prune_confirmed_pending(me);
                }
            }
        }
        out
    }

    fn prune_confirmed_pending(&mut self, me: usize) {
        let peer = &mut self.peers[me];
        let confirmed = peer.store.proof_ids_in_horizon(peer.store.head()).unwrap_or_default();
        peer.pending.retain(|id, _| !confirmed.contains(id));
        peer.pending_ids.retain(|id| !confirmed.contains(id));
    }

    fn sync_exchange(&mut self, me: usize, with: PublicKey, out: &mut Vec<Outgoing>) {
        let head = self.peers[me].store.head();
        if !self.peers[me].synced.insert((with, head)) {
            return; // already exchanged at this head
        }
        let branch: Vec<Block> = self.peers[me].store.main_branch_bodies().into_iter().cloned().collect();
        if !branch.is_empty() {
            out.push(Outgoing::Direct(with, Message::SyncBranch(Rc::new(branch))));
        }
        out.push(Outgoing::Direct(with, Message::SyncRequest));
        self.log(me, "sync_started", "");
    }

    /// Mints when this peer is entitled to: the stake leader on the current
    /// head, or — while the stake window is empty — the smallest key in its
    /// neighborhood. One block per head, attempted once per period tick so
    /// proofs batch up instead of minting a block per proof.
    fn mint_check(&mut self, me: usize, view: &PeerView, out: &mut Vec<Outgoing>) {
        if !matches!(self.peers[me].role, Role::Honest) {
            return;
        }
        let head = self.peers[me].store.head();
        if self.peers[me].pending.is_empty() || self.peers[me].minted_on.contains(&head) {
            return;
        }
        let my_pk = self.peers[me].identity.public_key();
        let entitled = match self.peers[me].store.compute_stake(head) {
            Ok(stake) if stake.is_empty() => view.overlay_contacts.iter().all(|pk| my_pk < *pk),
            Ok(_) => self.peers[me].store.eligible_leader(head).ok().flatten() == Some(my_pk),
            Err(_) => false,
        };
        if !entitled {
            return;
        }
        let block = {
            let peer = &self.peers[me];
            peer.store.assemble_block(&peer.pending, &peer.identity)
        };
        let Some(block) = block else { return };
        let hash = block.block_hash();
        let ids: Vec<ProofId> = block.proofs.iter().map(|p| p.proof_id()).collect();
        let outcome = self.peers[me].store.append(block.clone(), view, Some(&self.sig_cache));
        if outcome != AppendOutcome::Accepted {
            // Own assembly failed own validation; do not disseminate.
            self.log(me, "mint_aborted", "");
            return;
        }
        self.truth.register_block(hash, ids);
        self.peers[me].minted_on.insert(head);
        self.peers[me].seen_blocks.insert(hash);
        for p in &block.proofs {
            let id = p.proof_id();
            self.peers[me].pending.remove(&id);
            self.peers[me].pending_ids.remove(&id);
        }
        self.log(me, "block_minted", "");
        out.push(Outgoing::Gossip(Message::GossipBlock(Rc::new(block))));
    }

    // ------------------------------------------------------------------
    // Pseudonym rotation
    // ------------------------------------------------------------------

    /// Replaces the peer's key pair with a fresh one drawn from the run
    /// generator. The peer rejoins the overlay under the new key; pending
    /// proofs and in-flight requests under the old key are abandoned.
    fn rotate_identity(&mut self, me: usize) {
        if !matches!(self.peers[me].role, Role::Honest) {
            return;
        }
        let old_pk = self.peers[me].identity.public_key();
        let mut seed = [0u8; 32];
        self.rng.fill_bytes(&mut seed);
        let fresh = generate_identity(seed);
        let new_pk = fresh.public_key();

        let record = self.world.remove(&old_pk).expect("rotating peer is in the world");
        self.world.insert(PeerRecord { pk: new_pk, ..record });
        self.index_of.remove(&old_pk);
        self.index_of.insert(new_pk, me);
        self.pk_directory.insert(new_pk, me);
        self.peers[me].identity = fresh;
        self.peers[me].pending.clear();
        self.peers[me].pending_ids.clear();
        self.peers[me].outstanding.clear();
        self.world_version += 1;
        self.rotations += 1;
        self.log(me, "rotated", "");
        self.schedule_rotation(me);
    }

    // ------------------------------------------------------------------
    // Adversaries
    // ------------------------------------------------------------------

    fn adversary_tick(&mut self, me: usize) {
        let next = self.now + self.cfg.request_period_ms;
        if next <= self.cfg.duration_ms {
            self.schedule(next, Event::AdversaryTick { peer: me });
        }
        let Role::Adversary(kind) = self.peers[me].role else { return };
        let mut out = Vec::new();
        match kind {
            AttackKind::SpoofOwnLocation { displacement_m } => {
                // A request signed over displaced coordinates, anchored and
                // timestamped correctly — only the location lies.
                let identity = self.peers[me].identity.clone();
                let head = self.peers[me].store.head();
                let true_loc = self.true_location_of(&identity.public_key()).expect("adversary is placed");
                let claimed = offset_east(true_loc, displacement_m);
                if let Ok(req) = make_request(&identity, claimed, head, self.now) {
                    self.log(me, "spoofed_request", "");
                    out.push(Outgoing::RadioBroadcast(Message::Request(Rc::new(req))));
                }
            }
            AttackKind::SpoofOtherLocation => {
                out.extend(self.spoof_other_tick(me));
            }
            AttackKind::ReplayProof => {
                // Rebroadcast confirmed proofs, oldest first.
                let proofs: Vec<ProofResponse> = self.peers[me]
                    .store
                    .main_branch_bodies()
                    .iter()
                    .flat_map(|b| b.proofs.iter().cloned())
                    .take(32)
                    .collect();
                for p in proofs {
                    out.push(Outgoing::Gossip(Message::GossipProof(Rc::new(p))));
                }
            }
            AttackKind::Collusion { .. } => {
                out.extend(self.collusion_tick(me));
            }
            AttackKind::IdentityObserver => {}
        }
        self.emit(me, out);
    }

    /// Forges messages in a victim's name. The forger has no access to the
    /// victim's key, so every forgery carries an unverifiable signature.
    fn spoof_other_tick(&mut self, me: usize) -> Vec<Outgoing> {
        let mut out = Vec::new();
        let my_pk = self.peers[me].identity.public_key();
        let my_true = self.true_location_of(&my_pk).expect("adversary is placed");
        // Victim: the nearest honest peer.
        let victim = self
            .peers
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p.role, Role::Honest))
            .min_by(|(a, _), (b, _)| {
                let (ax, ay) = self.positions[*a];
                let (bx, by) = self.positions[*b];
                let (mx, my_) = self.positions[me];
                let da = (ax - mx).powi(2) + (ay - my_).powi(2);
                let db = (bx - mx).powi(2) + (by - my_).powi(2);
                da.total_cmp(&db).then_with(|| a.cmp(b))
            })
            .map(|(i, _)| i);
        let Some(victim) = victim else { return out };
        let victim_pk = self.peers[victim].identity.public_key();
        let victim_true = spot(self.positions[victim].0, self.positions[victim].1);
        let fake_spot = offset_east(victim_true, 10_000.0);
        let identity = self.peers[me].identity.clone();
        let head = self.peers[me].store.head();

        // A forged request in the victim's name, signed with the wrong key.
        let mut forged_req = ProofRequest {
            requester_pk: victim_pk,
            location: fake_spot,
            prev_block_hash: head,
            timestamp_ms: self.now,
            signature: Signature([0; 64]),
        };
        forged_req.signature = identity.sign(&forged_req.signing_bytes());
        self.log(me, "forged_request", "");
        out.push(Outgoing::RadioBroadcast(Message::Request(Rc::new(forged_req))));

        // A forged proof: own valid request wrapped in a response faked in
        // the victim's name.
        if let Ok(own_req) = make_request(&identity, my_true, head, self.now) {
            let mut forged_res = ProofResponse {
                request: own_req,
                responder_pk: victim_pk,
                location: fake_spot,
                timestamp_ms: self.now,
                signature: Signature([0; 64]),
            };
            forged_res.signature = identity.sign(&forged_res.signing_bytes());
            self.register_proof_truth(&forged_res, true);
            self.log(me, "forged_proof", "");
            out.push(Outgoing::Gossip(Message::GossipProof(Rc::new(forged_res))));
        }
        out
    }

    /// Fabricates a proof together with the partner and injects it from
    /// both colluders.
    fn collusion_tick(&mut self, me: usize) -> Vec<Outgoing> {
        let mut out = Vec::new();
        let Some(plan) = self.peers[me].adv.collusion else { return out };
        let Some(partner_identity) = self.peers[me].adv.partner_identity.clone() else { return out };
        let identity = self.peers[me].identity.clone();
        let head = self.peers[me].store.head();
        let Ok(req) = make_request(&identity, plan.claim_requester, head, self.now) else { return out };
        let Ok(res) = make_response(&req, &partner_identity, plan.claim_responder, self.now) else { return out };
        self.register_proof_truth(&res, true);
        self.log(me, "collusion_proof", &plan.case.to_string());
        let msg = Message::GossipProof(Rc::new(res));
        out.push(Outgoing::Gossip(msg.clone()));
        out.push(Outgoing::GossipAs(plan.partner, msg));
        out
    }

    fn adversary_handle(&mut self, me: usize, kind: AttackKind, from: PublicKey, msg: Message) -> Vec<Outgoing> {
        let mut out = Vec::new();
        if matches!(kind, AttackKind::IdentityObserver) {
            self.observe(me, &msg);
        }
        match msg {
            Message::Request(req) => {
                if let AttackKind::SpoofOwnLocation { displacement_m } = kind {
                    // Answer anything with displaced coordinates.
                    let identity = self.peers[me].identity.clone();
                    if req.requester_pk != identity.public_key() {
                        let true_loc = self.true_location_of(&identity.public_key()).expect("placed");
                        let claimed = offset_east(true_loc, displacement_m);
                        if let Ok(res) = make_response(&req, &identity, claimed, self.now) {
                            self.register_proof_truth(&res, true);
                            out.push(Outgoing::RadioTo(req.requester_pk, Message::Response(Rc::new(res))));
                        }
                    }
                }
            }
            Message::Response(res) => {
                if matches!(kind, AttackKind::SpoofOwnLocation { .. }) {
                    // Accept uncritically and disseminate; succeeds only if
                    // honest validators stop checking ranges.
                    let id = res.proof_id();
                    if self.peers[me].seen_proofs.insert(id) {
                        out.push(Outgoing::Gossip(Message::GossipProof(res)));
                    }
                }
            }
            Message::GossipProof(_) => {}
            Message::GossipBlock(block) => {
                // Every adversary tracks the chain to keep its anchors
                // fresh, repairing gaps through sync like anyone else.
                let hash = block.block_hash();
                if self.peers[me].seen_blocks.insert(hash) {
                    let view = self.view_for(me);
                    let outcome = self.peers[me].store.append((*block).clone(), &view, Some(&self.sig_cache));
                    if outcome == AppendOutcome::Rejected(RejectReason::StaleAnchor) {
                        let head = self.peers[me].store.head();
                        if self.peers[me].synced.insert((from, head)) {
                            out.push(Outgoing::Direct(from, Message::SyncRequest));
                        }
                    }
                }
            }
            Message::SyncRequest => {
                let branch: Vec<Block> = self.peers[me].store.main_branch_bodies().into_iter().cloned().collect();
                if !branch.is_empty() {
                    out.push(Outgoing::Direct(from, Message::SyncBranch(Rc::new(branch))));
                }
            }
            Message::SyncBranch(blocks) => {
                let view = self.view_for(me);
                let _ = self.peers[me].store.sync(&blocks, &view, Some(&self.sig_cache));
            }
        }
        out
    }

    /// Observer bookkeeping: first and last sighting per pseudonym.
    fn observe(&mut self, me: usize, msg: &Message) {
        let mut sightings: Vec<(PublicKey, GeoLocation)> = Vec::new();
        match msg {
            Message::Request(req) => sightings.push((req.requester_pk, req.location)),
            Message::Response(res) | Message::GossipProof(res) => {
                sightings.push((res.request.requester_pk, res.request.location));
                sightings.push((res.responder_pk, res.location));
            }
            Message::GossipBlock(block) => {
                for p in &block.proofs {
                    sightings.push((p.request.requester_pk, p.request.location));
                    sightings.push((p.responder_pk, p.location));
                }
            }
            Message::SyncRequest | Message::SyncBranch(_) => {}
        }
        let now = self.now;
        let log = &mut self.peers[me].adv.sightings;
        for (pk, loc) in sightings {
            log.entry(pk)
                .and_modify(|(_, last)| *last = (now, loc))
                .or_insert(((now, loc), (now, loc)));
        }
    }

    /// Pseudonym pairs an observer would link: a key that stops appearing,
    /// followed by a new key first seen within radio range of the old key's
    /// last sighting. Reported, never scored.
    fn linkage_guesses(&self) -> Option<u64> {
        let mut total = 0u64;
        let mut any_observer = false;
        for peer in &self.peers {
            if !matches!(peer.role, Role::Adversary(AttackKind::IdentityObserver)) {
                continue;
            }
            any_observer = true;
            let log = &peer.adv.sightings;
            for (old_pk, (_, (old_last_t, old_last_loc))) in log {
                for (new_pk, ((new_first_t, new_first_loc), _)) in log {
                    if old_pk == new_pk || new_first_t <= old_last_t {
                        continue;
                    }
                    let close = polc_core::geo::distance_m(*old_last_loc, *new_first_loc)
                        .map(|d| d <= self.cfg.max_range_m)
                        .unwrap_or(false);
                    if close {
                        total += 1;
                    }
                }
            }
        }
        any_observer.then_some(total)
    }

    // ------------------------------------------------------------------
    // Wrap-up
    // ------------------------------------------------------------------

    fn branch_proof_ids(&self, me: usize) -> Vec<ProofId> {
        let store = &self.peers[me].store;
        let mut out = Vec::new();
        let mut cur = store.head();
        while cur != store.genesis() {
            if let Some(ids) = self.truth.block_proofs(&cur) {
                out.extend_from_slice(ids);
            } else if let Some(body) = store.body(&cur) {
                out.extend(body.proofs.iter().map(|p| p.proof_id()));
            }
            match store.parent_of(&cur) {
                Some(parent) => cur = parent,
                None => break,
            }
        }
        out
    }

    /// Protocol-logic invariants that must hold after every run; a failure
    /// here is a bug, not a scenario outcome.
    fn check_post_hoc_invariants(&self) {
        let t = self.cfg.stake_window as usize;
        for (i, peer) in self.peers.iter().enumerate() {
            if !matches!(peer.role, Role::Honest) {
                continue;
            }
            let ids = self.branch_proof_ids(i);
            let distinct: BTreeSet<&ProofId> = ids.iter().collect();
            assert_eq!(distinct.len(), ids.len(), "peer {i}: duplicate proof on its main branch");

            let mut producers = Vec::new();
            let mut cur = peer.store.head();
            while cur != peer.store.genesis() {
                match peer.store.producer_of(&cur) {
                    Some(pk) => producers.push(pk),
                    None => break,
                }
                match peer.store.parent_of(&cur) {
                    Some(parent) => cur = parent,
                    None => break,
                }
            }
            for (j, pk) in producers.iter().enumerate() {
                for k in 1..t {
                    if let Some(other) = producers.get(j + k) {
                        assert_ne!(pk, other, "peer {i}: producer repeated within a {t}-block window");
                    }
                }
            }
        }
    }

    fn into_report(self) -> SimReport {
        let mut final_heads = BTreeMap::new();
        for (i, peer) in self.peers.iter().enumerate() {
            final_heads.insert(i as u32, peer.store.head().to_string());
        }

        let honest: Vec<usize> = self
            .peers
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p.role, Role::Honest))
            .map(|(i, _)| i)
            .collect();

        let convergence = honest
            .windows(2)
            .all(|w| self.peers[w[0]].store.head() == self.peers[w[1]].store.head());

        // Consensus head: the most common honest head, ties toward the
        // smaller digest.
        let mut head_counts: BTreeMap<Digest, usize> = BTreeMap::new();
        for &i in &honest {
            *head_counts.entry(self.peers[i].store.head()).or_insert(0) += 1;
        }
        let consensus_head = head_counts
            .iter()
            .max_by(|(ha, ca), (hb, cb)| ca.cmp(cb).then_with(|| hb.cmp(ha)))
            .map(|(h, _)| *h);

        let consensus_peer = honest
            .iter()
            .copied()
            .find(|&i| Some(self.peers[i].store.head()) == consensus_head);

        let consensus_ids: Vec<ProofId> =
            consensus_peer.map(|i| self.branch_proof_ids(i)).unwrap_or_default();
        let confirmed_proofs = consensus_ids.iter().collect::<BTreeSet<_>>().len() as u64;
        let adversary_proofs_confirmed = consensus_ids
            .iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|id| self.truth.proof(id).map(|t| t.fabricated).unwrap_or(false))
            .count() as u64;

        // Ground truth over the union of honest main branches.
        let mut union_ids: BTreeSet<ProofId> = BTreeSet::new();
        for &i in &honest {
            union_ids.extend(self.branch_proof_ids(i));
        }
        let fake_proofs_confirmed = union_ids
            .iter()
            .filter(|id| self.truth.proof(id).map(|t| t.fake).unwrap_or(true))
            .count() as u64;

        let rejections = self
            .rejections
            .iter()
            .map(|(reason, count)| (reason.as_str().to_string(), *count))
            .collect();

        SimReport {
            seed: self.cfg.seed,
            final_heads,
            confirmed_proofs,
            fake_proofs_confirmed,
            adversary_proofs_confirmed,
            rejections,
            convergence,
            forks_observed: self.forks,
            rotations: self.rotations,
            linkage_guesses: self.linkage_guesses(),
            events: self.events,
        }
    }
}
