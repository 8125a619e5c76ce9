//! Canned scenario families: the attack regressions, the convergence
//! benchmark, and the rotation benchmark. The CLI's `attacks` command and
//! the acceptance suite both run exactly these configurations.

use crate::config::{AdversarySpec, AttackKind, CollusionCase, LatencyRange, ScenarioConfig};
use crate::report::SimReport;

/// The eight attack scenario families: the five attacks with the four
/// collusion sub-cases spelled out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackFamily {
    SpoofOwnLocation,
    SpoofOtherLocation,
    ReplayProof,
    CollusionA,
    CollusionB,
    CollusionC,
    CollusionD,
    IdentityObserver,
}

impl AttackFamily {
    pub const ALL: [AttackFamily; 8] = [
        AttackFamily::SpoofOwnLocation,
        AttackFamily::SpoofOtherLocation,
        AttackFamily::ReplayProof,
        AttackFamily::CollusionA,
        AttackFamily::CollusionB,
        AttackFamily::CollusionC,
        AttackFamily::CollusionD,
        AttackFamily::IdentityObserver,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AttackFamily::SpoofOwnLocation => "spoof_own_location",
            AttackFamily::SpoofOtherLocation => "spoof_other_location",
            AttackFamily::ReplayProof => "replay_proof",
            AttackFamily::CollusionA => "collusion_a",
            AttackFamily::CollusionB => "collusion_b",
            AttackFamily::CollusionC => "collusion_c",
            AttackFamily::CollusionD => "collusion_d",
            AttackFamily::IdentityObserver => "identity_observer",
        }
    }
}

impl std::fmt::Display for AttackFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn attack_base(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        n_peers: 25,
        world_extent_m: 400.0,
        stake_window: 5,
        max_range_m: 100.0,
        k_contacts: 8,
        freshness_window_ms: 30_000,
        duration_ms: 12_000,
        request_period_ms: 4_000,
        message_loss_prob: 0.0,
        latency_ms: LatencyRange { min_ms: 10, max_ms: 30 },
        pseudonym_rotation_rate_per_hour: 0.0,
        adversaries: vec![],
        prune: false,
        record_events: false,
        skip_range_checks: false,
    }
}

fn collusion_pair(case: CollusionCase) -> Vec<AdversarySpec> {
    vec![
        AdversarySpec { peer: 0, kind: AttackKind::Collusion { case, partner: 1 } },
        AdversarySpec { peer: 1, kind: AttackKind::Collusion { case, partner: 0 } },
    ]
}

/// The pinned scenario for one attack family and sweep seed.
pub fn attack_config(family: AttackFamily, seed: u64) -> ScenarioConfig {
    let mut cfg = attack_base(seed);
    match family {
        AttackFamily::SpoofOwnLocation => {
            cfg.adversaries =
                vec![AdversarySpec { peer: 0, kind: AttackKind::SpoofOwnLocation { displacement_m: 10_000.0 } }];
        }
        AttackFamily::SpoofOtherLocation => {
            cfg.adversaries = vec![AdversarySpec { peer: 0, kind: AttackKind::SpoofOtherLocation }];
        }
        AttackFamily::ReplayProof => {
            // Loss makes some peers miss the original dissemination, so
            // replayed copies reach fresh validators instead of dying in
            // flood dedup.
            cfg.message_loss_prob = 0.15;
            cfg.adversaries = vec![AdversarySpec { peer: 0, kind: AttackKind::ReplayProof }];
        }
        AttackFamily::CollusionA => {
            // Packed neighborhoods: every overlay contact near the claimed
            // spot is also within radio range of it.
            cfg.world_extent_m = 220.0;
            cfg.k_contacts = 6;
            cfg.adversaries = collusion_pair(CollusionCase::A);
        }
        AttackFamily::CollusionB => {
            cfg.world_extent_m = 220.0;
            cfg.k_contacts = 6;
            cfg.adversaries = collusion_pair(CollusionCase::B);
        }
        AttackFamily::CollusionC => {
            cfg.world_extent_m = 220.0;
            cfg.k_contacts = 6;
            cfg.adversaries = collusion_pair(CollusionCase::C);
        }
        AttackFamily::CollusionD => {
            cfg.world_extent_m = 220.0;
            cfg.k_contacts = 6;
            cfg.adversaries = collusion_pair(CollusionCase::D);
        }
        AttackFamily::IdentityObserver => {
            cfg.pseudonym_rotation_rate_per_hour = 120.0;
            cfg.adversaries = vec![AdversarySpec { peer: 0, kind: AttackKind::IdentityObserver }];
        }
    }
    cfg
}

/// Safety conditions a single attack run must satisfy; `Err` explains the
/// violation.
pub fn check_attack_outcome(family: AttackFamily, report: &SimReport) -> Result<(), String> {
    if report.fake_proofs_confirmed != 0 {
        return Err(format!(
            "{} seed {}: {} fake proofs were confirmed",
            family, report.seed, report.fake_proofs_confirmed
        ));
    }
    match family {
        AttackFamily::CollusionD => {
            // The proof is genuine and must land; the fake declaration must
            // be flagged by at least one honest observer.
            if report.adversary_proofs_confirmed == 0 {
                return Err(format!("{} seed {}: the genuine proof never confirmed", family, report.seed));
            }
            let suspicions = report.rejections.get("collusion_suspect").copied().unwrap_or(0);
            if suspicions == 0 {
                return Err(format!("{} seed {}: no honest observer flagged the declaration", family, report.seed));
            }
        }
        _ => {
            if report.adversary_proofs_confirmed != 0 {
                return Err(format!(
                    "{} seed {}: {} fabricated proofs were confirmed",
                    family, report.seed, report.adversary_proofs_confirmed
                ));
            }
        }
    }
    Ok(())
}

/// The pinned convergence scenario: 25 honest peers, no loss, 10-50 ms
/// latency, 60 simulated seconds.
pub fn convergence_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        n_peers: 25,
        world_extent_m: 300.0,
        stake_window: 5,
        max_range_m: 100.0,
        k_contacts: 10,
        freshness_window_ms: 30_000,
        duration_ms: 60_000,
        request_period_ms: 12_000,
        message_loss_prob: 0.0,
        latency_ms: LatencyRange { min_ms: 10, max_ms: 50 },
        pseudonym_rotation_rate_per_hour: 0.0,
        adversaries: vec![],
        prune: false,
        record_events: false,
        skip_range_checks: false,
    }
}

/// The pinned rotation scenario: small honest world, rate high enough to
/// observe dozens of rotations per run.
pub fn rotation_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        n_peers: 6,
        world_extent_m: 200.0,
        stake_window: 5,
        max_range_m: 100.0,
        k_contacts: 5,
        freshness_window_ms: 30_000,
        duration_ms: 120_000,
        request_period_ms: 10_000,
        message_loss_prob: 0.0,
        latency_ms: LatencyRange { min_ms: 10, max_ms: 30 },
        pseudonym_rotation_rate_per_hour: 240.0,
        adversaries: vec![],
        prune: false,
        record_events: false,
        skip_range_checks: false,
    }
}

/// Expected rotations per `rotation_config` run: peers x rate x duration.
pub fn rotation_expected_per_run() -> f64 {
    let cfg = rotation_config(0);
    cfg.n_peers as f64 * cfg.pseudonym_rotation_rate_per_hour * (cfg.duration_ms as f64 / 3_600_000.0)
}

/// A small pseudo-random but fully determined scenario, for determinism
/// sweeps. Index selects the shape; every field derives from it.
pub fn determinism_config(index: u64) -> ScenarioConfig {
    let kinds: [Option<AttackKind>; 5] = [
        None,
        Some(AttackKind::SpoofOwnLocation { displacement_m: 5_000.0 }),
        Some(AttackKind::SpoofOtherLocation),
        Some(AttackKind::ReplayProof),
        Some(AttackKind::IdentityObserver),
    ];
    let n_peers = 3 + (index % 6) as u32; // 3..=8
    let mut adversaries = Vec::new();
    if n_peers >= 4 {
        if index % 7 == 3 {
            adversaries = collusion_pair(CollusionCase::A);
        } else if let Some(kind) = kinds[(index % 5) as usize] {
            adversaries.push(AdversarySpec { peer: 0, kind });
        }
    }
    ScenarioConfig {
        seed: 0x5eed_0000 + index,
        n_peers,
        world_extent_m: 120.0 + 40.0 * (index % 5) as f64,
        stake_window: 3 + index % 3,
        max_range_m: 100.0,
        k_contacts: 1 + (index % 4) as usize,
        freshness_window_ms: 30_000,
        duration_ms: 8_000 + 500 * (index % 4),
        request_period_ms: 2_500 + 250 * (index % 3),
        message_loss_prob: [0.0, 0.1, 0.3][(index % 3) as usize],
        latency_ms: LatencyRange { min_ms: 5, max_ms: 5 + 5 * (index % 8) },
        pseudonym_rotation_rate_per_hour: if index % 2 == 0 { 0.0 } else { 400.0 },
        adversaries,
        prune: index % 4 == 1,
        record_events: false,
        skip_range_checks: false,
    }
}
