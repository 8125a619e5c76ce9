//! Scenario configuration.
//!
//! The on-disk format (TOML) mirrors [`ScenarioConfig`] field names
//! one-to-one; see `polc run --config` and the sample in the README.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error)]
#[error("invalid config: {field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

fn bad(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError { field, message: message.into() }
}

/// Uniform one-way latency bounds, milliseconds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct LatencyRange {
    pub min_ms: u64,
    pub max_ms: u64,
}

/// Which of the four collusion setups the pair plays.
///
/// The two axes are whether the fabricated proof's claimed locations and
/// the overlay-declared locations are truthful:
/// - `A`: claimed fake, declared equal to the claim (both fake);
/// - `B`: claimed fake, declared fake elsewhere (both fake, different);
/// - `C`: claimed fake, declared truthful;
/// - `D`: claimed truthful (the proof is genuine), declared fake.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CollusionCase {
    A,
    B,
    C,
    D,
}

impl std::fmt::Display for CollusionCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CollusionCase::A => f.write_str("a"),
            CollusionCase::B => f.write_str("b"),
            CollusionCase::C => f.write_str("c"),
            CollusionCase::D => f.write_str("d"),
        }
    }
}

/// Adversary behavior, one of the five attack families.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "attack", rename_all = "snake_case")]
pub enum AttackKind {
    /// Signs its own requests and responses with displaced coordinates
    /// while declaring its location truthfully to the overlay.
    SpoofOwnLocation { displacement_m: f64 },
    /// Forges location claims on behalf of another peer without its key;
    /// structurally doomed to fail signature checks.
    SpoofOtherLocation,
    /// Rebroadcasts proofs it has already seen confirmed.
    ReplayProof,
    /// Fabricates proofs together with `partner`; the configuration must
    /// contain the reciprocal entry for the partner.
    Collusion { case: CollusionCase, partner: u32 },
    /// Passively records every proof it sees and guesses identity links.
    IdentityObserver,
}

/// One adversary assignment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AdversarySpec {
    pub peer: u32,
    #[serde(flatten)]
    pub kind: AttackKind,
}

/// A complete, reproducible scenario description. `run` with equal configs
/// yields byte-identical reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Root of all randomness in the run (world layout, latencies, losses,
    /// rotation times), fed to one ChaCha20 generator.
    pub seed: u64,
    pub n_peers: u32,
    /// Peers are placed uniformly in a square of this side length.
    pub world_extent_m: f64,
    /// The consensus stake window.
    #[serde(rename = "T")]
    pub stake_window: u64,
    pub max_range_m: f64,
    pub k_contacts: usize,
    pub freshness_window_ms: u64,
    pub duration_ms: u64,
    /// How often each peer broadcasts a proof-of-location request.
    pub request_period_ms: u64,
    pub message_loss_prob: f64,
    pub latency_ms: LatencyRange,
    pub pseudonym_rotation_rate_per_hour: f64,
    #[serde(default)]
    pub adversaries: Vec<AdversarySpec>,
    /// Header-only pruning beyond `2T` in every peer's store.
    #[serde(default)]
    pub prune: bool,
    /// Collect per-event records into the report.
    #[serde(default)]
    pub record_events: bool,
    /// Test hook for the attack suite's self-check: disables every range
    /// comparison in validation. Never enable outside regression tests.
    #[doc(hidden)]
    #[serde(default)]
    pub skip_range_checks: bool,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_peers == 0 {
            return Err(bad("n_peers", "must be a positive number of peers"));
        }
        if !self.world_extent_m.is_finite() || self.world_extent_m <= 0.0 {
            return Err(bad("world_extent_m", format!("must be positive, got {}", self.world_extent_m)));
        }
        if self.stake_window == 0 {
            return Err(bad("T", "the stake window must be at least 1"));
        }
        if !self.max_range_m.is_finite() || self.max_range_m <= 0.0 {
            return Err(bad("max_range_m", format!("must be positive, got {}", self.max_range_m)));
        }
        if self.k_contacts == 0 {
            return Err(bad("k_contacts", "must be at least 1"));
        }
        if self.freshness_window_ms == 0 {
            return Err(bad("freshness_window_ms", "must be positive"));
        }
        if self.duration_ms == 0 {
            return Err(bad("duration_ms", "must be positive"));
        }
        if self.request_period_ms == 0 {
            return Err(bad("request_period_ms", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.message_loss_prob) || !self.message_loss_prob.is_finite() {
            return Err(bad("message_loss_prob", format!("must lie in [0, 1], got {}", self.message_loss_prob)));
        }
        if self.latency_ms.min_ms > self.latency_ms.max_ms {
            return Err(bad(
                "latency_ms",
                format!("min_ms {} exceeds max_ms {}", self.latency_ms.min_ms, self.latency_ms.max_ms),
            ));
        }
        if !self.pseudonym_rotation_rate_per_hour.is_finite() || self.pseudonym_rotation_rate_per_hour < 0.0 {
            return Err(bad("pseudonym_rotation_rate_per_hour", "must be non-negative"));
        }
        for spec in &self.adversaries {
            if spec.peer >= self.n_peers {
                return Err(bad("adversaries", format!("peer index {} is out of range", spec.peer)));
            }
            if let AttackKind::Collusion { partner, .. } = spec.kind {
                if partner >= self.n_peers {
                    return Err(bad("adversaries", format!("collusion partner {partner} is out of range")));
                }
                if partner == spec.peer {
                    return Err(bad("adversaries", "a peer cannot collude with itself"));
                }
                let reciprocal = self.adversaries.iter().any(|other| {
                    other.peer == partner
                        && matches!(other.kind, AttackKind::Collusion { partner: p, .. } if p == spec.peer)
                });
                if !reciprocal {
                    return Err(bad(
                        "adversaries",
                        format!("collusion between {} and {partner} needs the reciprocal entry", spec.peer),
                    ));
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.adversaries {
            if !seen.insert(spec.peer) {
                return Err(bad("adversaries", format!("peer {} is assigned twice", spec.peer)));
            }
        }
        Ok(())
    }

    /// Parses and validates a TOML scenario document.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| bad("document", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
