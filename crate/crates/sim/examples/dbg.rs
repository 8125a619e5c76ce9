use polc_sim::scenarios::{attack_config, AttackFamily};

fn main() {
    let family = match std::env::args().nth(1).as_deref() {
        Some("a") => AttackFamily::CollusionA,
        Some("d") => AttackFamily::CollusionD,
        _ => AttackFamily::CollusionD,
    };
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let mut cfg = attack_config(family, seed);
    cfg.record_events = true;
    let report = polc_sim::run(cfg).unwrap();
    let events = report.events.as_ref().unwrap();
    for e in events {
        if e.action.contains("collusion") || e.action.contains("forged") || (e.action == "proof_rejected") || e.action == "mint_aborted" {
            println!("{:>7} peer {:>2} {} {}", e.time_ms, e.peer, e.action, e.detail);
        }
    }
    println!("rejections: {:?}", report.rejections);
    println!("adversary confirmed: {}, fake: {}, confirmed: {}", report.adversary_proofs_confirmed, report.fake_proofs_confirmed, report.confirmed_proofs);
}
