use polc_sim::scenarios::{attack_config, AttackFamily};

fn main() {
    let mut cfg = attack_config(AttackFamily::CollusionD, 1000);
    cfg.record_events = true;
    let report = polc_sim::run(cfg).unwrap();
    for e in report.events.as_ref().unwrap() {
        let w1 = (4100..4300).contains(&e.time_ms);
        let w2 = (8100..8300).contains(&e.time_ms);
        if (w1 || w2) && (e.action.starts_with("proof") || e.action.contains("collusion")) {
            println!("{:>7} peer {:>2} {} {}", e.time_ms, e.peer, e.action, e.detail);
        }
    }
}
