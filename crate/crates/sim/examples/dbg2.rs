use polc_sim::scenarios::{attack_config, AttackFamily};

fn main() {
    let mut cfg = attack_config(AttackFamily::CollusionD, 1000);
    cfg.record_events = true;
    let report = polc_sim::run(cfg).unwrap();
    for e in report.events.as_ref().unwrap() {
        if e.peer <= 1 {
            println!("{:>7} peer {} {} {}", e.time_ms, e.peer, e.action, e.detail);
        }
    }
    println!("rejections: {:?}", report.rejections);
}
