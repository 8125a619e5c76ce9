use polc_sim::scenarios::{attack_config, AttackFamily};

fn main() {
    let mut cfg = attack_config(AttackFamily::CollusionD, 1000);
    cfg.record_events = true;
    let report = polc_sim::run(cfg).unwrap();
    let mut mints = 0;
    for e in report.events.as_ref().unwrap() {
        if e.action == "block_minted" { mints += 1; }
        if e.action == "block_minted" && e.time_ms < 4200 {
            println!("{:>7} peer {:>2} {}", e.time_ms, e.peer, e.action);
        }
    }
    println!("total mints: {mints}");
    // final heights per peer
    for (peer, head) in &report.final_heads {
        if *peer <= 3 { println!("peer {peer} head {head}"); }
    }
}
