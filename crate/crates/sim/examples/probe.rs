use polc_sim::scenarios::{attack_config, check_attack_outcome, convergence_config, AttackFamily};

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    for family in AttackFamily::ALL {
        let mut failures = 0;
        let mut sample = String::new();
        let start = std::time::Instant::now();
        for seed in 0..seeds {
            let report = polc_sim::run(attack_config(family, 1_000 + seed)).unwrap();
            if let Err(e) = check_attack_outcome(family, &report) {
                failures += 1;
                if sample.is_empty() {
                    sample = format!("{e} | rejections={:?} confirmed={} conv={}", report.rejections, report.confirmed_proofs, report.convergence);
                }
            }
        }
        println!("{family:>22}: {}/{seeds} ok  ({:?})  {sample}", seeds - failures, start.elapsed());
    }
    let start = std::time::Instant::now();
    let mut conv_fail = 0;
    for seed in 0..seeds {
        let r = polc_sim::run(convergence_config(2_000 + seed)).unwrap();
        if !r.convergence { conv_fail += 1; }
    }
    println!("{:>22}: {}/{seeds} ok  ({:?})", "convergence", seeds - conv_fail, start.elapsed());
}
