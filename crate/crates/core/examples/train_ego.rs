//! Trains an Ego against a uniform mix of rule-based traffic and a freshly
//! falsified adversary, with or without the adversary flag in its state.
//!
//!     cargo run --release --example train_ego -- [TRANSITIONS] [augmented]

use adversarial_traffic::commands::{self, RULE_BASED};
use adversarial_traffic::config::RunConfig;
use adversarial_traffic::sim::InitialConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let budget: u64 = args.next().map_or(20_000, |s| s.parse().expect("transition count"));
    let augmented = args.next().is_some_and(|s| s == "augmented");

    let mut cfg = RunConfig::default();
    cfg.dqn.hidden = 64;
    cfg.train.transitions = budget;
    cfg.train.configs = vec![InitialConfig::BL, InitialConfig::BC, InitialConfig::AL];
    cfg.eval.episodes = 50;
    cfg.eval.configs = cfg.train.configs.clone();
    let out = std::env::temp_dir().join("advtraffic-train-ego");

    let v1 = commands::falsify(&cfg, RULE_BASED, &out.join("npc")).unwrap();
    println!("adversary: greedy CR {:.2} vs the rule-based Ego", v1.greedy_eval_crash_rate);
    let npc = out.join("npc/npc.bin").display().to_string();

    let trace = commands::train_ego(&cfg, &[RULE_BASED.to_string(), npc.clone()], augmented, &out.join("ego")).unwrap();
    println!("Ego (augmented: {augmented}): {} episodes, rolling CR {:?}", trace.len(), trace.tail_crash_rate(100));
    let ego = out.join("ego/ego.bin").display().to_string();
    for (name, opponent) in [("rule-based", RULE_BASED.to_string()), ("adversary", npc)] {
        let r = commands::evaluate(&cfg, &ego, &opponent, &out.join(format!("eval_{name}"))).unwrap();
        println!("  vs {name:<10}: CR {:.2}", r.crash_rate);
    }
    println!("artifacts in {}", out.display());
}
