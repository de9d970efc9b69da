//! Behavior-prediction experiment on the behind-left preset: an Ego with
//! and without the adversary flag, its speed against rule-based traffic and
//! its crash rate against the adversary.
//!
//!     cargo run --release --example speed_trace -- [TRANSITIONS]

use adversarial_traffic::commands::{self, RULE_BASED};
use adversarial_traffic::config::RunConfig;
use std::path::Path;

fn main() {
    let budget: u64 = std::env::args().nth(1).map_or(30_000, |s| s.parse().expect("transition count"));
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/behind_left_overspeed.toml");
    let mut cfg = RunConfig::load(&preset).unwrap();
    cfg.dqn.hidden = 64;
    cfg.train.transitions = budget;
    let out = std::env::temp_dir().join("advtraffic-speed-trace");

    commands::falsify(&cfg, RULE_BASED, &out.join("v1")).unwrap();
    let v1 = out.join("v1/npc.bin").display().to_string();
    let [lo, hi] = cfg.reward.ego.nominal_speed_range;
    println!("nominal band [{lo}, {hi}] m/s");
    for augmented in [false, true] {
        let dir = out.join(if augmented { "augmented" } else { "plain" });
        commands::train_ego(&cfg, &[RULE_BASED.to_string(), v1.clone()], augmented, &dir).unwrap();
        let ego = dir.join("ego.bin").display().to_string();
        let t = commands::speedtrace(&cfg, &ego, &v1, &dir).unwrap();
        println!(
            "augmented={augmented:<5} vs rule-based: {:.0}% in band, {:.0}% above | vs adversary: CR {:.2}",
            100.0 * t.rule_based.fraction_in_band,
            100.0 * t.rule_based.fraction_above_band,
            t.adversarial.crash_rate
        );
    }
    println!("speed.csv and crash_rate.csv under {}", out.display());
}
