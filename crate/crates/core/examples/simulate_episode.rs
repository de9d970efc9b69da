//! Two rule-based drivers on the highway, one line per decision step.
//!
//!     cargo run --example simulate_episode -- [CONFIG] [SEED]

use adversarial_traffic::planners::RulePlannerParams;
use adversarial_traffic::policy::{ActContext, Policy, RuleBasedPolicy};
use adversarial_traffic::seed;
use adversarial_traffic::sim::{Highway, InitialConfig, SimParams, EGO, NPC};

fn main() {
    let mut args = std::env::args().skip(1);
    let config: InitialConfig = args
        .next()
        .map(|s| serde_json::from_value(serde_json::Value::String(s)).expect("one of BL BC BR AL AR FL FC FR"))
        .unwrap_or(InitialConfig::BL);
    let master: u64 = args.next().map_or(0, |s| s.parse().expect("integer seed"));

    let hw = Highway::new(SimParams::default());
    let driver = RuleBasedPolicy::new(RulePlannerParams::default());
    let mut world = hw.spawn(config, &mut seed::stream(master, "example", &[]));
    let ctx = ActContext::default();

    println!("step  action(ego/npc)     ego x/y/v            npc x/y/v");
    while hw.status(&world).is_none() {
        let a = driver.act(&hw, &world, EGO, ctx);
        let b = driver.act(&hw, &world, NPC, ctx);
        hw.step(&mut world, a, b).unwrap();
        let (e, n) = (world.ego(), world.npc());
        println!(
            "{:>4}  {:<9}/{:<9} {:7.1} {:4.1} {:4.1}   {:7.1} {:4.1} {:4.1}",
            world.step_count, format!("{a:?}"), format!("{b:?}"), e.x, e.y, e.v, n.x, n.y, n.v
        );
    }
    println!("ended: {:?}", hw.status(&world).unwrap());
    let obs = hw.observe(&world, EGO, Some(false)).unwrap();
    println!("final Ego observation (augmented, {} features): {:?}", obs.len(), obs.as_slice());
}
