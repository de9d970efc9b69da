//! Alternating falsification and hardening with one of the three opponent
//! selection methods, ending with the Ego x NPC crash-rate matrix.
//!
//!     cargo run --release --example hardening_cycles -- [local|uniform|prioritized] [TRANSITIONS] [CYCLES]

use adversarial_traffic::hardening::{run_cycles, CycleConfig, Environment, Method};

fn main() {
    let mut args = std::env::args().skip(1);
    let method: Method = args.next().map_or(Method::Local, |s| s.parse().expect("local, uniform or prioritized"));
    let transitions: u64 = args.next().map_or(10_000, |s| s.parse().expect("transition count"));
    let n_cycles: u32 = args.next().map_or(2, |s| s.parse().expect("cycle count"));

    let mut env = Environment::default();
    env.dqn.hidden = 64;
    let config = CycleConfig {
        n_cycles,
        method,
        transitions_per_training: transitions,
        eval_episodes: 50,
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..CycleConfig::default()
    };
    let outcome = run_cycles(&config, &env).unwrap();

    for entry in &outcome.report.cycles {
        println!(
            "cycle {}: {} trained vs pool of {}, tournament rating {:.0}",
            entry.cycle,
            entry.npc_training.agent,
            entry.npc_training.opponents_pool_size,
            entry.npc_tournament.final_rating
        );
        if let (Some(t), Some(r)) = (&entry.ego_training, &entry.ego_tournament) {
            println!("         {} trained vs pool of {}, tournament rating {:.0}", t.agent, t.opponents_pool_size, r.final_rating);
        }
    }
    if let Some(m) = &outcome.report.crash_matrix {
        println!("\ncrash rates ({}):\n{}", method.name(), m.to_csv());
    }
}
