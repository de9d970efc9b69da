//! Trains an adversarial NPC against the IDM/MOBIL Ego and reports its
//! training and greedy crash rates.
//!
//!     cargo run --release --example falsify_rule_based -- [TRANSITIONS] [SEED]

use adversarial_traffic::dqn::{run_training, FixedOpponent, Opponent, Role};
use adversarial_traffic::eval::{evaluate_matchup, CrashRateSeries};
use adversarial_traffic::hardening::Environment;
use adversarial_traffic::nn::Mlp;
use adversarial_traffic::policy::{GreedyQPolicy, RuleBasedPolicy};
use adversarial_traffic::seed;
use adversarial_traffic::sim::{InitialConfig, MetaAction, OBS_FEATURES_PER_VEHICLE};
use std::sync::Arc;

fn main() {
    let mut args = std::env::args().skip(1);
    let budget: u64 = args.next().map_or(30_000, |s| s.parse().expect("transition count"));
    let master: u64 = args.next().map_or(0, |s| s.parse().expect("integer seed"));

    let mut env = Environment::default();
    env.dqn.hidden = 64;
    let setup = env.training_setup(Role::Npc, &InitialConfig::ALL, budget);
    let ego = Arc::new(RuleBasedPolicy::new(env.rule));
    let mut opponent = FixedOpponent(Opponent {
        id: 0,
        policy: ego.clone(),
        is_adversary: false,
    });
    let init = Mlp::q_network(
        2 * OBS_FEATURES_PER_VEHICLE,
        env.dqn.hidden,
        MetaAction::COUNT,
        &mut seed::stream(master, "init-npc", &[0]),
    );
    let (net, trace) = run_training(&setup, init, &mut opponent, &mut seed::stream(master, "train-npc", &[0])).unwrap();

    let series = CrashRateSeries::from_trace(&trace, 100);
    let rolling = series.rolling();
    for (i, cr) in rolling.iter().enumerate().step_by((rolling.len() / 10).max(1)) {
        println!("episode {i:>6}: rolling crash rate {cr:.2}");
    }
    let npc = GreedyQPolicy::new(net);
    let eval = evaluate_matchup(&env.highway, ego.as_ref(), &npc, 100, &InitialConfig::ALL, master).unwrap();
    println!(
        "{} episodes, final rolling CR {:.2}, greedy CR {:.2}",
        trace.len(),
        series.last().unwrap_or(0.0),
        eval.crash_rate
    );
}
