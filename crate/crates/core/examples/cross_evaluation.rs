//! Crash-rate table of Egos (rows) against NPCs (columns), evaluated in
//! parallel with schedule-independent seeds.

use adversarial_traffic::dqn::{run_training, FixedOpponent, Opponent, Role};
use adversarial_traffic::eval::{cross_table, Entrant};
use adversarial_traffic::hardening::Environment;
use adversarial_traffic::nn::Mlp;
use adversarial_traffic::policy::{GreedyQPolicy, Policy, RuleBasedPolicy};
use adversarial_traffic::seed;
use adversarial_traffic::sim::{InitialConfig, MetaAction, OBS_FEATURES_PER_VEHICLE};
use std::sync::Arc;

fn main() {
    let budget: u64 = std::env::args().nth(1).map_or(15_000, |s| s.parse().expect("transition count"));
    let mut env = Environment::default();
    env.dqn.hidden = 64;
    let rule: Arc<dyn Policy> = Arc::new(RuleBasedPolicy::new(env.rule));
    let fresh = |label: &str| {
        Mlp::q_network(2 * OBS_FEATURES_PER_VEHICLE, env.dqn.hidden, MetaAction::COUNT, &mut seed::stream(0, label, &[]))
    };

    // V1 against the rule-based Ego, then E1 against V1.
    let setup = env.training_setup(Role::Npc, &InitialConfig::ALL, budget);
    let mut vs_rule = FixedOpponent(Opponent {
        id: 0,
        policy: rule.clone(),
        is_adversary: false,
    });
    let (v1, _) = run_training(&setup, fresh("v1"), &mut vs_rule, &mut seed::stream(0, "train", &[1])).unwrap();
    let v1 = GreedyQPolicy::new(v1);
    let setup = env.training_setup(Role::Ego, &InitialConfig::ALL, budget);
    let mut vs_v1 = FixedOpponent(Opponent {
        id: 0,
        policy: Arc::new(v1.clone()),
        is_adversary: true,
    });
    let (e1, _) = run_training(&setup, fresh("e1"), &mut vs_v1, &mut seed::stream(0, "train", &[2])).unwrap();
    let e1 = GreedyQPolicy::new(e1);

    let egos = [
        Entrant { name: "E0".into(), policy: rule.as_ref() },
        Entrant { name: "E1".into(), policy: &e1 },
    ];
    let npcs = [
        Entrant { name: "rule".into(), policy: rule.as_ref() },
        Entrant { name: "V1".into(), policy: &v1 },
    ];
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let table = cross_table(&env.highway, &egos, &npcs, 100, &InitialConfig::ALL, 0, jobs).unwrap();
    print!("{}", table.to_csv());
}
