//! Elo bookkeeping: expected scores, the adjacent-configuration gain, pool
//! selection probabilities, and a tournament of a new NPC against an Ego pool.

use adversarial_traffic::dqn::Role;
use adversarial_traffic::hardening::{
    elo_expected, paired_update, run_tournament, selection_probabilities, AgentRecord, EloParams, Method, ModelPool,
};
use adversarial_traffic::nn::Mlp;
use adversarial_traffic::planners::RulePlannerParams;
use adversarial_traffic::policy::GreedyQPolicy;
use adversarial_traffic::seed;
use adversarial_traffic::sim::{Highway, InitialConfig, MetaAction, OBS_FEATURES_PER_VEHICLE};

fn main() {
    let elo = EloParams::default();
    println!("E(1200 vs 1000) = {:.3}", elo_expected(1200.0, 1000.0, elo.zeta));
    for config in [InitialConfig::BC, InitialConfig::AL] {
        let (npc, ego) = paired_update(1000.0, 1000.0, 1.0, elo.k_for(config), elo.zeta);
        println!("NPC wins in {}: NPC {npc:.0}, Ego {ego:.0}", config.name());
    }

    // An Ego pool: the rule-based baseline plus two (untrained) networks.
    let mut rng = seed::stream(0, "example", &[]);
    let mut egos = ModelPool::with_baseline(elo.initial_rating);
    for (i, rating) in [(1, 1100.0), (2, 950.0)] {
        let net = Mlp::q_network(2 * OBS_FEATURES_PER_VEHICLE, 32, MetaAction::COUNT, &mut rng);
        egos.push(AgentRecord::learned(&format!("E{i}"), Role::Ego, i, &net, rating)).unwrap();
    }
    for method in [Method::UniformPool, Method::PrioritizedPool] {
        let p = selection_probabilities(&egos, method, 1000.0, &elo).unwrap();
        println!("{:<11} selection: {:?}", method.name(), p.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>());
    }

    let net = Mlp::q_network(2 * OBS_FEATURES_PER_VEHICLE, 32, MetaAction::COUNT, &mut rng);
    let mut agent = AgentRecord::learned("V1", Role::Npc, 1, &net, elo.initial_rating);
    let policies = egos.policies(&RulePlannerParams::default()).unwrap();
    let result = run_tournament(
        &mut agent,
        &GreedyQPolicy::new(net),
        &mut egos,
        &policies,
        2,
        &InitialConfig::ALL,
        &elo,
        &Highway::default(),
        7,
        1,
    )
    .unwrap();
    println!(
        "tournament: {} episodes, NPC crash rate {:.2}, final rating {:.1}",
        result.matches.len(),
        result.crash_rate,
        result.final_rating
    );
    for r in &egos.records {
        println!("  {} -> {:.1} ({} games)", r.id, r.elo, r.games_played);
    }

    let dir = std::env::temp_dir().join("advtraffic-elo-pool");
    egos.save(&dir).unwrap();
    let back = ModelPool::load(&dir).unwrap();
    println!("pool saved to {} and reloaded with {} records", dir.display(), back.len());
}
