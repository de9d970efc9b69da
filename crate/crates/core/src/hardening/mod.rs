//! Alternating falsification/hardening cycles over two model pools.
//!
//! Cycle `c` trains an adversarial NPC `V_c` against the Ego pool, rates it
//! in a tournament, freezes it, then trains an Ego `E_c` against the NPC pool
//! and rates it the same way. `E0` is the rule-based planner.

mod elo;
mod pool;
mod tournament;

pub use elo::{elo_expected, elo_update, paired_update, EloParams};
pub use pool::{
    select_opponent, selection_probabilities, AgentRecord, Method, ModelPool, PoolError, PoolOpponents,
    MANIFEST_FILE,
};
pub use tournament::{run_tournament, MatchRecord, TournamentError, TournamentResult};

use crate::dqn::{run_training, DqnParams, Role, TrainingSetup, TrainingTrace};
use crate::eval::{cross_table, Entrant, MatchupMatrix};
use crate::nn::Mlp;
use crate::planners::RulePlannerParams;
use crate::rewards::{EgoRewardParams, NpcRewardParams};
use crate::seed;
use crate::sim::{Highway, InitialConfig, MetaAction, OBS_FEATURES_PER_VEHICLE};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Simulator, planners, learner and rewards shared by all trainings.
#[derive(Debug, Clone, Default)]
pub struct Environment {
    pub highway: Highway,
    pub rule: RulePlannerParams,
    pub dqn: DqnParams,
    pub npc_reward: NpcRewardParams,
    pub ego_reward: EgoRewardParams,
}

impl Environment {
    pub fn training_setup(&self, role: Role, configs: &[InitialConfig], budget: u64) -> TrainingSetup {
        TrainingSetup {
            role,
            highway: self.highway.clone(),
            configs: configs.to_vec(),
            dqn: self.dqn,
            npc_reward: self.npc_reward,
            ego_reward: self.ego_reward,
            budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleConfig {
    pub n_cycles: u32,
    pub method: Method,
    pub transitions_per_training: u64,
    /// Tournament episodes per opponent and initial configuration.
    pub tournament_episodes_per_pair: usize,
    pub configs: Vec<InitialConfig>,
    pub elo: EloParams,
    /// Episodes per cell of the final crash-rate matrix; 0 skips it.
    pub eval_episodes: usize,
    /// Egos receive the adversary flag as an extra input.
    pub augmented_ego: bool,
    /// Start `V_c` from `V_{c-1}` and `E_c` from `E_{c-1}` instead of fresh networks.
    pub warm_start: bool,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            n_cycles: 3,
            method: Method::Local,
            transitions_per_training: 100_000,
            tournament_episodes_per_pair: 2,
            configs: InitialConfig::ALL.to_vec(),
            elo: EloParams::default(),
            eval_episodes: 100,
            augmented_ego: false,
            warm_start: true,
            seed: 0,
            jobs: 1,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_cycles == 0 {
            return Err("cycles.n_cycles must be >= 1".into());
        }
        if self.configs.is_empty() {
            return Err("cycles.configs must not be empty".into());
        }
        self.elo.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub agent: String,
    pub opponents_pool_size: usize,
    pub episodes: usize,
    pub final_rolling_crash_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentSummary {
    pub agent: String,
    pub final_rating: f64,
    pub crash_rate: f64,
    pub episodes: usize,
}

impl From<&TournamentResult> for TournamentSummary {
    fn from(r: &TournamentResult) -> Self {
        TournamentSummary {
            agent: r.agent.clone(),
            final_rating: r.final_rating,
            crash_rate: r.crash_rate,
            episodes: r.matches.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleEntry {
    pub cycle: u32,
    pub npc_training: TrainingSummary,
    pub npc_tournament: TournamentSummary,
    pub ego_training: Option<TrainingSummary>,
    pub ego_tournament: Option<TournamentSummary>,
}

/// Ratings of every agent after one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloSnapshot {
    pub after: String,
    pub ratings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub method: Method,
    pub n_cycles: u32,
    pub seed: u64,
    pub cycles: Vec<CycleEntry>,
    pub elo_history: Vec<EloSnapshot>,
    /// Rows `E0..E_C`, columns `V1..V_C`.
    pub crash_matrix: Option<MatchupMatrix>,
}

impl CycleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct CycleOutcome {
    pub ego_pool: ModelPool,
    pub npc_pool: ModelPool,
    pub report: CycleReport,
    /// Training trace per trained agent, in training order.
    pub traces: Vec<(String, TrainingTrace)>,
}

#[derive(Debug, thiserror::Error)]
pub enum HardeningError {
    #[error("invalid cycle configuration: {0}")]
    Config(String),
    #[error("cycle {cycle} stopped: {message}")]
    Interrupted {
        cycle: u32,
        message: String,
        partial: Box<CycleReport>,
    },
}

fn snapshot(after: &str, egos: &ModelPool, npcs: &ModelPool) -> EloSnapshot {
    EloSnapshot {
        after: after.to_string(),
        ratings: egos.records.iter().chain(&npcs.records).map(|r| (r.id.clone(), r.elo)).collect(),
    }
}

/// Runs `config.n_cycles` falsification/hardening cycles. With
/// `warm_start`, `V_c` starts from `V_{c-1}` and `E_c` from `E_{c-1}`; `V1`
/// and `E1` always start from fresh networks.
pub fn run_cycles(config: &CycleConfig, env: &Environment) -> Result<CycleOutcome, HardeningError> {
    config.validate().map_err(HardeningError::Config)?;
    let mut egos = ModelPool::with_baseline(config.elo.initial_rating);
    let mut npcs = ModelPool::new(Role::Npc);
    let mut report = CycleReport {
        method: config.method,
        n_cycles: config.n_cycles,
        seed: config.seed,
        cycles: Vec::new(),
        elo_history: vec![snapshot("start", &egos, &npcs)],
        crash_matrix: None,
    };
    let mut traces = Vec::new();
    let mut last_npc: Option<Mlp> = None;
    let mut last_ego: Option<Mlp> = None;
    let ego_inputs = 2 * OBS_FEATURES_PER_VEHICLE + usize::from(config.augmented_ego);

    for c in 1..=config.n_cycles {
        let fail = |message: String, report: &CycleReport| HardeningError::Interrupted {
            cycle: c,
            message,
            partial: Box::new(report.clone()),
        };
        let c64 = u64::from(c);

        // Falsification.
        let id = format!("V{c}");
        let init = last_npc.take().unwrap_or_else(|| {
            let mut rng = seed::stream(config.seed, "init-npc", &[c64]);
            Mlp::q_network(2 * OBS_FEATURES_PER_VEHICLE, env.dqn.hidden, MetaAction::COUNT, &mut rng)
        });
        let (npc_net, trace, pool_size) = {
            let setup = env.training_setup(Role::Npc, &config.configs, config.transitions_per_training);
            let mut provider = PoolOpponents::new(&mut egos, &env.rule, config.method, config.elo, Role::Npc)
                .map_err(|e| fail(e.to_string(), &report))?;
            let mut rng = seed::stream(config.seed, "train-npc", &[c64]);
            let (net, trace) =
                run_training(&setup, init, &mut provider, &mut rng).map_err(|e| fail(e.to_string(), &report))?;
            (net, trace, provider.pool.len())
        };
        report.elo_history.push(snapshot(&format!("train {id}"), &egos, &npcs));
        let npc_training = TrainingSummary {
            agent: id.clone(),
            opponents_pool_size: if config.method == Method::Local { 1 } else { pool_size },
            episodes: trace.len(),
            final_rolling_crash_rate: trace.tail_crash_rate(100),
        };
        traces.push((id.clone(), trace));
        let mut record = AgentRecord::learned(&id, Role::Npc, c, &npc_net, config.elo.initial_rating);
        let policy = crate::policy::GreedyQPolicy::new(npc_net.clone());
        let ego_policies = egos.policies(&env.rule).map_err(|e| fail(e.to_string(), &report))?;
        let npc_tournament = run_tournament(
            &mut record,
            &policy,
            &mut egos,
            &ego_policies,
            config.tournament_episodes_per_pair,
            &config.configs,
            &config.elo,
            &env.highway,
            seed::derive_seed(config.seed, "tournament-npc", &[c64]),
            config.jobs,
        )
        .map_err(|e| fail(e.to_string(), &report))?;
        npcs.push(record).map_err(|e| fail(e.to_string(), &report))?;
        report.elo_history.push(snapshot(&format!("tournament {id}"), &egos, &npcs));
        report.cycles.push(CycleEntry {
            cycle: c,
            npc_training,
            npc_tournament: (&npc_tournament).into(),
            ego_training: None,
            ego_tournament: None,
        });
        if config.warm_start {
            last_npc = Some(npc_net);
        }

        // Hardening.
        let id = format!("E{c}");
        let init = last_ego.take().unwrap_or_else(|| {
            let mut rng = seed::stream(config.seed, "init-ego", &[c64]);
            Mlp::q_network(ego_inputs, env.dqn.hidden, MetaAction::COUNT, &mut rng)
        });
        let (ego_net, trace, pool_size) = {
            let setup = env.training_setup(Role::Ego, &config.configs, config.transitions_per_training);
            let mut provider = PoolOpponents::new(&mut npcs, &env.rule, config.method, config.elo, Role::Ego)
                .map_err(|e| fail(e.to_string(), &report))?;
            let mut rng = seed::stream(config.seed, "train-ego", &[c64]);
            let (net, trace) =
                run_training(&setup, init, &mut provider, &mut rng).map_err(|e| fail(e.to_string(), &report))?;
            (net, trace, provider.pool.len())
        };
        report.elo_history.push(snapshot(&format!("train {id}"), &egos, &npcs));
        let ego_training = TrainingSummary {
            agent: id.clone(),
            opponents_pool_size: if config.method == Method::Local { 1 } else { pool_size },
            episodes: trace.len(),
            final_rolling_crash_rate: trace.tail_crash_rate(100),
        };
        traces.push((id.clone(), trace));
        let mut record = AgentRecord::learned(&id, Role::Ego, c, &ego_net, config.elo.initial_rating);
        let policy = crate::policy::GreedyQPolicy::new(ego_net.clone());
        let npc_policies = npcs.policies(&env.rule).map_err(|e| fail(e.to_string(), &report))?;
        let ego_tournament = run_tournament(
            &mut record,
            &policy,
            &mut npcs,
            &npc_policies,
            config.tournament_episodes_per_pair,
            &config.configs,
            &config.elo,
            &env.highway,
            seed::derive_seed(config.seed, "tournament-ego", &[c64]),
            config.jobs,
        )
        .map_err(|e| fail(e.to_string(), &report))?;
        egos.push(record).map_err(|e| fail(e.to_string(), &report))?;
        report.elo_history.push(snapshot(&format!("tournament {id}"), &egos, &npcs));
        let entry = report.cycles.last_mut().expect("entry pushed above");
        entry.ego_training = Some(ego_training);
        entry.ego_tournament = Some((&ego_tournament).into());
        if config.warm_start {
            last_ego = Some(ego_net);
        }
    }

    if config.eval_episodes > 0 {
        let ego_policies = egos.policies(&env.rule).map_err(|e| HardeningError::Config(e.to_string()))?;
        let npc_policies = npcs.policies(&env.rule).map_err(|e| HardeningError::Config(e.to_string()))?;
        let rows: Vec<Entrant> = egos
            .records
            .iter()
            .zip(&ego_policies)
            .map(|(r, p)| Entrant {
                name: r.id.clone(),
                policy: p.as_ref(),
            })
            .collect();
        let cols: Vec<Entrant> = npcs
            .records
            .iter()
            .zip(&npc_policies)
            .map(|(r, p)| Entrant {
                name: r.id.clone(),
                policy: p.as_ref(),
            })
            .collect();
        let matrix = cross_table(
            &env.highway,
            &rows,
            &cols,
            config.eval_episodes,
            &config.configs,
            seed::derive_seed(config.seed, "matrix", &[]),
            config.jobs,
        )
        .map_err(|e| HardeningError::Interrupted {
            cycle: config.n_cycles,
            message: e.to_string(),
            partial: Box::new(report.clone()),
        })?;
        report.crash_matrix = Some(matrix);
    }

    Ok(CycleOutcome {
        ego_pool: egos,
        npc_pool: npcs,
        report,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_env() -> Environment {
        Environment {
            dqn: DqnParams {
                hidden: 8,
                batch_size: 8,
                warmup: 16,
                buffer_capacity: 256,
                ..DqnParams::default()
            },
            ..Environment::default()
        }
    }

    fn tiny_config(method: Method) -> CycleConfig {
        CycleConfig {
            n_cycles: 2,
            method,
            transitions_per_training: 200,
            tournament_episodes_per_pair: 1,
            eval_episodes: 4,
            seed: 17,
            ..CycleConfig::default()
        }
    }

    #[test]
    fn pools_grow_by_one_per_phase() {
        let out = run_cycles(&tiny_config(Method::Local), &tiny_env()).unwrap();
        let ids: Vec<&str> = out.ego_pool.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["E0", "E1", "E2"]);
        assert_eq!(out.npc_pool.len(), 2);
        assert_eq!(out.report.cycles.len(), 2);
        assert_eq!(out.traces.len(), 4);
        let m = out.report.crash_matrix.as_ref().unwrap();
        assert_eq!((m.rows.len(), m.cols.len()), (3, 2));
        // Tournament of V2 plays E0 and E1 over all 8 configurations.
        assert_eq!(out.report.cycles[1].npc_tournament.episodes, 2 * 8);
        assert_eq!(out.report.elo_history.len(), 1 + 4 * 2);
    }

    #[test]
    fn zero_budget_yields_well_formed_report() {
        let config = CycleConfig {
            n_cycles: 1,
            transitions_per_training: 0,
            ..tiny_config(Method::PrioritizedPool)
        };
        let out = run_cycles(&config, &tiny_env()).unwrap();
        assert_eq!(out.report.cycles.len(), 1);
        assert!(out.traces.iter().all(|(_, t)| t.is_empty()));
        let json: serde_json::Value = serde_json::from_str(&out.report.to_json()).unwrap();
        assert_eq!(json["method"], "prioritized_pool");
    }

    #[test]
    fn same_seed_same_report_and_frozen_weights() {
        let env = tiny_env();
        let cfg = tiny_config(Method::UniformPool);
        let a = run_cycles(&cfg, &env).unwrap();
        let b = run_cycles(&cfg, &env).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.ego_pool, b.ego_pool);
        // V1 as stored after cycle 2 is the network trained in cycle 1.
        let one = run_cycles(&CycleConfig { n_cycles: 1, ..cfg }, &env).unwrap();
        assert_eq!(one.npc_pool.records[0].weights_hash(), a.npc_pool.records[0].weights_hash());
    }
}
