//! Episode loop that trains one agent against opponents drawn from a provider.

use super::{DqnAgent, DqnError, DqnParams, Transition};
use crate::nn::Mlp;
use crate::policy::{ActContext, Policy};
use crate::rewards::{ego_reward, npc_reward, EgoRewardParams, NpcRewardParams, RelativeKinematics};
use crate::sim::{Highway, InitialConfig, Termination, EGO, NPC, OBS_FEATURES_PER_VEHICLE};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Ego,
    Npc,
}

impl Role {
    pub fn vehicle_index(self) -> usize {
        match self {
            Role::Ego => EGO,
            Role::Npc => NPC,
        }
    }

    pub fn other(self) -> Role {
        match self {
            Role::Ego => Role::Npc,
            Role::Npc => Role::Ego,
        }
    }
}

/// A frozen counterpart for one episode.
#[derive(Clone)]
pub struct Opponent {
    /// Provider-specific identifier (pool slot, or 0 for fixed opponents).
    pub id: usize,
    pub policy: Arc<dyn Policy>,
    /// True when this opponent is a trained adversarial NPC.
    pub is_adversary: bool,
}

impl std::fmt::Debug for Opponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Opponent")
            .field("id", &self.id)
            .field("learned", &self.policy.is_learned())
            .field("is_adversary", &self.is_adversary)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub opponent: usize,
    pub config: InitialConfig,
    /// The episode ended in a collision.
    pub crashed: bool,
}

/// Supplies the opponent of each training episode and hears back how it went.
pub trait OpponentProvider {
    fn next_opponent(&mut self, config: InitialConfig, rng: &mut dyn rand::RngCore) -> Opponent;

    fn episode_finished(&mut self, _outcome: &EpisodeOutcome) {}

    /// Live rating of the trainee, if the provider keeps one.
    fn trainee_rating(&self) -> Option<f64> {
        None
    }
}

/// Always the same opponent.
#[derive(Debug, Clone)]
pub struct FixedOpponent(pub Opponent);

impl OpponentProvider for FixedOpponent {
    fn next_opponent(&mut self, _config: InitialConfig, _rng: &mut dyn rand::RngCore) -> Opponent {
        self.0.clone()
    }
}

/// Uniform draw over a fixed list of opponents.
#[derive(Debug, Clone)]
pub struct UniformOpponents(pub Vec<Opponent>);

impl OpponentProvider for UniformOpponents {
    fn next_opponent(&mut self, _config: InitialConfig, rng: &mut dyn rand::RngCore) -> Opponent {
        assert!(!self.0.is_empty(), "no opponents to draw from");
        self.0[rng.gen_range(0..self.0.len())].clone()
    }
}

/// Everything `run_training` needs besides the network, the opponents and the RNG.
#[derive(Debug, Clone)]
pub struct TrainingSetup {
    pub role: Role,
    pub highway: Highway,
    /// Initial configurations sampled uniformly per episode.
    pub configs: Vec<InitialConfig>,
    pub dqn: DqnParams,
    pub npc_reward: NpcRewardParams,
    pub ego_reward: EgoRewardParams,
    /// Number of transitions to collect.
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Transitions collected up to and including this episode.
    pub transitions: u64,
    pub accumulated_reward: f64,
    pub crashed: bool,
    pub rolling_crash_rate_100: f64,
    pub epsilon: f64,
    pub elo: Option<f64>,
    pub config: InitialConfig,
    pub opponent: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainingTrace {
    pub const CSV_HEADER: &'static str =
        "episode,transitions,accumulated_reward,crashed,rolling_crash_rate_100,epsilon,elo_if_any";

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Crash rate over the last `n` complete episodes.
    pub fn tail_crash_rate(&self, n: usize) -> Option<f64> {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        if tail.is_empty() {
            return None;
        }
        Some(tail.iter().filter(|e| e.crashed).count() as f64 / tail.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.episodes {
            let elo = e.elo.map(|r| r.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.episode,
                e.transitions,
                e.accumulated_reward,
                u8::from(e.crashed),
                e.rolling_crash_rate_100,
                e.epsilon,
                elo
            );
        }
        out
    }
}

/// Trains `initial` in the given role. Episodes draw a configuration
/// uniformly, the opponent from `provider`, and stop on collision or
/// timeout; timeouts are stored as non-terminal so the value bootstraps.
/// Collection stops after exactly `budget` transitions; a cut-off episode is
/// not recorded in the trace.
pub fn run_training<R: Rng>(
    setup: &TrainingSetup,
    initial: Mlp,
    provider: &mut dyn OpponentProvider,
    rng: &mut R,
) -> Result<(Mlp, TrainingTrace), DqnError> {
    let mut trace = TrainingTrace::default();
    if setup.budget == 0 {
        return Ok((initial, trace));
    }
    assert!(!setup.configs.is_empty(), "at least one initial configuration is required");
    let hw = &setup.highway;
    let me = setup.role.vehicle_index();
    let them = setup.role.other().vehicle_index();
    let augmented = setup.role == Role::Ego && initial.input_dim() == 2 * OBS_FEATURES_PER_VEHICLE + 1;
    let mut agent = DqnAgent::from_network(initial, setup.dqn);
    let mut recent: VecDeque<bool> = VecDeque::with_capacity(100);
    let mut transitions = 0u64;
    let mut episode = 0u64;

    'episodes: loop {
        let config = setup.configs[rng.gen_range(0..setup.configs.len())];
        let opponent = provider.next_opponent(config, rng);
        let flag = augmented.then_some(opponent.is_adversary);
        let opp_ctx = ActContext {
            npc_is_adversary: setup.role == Role::Npc,
        };
        let mut world = hw.spawn(config, rng);
        let mut obs = hw.observe(&world, me, flag)?.0;
        let mut total = 0.0;
        let mut epsilon;

        let termination = loop {
            epsilon = setup.dqn.epsilon_at(transitions, setup.budget);
            let own = super::select_action(&agent.value, &obs, epsilon, rng)?;
            let other = opponent.policy.act(hw, &world, them, opp_ctx);
            let before = world.clone();
            let (ego_action, npc_action) = match setup.role {
                Role::Ego => (own, other),
                Role::Npc => (other, own),
            };
            let events = hw.step(&mut world, ego_action, npc_action)?;
            let reward = match setup.role {
                Role::Npc => npc_reward(&RelativeKinematics::of_world(&world), events.collision, &setup.npc_reward),
                Role::Ego => ego_reward(&before, own, &world, &hw.params, &setup.ego_reward),
            };
            let status = hw.status(&world);
            let next_obs = hw.observe(&world, me, flag)?.0;
            agent.remember(Transition {
                obs: std::mem::replace(&mut obs, next_obs.clone()),
                action: own.index(),
                reward,
                next_obs,
                done: matches!(status, Some(Termination::Collision | Termination::OffRoad)),
                priority: 1.0,
            });
            total += reward;
            transitions += 1;

            if agent.buffer.len() >= setup.dqn.warmup.max(1) && transitions % setup.dqn.train_interval as u64 == 0 {
                let beta = setup.dqn.beta_at(transitions, setup.budget);
                agent.train_step(beta, rng)?;
            }
            if let Some(t) = status {
                break t;
            }
            if transitions >= setup.budget {
                break 'episodes;
            }
        };

        let crashed = termination == Termination::Collision;
        provider.episode_finished(&EpisodeOutcome {
            opponent: opponent.id,
            config,
            crashed,
        });
        if recent.len() == 100 {
            recent.pop_front();
        }
        recent.push_back(crashed);
        trace.episodes.push(EpisodeRecord {
            episode,
            transitions,
            accumulated_reward: total,
            crashed,
            rolling_crash_rate_100: recent.iter().filter(|&&c| c).count() as f64 / recent.len() as f64,
            epsilon,
            elo: provider.trainee_rating(),
            config,
            opponent: opponent.id,
        });
        episode += 1;
        if transitions >= setup.budget {
            break;
        }
    }
    Ok((agent.value, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::RuleBasedPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(budget: u64) -> TrainingSetup {
        TrainingSetup {
            role: Role::Npc,
            highway: Highway::default(),
            configs: InitialConfig::ALL.to_vec(),
            dqn: DqnParams {
                hidden: 16,
                batch_size: 8,
                warmup: 16,
                buffer_capacity: 256,
                ..DqnParams::default()
            },
            npc_reward: NpcRewardParams::default(),
            ego_reward: EgoRewardParams::default(),
            budget,
        }
    }

    fn rule_ego() -> FixedOpponent {
        FixedOpponent(Opponent {
            id: 0,
            policy: Arc::new(RuleBasedPolicy::default()),
            is_adversary: false,
        })
    }

    #[test]
    fn zero_budget_returns_initial_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::q_network(10, 16, 5, &mut rng);
        let (out, trace) = run_training(&setup(0), net.clone(), &mut rule_ego(), &mut rng).unwrap();
        assert_eq!(out, net);
        assert!(trace.is_empty());
    }

    #[test]
    fn same_seed_same_trace() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let net = Mlp::q_network(10, 16, 5, &mut rng);
            run_training(&setup(300), net, &mut rule_ego(), &mut rng).unwrap()
        };
        let (a_net, a) = run();
        let (b_net, b) = run();
        assert_eq!(a, b);
        assert_eq!(a_net, b_net);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn trace_is_consistent_with_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = Mlp::q_network(10, 16, 5, &mut rng);
        let (_, trace) = run_training(&setup(500), net, &mut rule_ego(), &mut rng).unwrap();
        assert!(!trace.is_empty());
        let mut prev = 0;
        for (i, e) in trace.episodes.iter().enumerate() {
            assert_eq!(e.episode, i as u64);
            assert!(e.transitions > prev && e.transitions <= 500);
            assert!(e.transitions - prev <= 40);
            assert!((0.0..=1.0).contains(&e.rolling_crash_rate_100));
            prev = e.transitions;
        }
        let csv = trace.to_csv();
        assert!(csv.starts_with(TrainingTrace::CSV_HEADER));
        assert_eq!(csv.lines().count(), trace.len() + 1);
    }

    #[test]
    fn ego_role_trains_augmented_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let net = Mlp::q_network(11, 16, 5, &mut rng);
        let s = TrainingSetup {
            role: Role::Ego,
            ..setup(200)
        };
        let mut npc = FixedOpponent(Opponent {
            id: 3,
            policy: Arc::new(RuleBasedPolicy::default()),
            is_adversary: true,
        });
        let (out, trace) = run_training(&s, net.clone(), &mut npc, &mut rng).unwrap();
        assert_eq!(out.input_dim(), 11);
        assert_ne!(out, net);
        assert!(trace.episodes.iter().all(|e| e.opponent == 3 && e.elo.is_none()));
    }
}
