//! Greedy round-robin of a new agent against the opposing pool.

use super::elo::{paired_update, EloParams};
use super::pool::{AgentRecord, ModelPool};
use crate::dqn::Role;
use crate::eval::{parallel_map, play_episode};
use crate::policy::Policy;
use crate::seed;
use crate::sim::{Highway, InitialConfig, SimError};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub agent: String,
    pub opponent: String,
    pub config: InitialConfig,
    pub episode: usize,
    /// The NPC side won, i.e. the episode ended in a collision.
    pub npc_won: bool,
    pub agent_rating_after: f64,
    pub opponent_rating_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentResult {
    pub agent: String,
    pub final_rating: f64,
    /// Fraction of tournament episodes that ended in a collision.
    pub crash_rate: f64,
    pub matches: Vec<MatchRecord>,
}

#[derive(Debug, thiserror::Error)]
#[error("tournament of {agent} aborted after {} matches: {source}", partial.len())]
pub struct TournamentError {
    pub agent: String,
    pub source: SimError,
    pub partial: Vec<MatchRecord>,
}

/// Plays `agent` against every record of `opposing` for
/// `episodes_per_config` episodes per configuration. The agent starts at the
/// initial rating; both sides are re-rated per episode with the
/// configuration's gain, in pool order, then configuration order, then
/// episode order. Episodes may run on `jobs` threads; each draws its spawn
/// from `(seed, "tournament", [opponent, config, episode])`.
#[allow(clippy::too_many_arguments)]
pub fn run_tournament(
    agent: &mut AgentRecord,
    agent_policy: &dyn Policy,
    opposing: &mut ModelPool,
    opposing_policies: &[Arc<dyn Policy>],
    episodes_per_config: usize,
    configs: &[InitialConfig],
    elo: &EloParams,
    hw: &Highway,
    seed: u64,
    jobs: usize,
) -> Result<TournamentResult, TournamentError> {
    assert_eq!(opposing.len(), opposing_policies.len(), "one policy per opposing record");
    assert_ne!(agent.role(), opposing.role, "tournament sides must differ in role");
    agent.elo = elo.initial_rating;
    let agent_is_npc = agent.role() == Role::Npc;

    let games: Vec<(usize, usize, usize)> = (0..opposing.len())
        .flat_map(|o| (0..configs.len()).flat_map(move |c| (0..episodes_per_config).map(move |e| (o, c, e))))
        .collect();
    let outcomes = parallel_map(&games, jobs, |&(o, c, e)| {
        let mut rng = seed::stream(seed, "tournament", &[o as u64, c as u64, e as u64]);
        let opp = opposing_policies[o].as_ref();
        let (ego, npc) = if agent_is_npc { (opp, agent_policy) } else { (agent_policy, opp) };
        play_episode(hw, ego, npc, configs[c], &mut rng).map(|log| log.crashed)
    });

    let mut matches = Vec::with_capacity(games.len());
    let mut crashes = 0usize;
    for (&(o, c, e), outcome) in games.iter().zip(outcomes) {
        let npc_won = match outcome {
            Ok(crashed) => crashed,
            Err(source) => {
                return Err(TournamentError {
                    agent: agent.id.clone(),
                    source,
                    partial: matches,
                })
            }
        };
        crashes += usize::from(npc_won);
        let agent_won = npc_won == agent_is_npc;
        let opp = &mut opposing.records[o];
        let (a, b) = paired_update(
            agent.elo,
            opp.elo,
            if agent_won { 1.0 } else { 0.0 },
            elo.k_for(configs[c]),
            elo.zeta,
        );
        agent.elo = a;
        opp.elo = b;
        agent.games_played += 1;
        opp.games_played += 1;
        matches.push(MatchRecord {
            agent: agent.id.clone(),
            opponent: opp.id.clone(),
            config: configs[c],
            episode: e,
            npc_won,
            agent_rating_after: a,
            opponent_rating_after: b,
        });
    }
    Ok(TournamentResult {
        agent: agent.id.clone(),
        final_rating: agent.elo,
        crash_rate: if games.is_empty() { 0.0 } else { crashes as f64 / games.len() as f64 },
        matches,
    })
}
