//! File-producing experiment drivers behind the `advtraffic` binary.
//!
//! Every output is a pure function of the configuration and seed; JSON
//! summaries embed both the seed and the configuration hash.

use crate::config::{ConfigError, RunConfig};
use crate::dqn::{run_training, FixedOpponent, Opponent, Role, TrainingTrace};
use crate::eval::{evaluate_matchup, speed_trace_experiment, EpisodeLog, SpeedTrace};
use crate::hardening::{run_cycles, run_tournament, AgentRecord, ModelPool, PoolError, TournamentResult};
use crate::nn::{Mlp, WeightBlob};
use crate::policy::{GreedyQPolicy, Policy, RuleBasedPolicy};
use crate::seed;
use crate::sim::{MetaAction, OBS_FEATURES_PER_VEHICLE};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Name accepted wherever an agent may be the rule-based planner.
pub const RULE_BASED: &str = "idm_mobil";

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl CommandError {
    /// Process exit code: 3 configuration, 4 I/O, 5 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 3,
            CommandError::Io { .. } => 4,
            CommandError::Runtime(_) => 5,
        }
    }
}

impl From<PoolError> for CommandError {
    fn from(e: PoolError) -> Self {
        match e {
            PoolError::Io(source) => CommandError::Io {
                path: PathBuf::from("<pool>"),
                source,
            },
            other => CommandError::Runtime(other.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CommandError {
    CommandError::Runtime(e.to_string())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CommandError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CommandError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_blob(path: &Path) -> Result<Mlp, CommandError> {
    let bytes = std::fs::read(path).map_err(|source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Mlp::load_weights(&WeightBlob(bytes)).map_err(|e| CommandError::Runtime(format!("{}: {e}", path.display())))
}

/// `idm_mobil` or a path to a weight blob.
pub fn load_policy(spec: &str, cfg: &RunConfig) -> Result<Arc<dyn Policy>, CommandError> {
    if spec == RULE_BASED {
        Ok(Arc::new(RuleBasedPolicy::new(cfg.rule_planner())))
    } else {
        Ok(Arc::new(GreedyQPolicy::new(read_blob(Path::new(spec))?)))
    }
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'static str,
    seed: u64,
    config_hash: String,
}

fn meta<'a>(command: &'a str, cfg: &RunConfig) -> RunMeta<'a> {
    RunMeta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_hash: cfg.hash(),
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a, T: Serialize> {
    run: RunMeta<'a>,
    config: &'a RunConfig,
    result: T,
}

fn write_summary<T: Serialize>(path: &Path, command: &str, cfg: &RunConfig, result: T) -> Result<(), CommandError> {
    let s = Summary {
        run: meta(command, cfg),
        config: cfg,
        result,
    };
    write_file(path, serde_json::to_string_pretty(&s).map_err(runtime)? + "\n")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsifyResult {
    pub opponent: String,
    pub transitions: u64,
    pub episodes: usize,
    pub final_rolling_crash_rate: Option<f64>,
    pub mean_reward_last_100: Option<f64>,
    pub greedy_eval_episodes: usize,
    pub greedy_eval_crash_rate: f64,
}

/// Trains an adversarial NPC against `ego` (`idm_mobil` or an Ego weight
/// blob). Writes `npc.bin`, `trace.csv` and `summary.json` into `out`.
pub fn falsify(cfg: &RunConfig, ego: &str, out: &Path) -> Result<FalsifyResult, CommandError> {
    cfg.validate()?;
    let ego_policy = load_policy(ego, cfg)?;
    let setup = cfg.training_setup(Role::Npc);
    let init = Mlp::q_network(
        2 * OBS_FEATURES_PER_VEHICLE,
        cfg.dqn.hidden,
        MetaAction::COUNT,
        &mut seed::stream(cfg.seed, "init-npc", &[0]),
    );
    let mut provider = FixedOpponent(Opponent {
        id: 0,
        policy: ego_policy.clone(),
        is_adversary: false,
    });
    let (net, trace) = run_training(&setup, init, &mut provider, &mut seed::stream(cfg.seed, "train-npc", &[0]))
        .map_err(runtime)?;
    let npc = GreedyQPolicy::new(net.clone());
    let eval = evaluate_matchup(
        &setup.highway,
        ego_policy.as_ref(),
        &npc,
        cfg.eval.episodes,
        &cfg.train.configs,
        seed::derive_seed(cfg.seed, "eval", &[0]),
    )
    .map_err(runtime)?;
    let tail = &trace.episodes[trace.len().saturating_sub(100)..];
    let result = FalsifyResult {
        opponent: ego.to_string(),
        transitions: setup.budget,
        episodes: trace.len(),
        final_rolling_crash_rate: trace.tail_crash_rate(100),
        mean_reward_last_100: (!tail.is_empty())
            .then(|| tail.iter().map(|e| e.accumulated_reward).sum::<f64>() / tail.len() as f64),
        greedy_eval_episodes: cfg.eval.episodes,
        greedy_eval_crash_rate: eval.crash_rate,
    };
    write_file(&out.join("npc.bin"), net.save_weights().as_bytes())?;
    write_file(&out.join("trace.csv"), trace.to_csv())?;
    write_summary(&out.join("summary.json"), "falsify", cfg, &result)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardenResult {
    pub method: String,
    pub n_cycles: u32,
    pub ego_agents: Vec<String>,
    pub npc_agents: Vec<String>,
}

/// Runs hardening cycles. Writes `pool_ego/`, `pool_npc/`, `report.json`,
/// `crash_matrix_<method>.csv` and `traces/<agent>.csv` into `out`.
pub fn harden(cfg: &RunConfig, jobs: usize, out: &Path) -> Result<HardenResult, CommandError> {
    cfg.validate()?;
    let cycle_config = cfg.cycle_config(jobs);
    let outcome = run_cycles(&cycle_config, &cfg.environment()).map_err(runtime)?;
    let pool_dir = |name: &str| out.join(name);
    outcome.ego_pool.save(&pool_dir("pool_ego")).map_err(|e| io_or_runtime(e, &pool_dir("pool_ego")))?;
    outcome.npc_pool.save(&pool_dir("pool_npc")).map_err(|e| io_or_runtime(e, &pool_dir("pool_npc")))?;
    for (id, trace) in &outcome.traces {
        write_file(&out.join("traces").join(format!("{id}.csv")), trace.to_csv())?;
    }
    if let Some(m) = &outcome.report.crash_matrix {
        write_file(&out.join(format!("crash_matrix_{}.csv", cycle_config.method.name())), m.to_csv())?;
    }
    write_summary(&out.join("report.json"), "harden", cfg, &outcome.report)?;
    Ok(HardenResult {
        method: cycle_config.method.name().to_string(),
        n_cycles: cycle_config.n_cycles,
        ego_agents: outcome.ego_pool.records.iter().map(|r| r.id.clone()).collect(),
        npc_agents: outcome.npc_pool.records.iter().map(|r| r.id.clone()).collect(),
    })
}

fn io_or_runtime(e: PoolError, path: &Path) -> CommandError {
    match e {
        PoolError::Io(source) => CommandError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => runtime(other),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateResult {
    pub ego: String,
    pub npc: String,
    pub episodes: usize,
    pub crash_rate: f64,
}

fn episode_csv(logs: &[EpisodeLog]) -> String {
    let mut out = String::from("episode,config,crashed,termination,steps,mean_ego_speed,mean_npc_speed\n");
    for (i, l) in logs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{:?},{},{},{}",
            l.config,
            u8::from(l.crashed),
            l.termination,
            l.steps,
            l.mean_ego_speed,
            l.mean_npc_speed
        );
    }
    out
}

/// Greedy crash rate of `ego` against `npc` (each `idm_mobil` or a blob
/// path). Writes `evaluation.csv` and `summary.json` into `out`.
pub fn evaluate(cfg: &RunConfig, ego: &str, npc: &str, out: &Path) -> Result<EvaluateResult, CommandError> {
    cfg.validate()?;
    let e = load_policy(ego, cfg)?;
    let n = load_policy(npc, cfg)?;
    let r = evaluate_matchup(
        &cfg.highway(),
        e.as_ref(),
        n.as_ref(),
        cfg.eval.episodes,
        &cfg.eval.configs,
        seed::derive_seed(cfg.seed, "evaluate", &[]),
    )
    .map_err(runtime)?;
    let result = EvaluateResult {
        ego: ego.to_string(),
        npc: npc.to_string(),
        episodes: cfg.eval.episodes,
        crash_rate: r.crash_rate,
    };
    write_file(&out.join("evaluation.csv"), episode_csv(&r.episodes))?;
    write_summary(&out.join("summary.json"), "evaluate", cfg, &result)?;
    Ok(result)
}

fn matches_csv(r: &TournamentResult) -> String {
    let mut out = String::from("agent,opponent,config,episode,npc_won,agent_rating_after,opponent_rating_after\n");
    for m in &r.matches {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.agent,
            m.opponent,
            m.config,
            m.episode,
            u8::from(m.npc_won),
            m.agent_rating_after,
            m.opponent_rating_after
        );
    }
    out
}

/// Rates the agent in `agent_blob` against the pool in `pool_dir` (the agent
/// takes the opposite role), adds it to the pool and rewrites the manifest.
/// Writes `tournament.csv` and `summary.json` into `out`.
pub fn tournament(
    cfg: &RunConfig,
    agent_blob: &Path,
    agent_id: Option<&str>,
    pool_dir: &Path,
    jobs: usize,
    out: &Path,
) -> Result<TournamentResult, CommandError> {
    cfg.validate()?;
    let net = read_blob(agent_blob)?;
    let mut pool = ModelPool::load(pool_dir).map_err(|e| io_or_runtime(e, pool_dir))?;
    let role = match pool.role {
        Role::Ego => Role::Npc,
        Role::Npc => Role::Ego,
    };
    let stem = agent_blob.file_stem().and_then(|s| s.to_str()).unwrap_or("agent");
    let id = agent_id.unwrap_or(stem);
    let cycle = pool.records.iter().map(|r| r.cycle).max().unwrap_or(0) + 1;
    let mut record = AgentRecord::learned(id, role, cycle, &net, cfg.elo.initial_rating);
    let policies = pool.policies(&cfg.rule_planner())?;
    let result = run_tournament(
        &mut record,
        &GreedyQPolicy::new(net),
        &mut pool,
        &policies,
        cfg.cycles.tournament_episodes_per_pair,
        &cfg.cycles.configs,
        &cfg.elo,
        &cfg.highway(),
        seed::derive_seed(cfg.seed, "tournament-cli", &[]),
        jobs,
    )
    .map_err(runtime)?;
    // The opposing pool's ratings changed; the new agent belongs to the other role.
    pool.save(pool_dir).map_err(|e| io_or_runtime(e, pool_dir))?;
    write_file(&out.join("tournament.csv"), matches_csv(&result))?;
    write_summary(
        &out.join("summary.json"),
        "tournament",
        cfg,
        serde_json::json!({
            "agent": record.id,
            "role": role,
            "final_rating": result.final_rating,
            "crash_rate": result.crash_rate,
            "episodes": result.matches.len(),
            "pool_ratings": pool.records.iter().map(|r| (r.id.clone(), r.elo)).collect::<std::collections::BTreeMap<_, _>>(),
        }),
    )?;
    Ok(result)
}

/// Speed and crash curves of `ego` against rule-based traffic and against
/// `adversary`. Writes `speed.csv`, `crash_rate.csv` and `summary.json`.
pub fn speedtrace(cfg: &RunConfig, ego: &str, adversary: &str, out: &Path) -> Result<SpeedTrace, CommandError> {
    cfg.validate()?;
    let e = load_policy(ego, cfg)?;
    let adv = load_policy(adversary, cfg)?;
    let rule = RuleBasedPolicy::new(cfg.rule_planner());
    let trace = speed_trace_experiment(
        &cfg.highway(),
        e.as_ref(),
        &rule,
        adv.as_ref(),
        cfg.eval.episodes,
        &cfg.eval.configs,
        cfg.reward.ego.nominal_speed_range,
        seed::derive_seed(cfg.seed, "speedtrace", &[]),
    )
    .map_err(runtime)?;
    write_file(&out.join("speed.csv"), trace.speed_csv())?;
    write_file(&out.join("crash_rate.csv"), trace.crash_csv())?;
    write_summary(
        &out.join("summary.json"),
        "speedtrace",
        cfg,
        serde_json::json!({
            "ego": ego,
            "adversary": adversary,
            "band": trace.band,
            "rule_based": {
                "crash_rate": trace.rule_based.crash_rate,
                "fraction_in_band": trace.rule_based.fraction_in_band,
                "fraction_above_band": trace.rule_based.fraction_above_band,
            },
            "adversarial": {
                "crash_rate": trace.adversarial.crash_rate,
                "fraction_in_band": trace.adversarial.fraction_in_band,
                "fraction_above_band": trace.adversarial.fraction_above_band,
            },
        }),
    )?;
    Ok(trace)
}

/// Trains an Ego against a uniform mix of `opponents` (each `idm_mobil` or
/// an NPC blob path). With `augmented` the Ego sees the adversary flag.
/// Writes `ego.bin`, `trace.csv` and `summary.json`.
pub fn train_ego(
    cfg: &RunConfig,
    opponents: &[String],
    augmented: bool,
    out: &Path,
) -> Result<TrainingTrace, CommandError> {
    cfg.validate()?;
    if opponents.is_empty() {
        return Err(CommandError::Runtime("at least one opponent is required".into()));
    }
    let pool = opponents
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let policy = load_policy(spec, cfg)?;
            Ok(Opponent {
                id: i,
                is_adversary: policy.is_learned(),
                policy,
            })
        })
        .collect::<Result<Vec<_>, CommandError>>()?;
    let mut provider = crate::dqn::UniformOpponents(pool);
    let inputs = 2 * OBS_FEATURES_PER_VEHICLE + usize::from(augmented);
    let init = Mlp::q_network(inputs, cfg.dqn.hidden, MetaAction::COUNT, &mut seed::stream(cfg.seed, "init-ego", &[0]));
    let (net, trace) = run_training(
        &cfg.training_setup(Role::Ego),
        init,
        &mut provider,
        &mut seed::stream(cfg.seed, "train-ego", &[0]),
    )
    .map_err(runtime)?;
    write_file(&out.join("ego.bin"), net.save_weights().as_bytes())?;
    write_file(&out.join("trace.csv"), trace.to_csv())?;
    write_summary(
        &out.join("summary.json"),
        "train-ego",
        cfg,
        serde_json::json!({
            "opponents": opponents,
            "augmented": augmented,
            "episodes": trace.len(),
            "final_rolling_crash_rate": trace.tail_crash_rate(100),
        }),
    )?;
    Ok(trace)
}
