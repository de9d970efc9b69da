//! Frozen agent records, pools, and opponent selection.

use super::elo::{elo_expected, paired_update, EloParams};
use crate::dqn::{EpisodeOutcome, Opponent, OpponentProvider, Role};
use crate::nn::{Mlp, NnError, WeightBlob};
use crate::planners::RulePlannerParams;
use crate::policy::{GreedyQPolicy, Policy, RuleBasedPolicy};
use crate::sim::InitialConfig;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("pool is empty")]
    Empty,
    #[error("record {id} has role {got:?}, pool holds {expected:?}")]
    RoleMismatch { id: String, expected: Role, got: Role },
    #[error("duplicate agent id {0}")]
    DuplicateId(String),
    #[error("pool i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad pool manifest: {0}")]
    Manifest(String),
    #[error("weights of {id}: {source}")]
    Blob { id: String, source: NnError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Train only against the newest opposing agent.
    Local,
    UniformPool,
    /// Elo-prioritized sampling over the opposing pool.
    PrioritizedPool,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Local => "local",
            Method::UniformPool => "uniform",
            Method::PrioritizedPool => "prioritized",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(Method::Local),
            "uniform" | "uniform_pool" => Ok(Method::UniformPool),
            "prioritized" | "prioritized_pool" | "elo" => Ok(Method::PrioritizedPool),
            other => Err(format!("unknown method {other:?} (expected local, uniform or prioritized)")),
        }
    }
}

/// One frozen agent. The rule-based baseline carries no weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub id: String,
    role: Role,
    pub cycle: u32,
    weights: Option<WeightBlob>,
    pub elo: f64,
    pub games_played: u64,
    pub augmented: bool,
}

impl AgentRecord {
    pub fn rule_based_ego(id: &str, rating: f64) -> Self {
        AgentRecord {
            id: id.to_string(),
            role: Role::Ego,
            cycle: 0,
            weights: None,
            elo: rating,
            games_played: 0,
            augmented: false,
        }
    }

    pub fn learned(id: &str, role: Role, cycle: u32, net: &Mlp, rating: f64) -> Self {
        AgentRecord {
            id: id.to_string(),
            role,
            cycle,
            augmented: role == Role::Ego && net.input_dim() == 2 * crate::sim::OBS_FEATURES_PER_VEHICLE + 1,
            weights: Some(net.save_weights()),
            elo: rating,
            games_played: 0,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn weights(&self) -> Option<&WeightBlob> {
        self.weights.as_ref()
    }

    pub fn is_learned(&self) -> bool {
        self.weights.is_some()
    }

    /// Hex SHA-256 of the weight blob (empty for the rule-based baseline).
    pub fn weights_hash(&self) -> String {
        self.weights.as_ref().map(|w| hex(&Sha256::digest(w.as_bytes()))).unwrap_or_default()
    }

    pub fn network(&self) -> Result<Option<Mlp>, PoolError> {
        self.weights
            .as_ref()
            .map(Mlp::load_weights)
            .transpose()
            .map_err(|source| PoolError::Blob {
                id: self.id.clone(),
                source,
            })
    }

    pub fn policy(&self, rule: &RulePlannerParams) -> Result<Arc<dyn Policy>, PoolError> {
        Ok(match self.network()? {
            Some(net) => Arc::new(GreedyQPolicy::new(net)),
            None => Arc::new(RuleBasedPolicy::new(*rule)),
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPool {
    pub role: Role,
    pub records: Vec<AgentRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: String,
    role: Role,
    cycle: u32,
    elo: f64,
    games_played: u64,
    augmented: bool,
    blob: Option<String>,
    sha256: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    role: Role,
    records: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl ModelPool {
    pub fn new(role: Role) -> Self {
        ModelPool {
            role,
            records: Vec::new(),
        }
    }

    /// Ego pool seeded with the rule-based baseline `E0`.
    pub fn with_baseline(rating: f64) -> Self {
        ModelPool {
            role: Role::Ego,
            records: vec![AgentRecord::rule_based_ego("E0", rating)],
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn newest(&self) -> Option<&AgentRecord> {
        self.records.last()
    }

    pub fn find(&self, id: &str) -> Option<&AgentRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn find_mut(&mut self, id: &str) -> Option<&mut AgentRecord> {
        self.records.iter_mut().find(|r| r.id == id)
    }

    pub fn push(&mut self, record: AgentRecord) -> Result<(), PoolError> {
        if record.role != self.role {
            return Err(PoolError::RoleMismatch {
                id: record.id,
                expected: self.role,
                got: record.role,
            });
        }
        if self.find(&record.id).is_some() {
            return Err(PoolError::DuplicateId(record.id));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn policies(&self, rule: &RulePlannerParams) -> Result<Vec<Arc<dyn Policy>>, PoolError> {
        self.records.iter().map(|r| r.policy(rule)).collect()
    }

    /// Writes `manifest.json` plus one `<id>.bin` per learned record.
    pub fn save(&self, dir: &Path) -> Result<(), PoolError> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.records.len());
        for r in &self.records {
            let blob = match &r.weights {
                Some(w) => {
                    let name = format!("{}.bin", r.id);
                    std::fs::write(dir.join(&name), w.as_bytes())?;
                    Some(name)
                }
                None => None,
            };
            entries.push(ManifestEntry {
                id: r.id.clone(),
                role: r.role,
                cycle: r.cycle,
                elo: r.elo,
                games_played: r.games_played,
                augmented: r.augmented,
                sha256: blob.as_ref().map(|_| r.weights_hash()),
                blob,
            });
        }
        let manifest = Manifest {
            role: self.role,
            records: entries,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| PoolError::Manifest(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_FILE), json + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, PoolError> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| PoolError::Manifest(e.to_string()))?;
        let mut pool = ModelPool::new(manifest.role);
        for e in manifest.records {
            let weights = match &e.blob {
                Some(name) => {
                    let blob = WeightBlob(std::fs::read(dir.join(name))?);
                    Mlp::load_weights(&blob).map_err(|source| PoolError::Blob {
                        id: e.id.clone(),
                        source,
                    })?;
                    Some(blob)
                }
                None => None,
            };
            let record = AgentRecord {
                id: e.id,
                role: e.role,
                cycle: e.cycle,
                weights,
                elo: e.elo,
                games_played: e.games_played,
                augmented: e.augmented,
            };
            if e.sha256.unwrap_or_default() != record.weights_hash() {
                return Err(PoolError::Manifest(format!("hash of {} does not match its blob", record.id)));
            }
            pool.push(record)?;
        }
        Ok(pool)
    }
}

/// Probability of picking each record of `pool` as the next opponent.
pub fn selection_probabilities(
    pool: &ModelPool,
    method: Method,
    trainee_rating: f64,
    params: &EloParams,
) -> Result<Vec<f64>, PoolError> {
    let n = pool.len();
    if n == 0 {
        return Err(PoolError::Empty);
    }
    Ok(match method {
        Method::Local => {
            let mut p = vec![0.0; n];
            p[n - 1] = 1.0;
            p
        }
        Method::UniformPool => vec![1.0 / n as f64; n],
        Method::PrioritizedPool => {
            let w: Vec<f64> = pool
                .records
                .iter()
                .map(|r| elo_expected(r.elo, trainee_rating, params.zeta).powf(params.beta))
                .collect();
            let total: f64 = w.iter().sum();
            w.iter().map(|x| x / total).collect()
        }
    })
}

/// Index of the next opponent in `pool`.
pub fn select_opponent<R: Rng + ?Sized>(
    pool: &ModelPool,
    method: Method,
    trainee_rating: f64,
    params: &EloParams,
    rng: &mut R,
) -> Result<usize, PoolError> {
    if method == Method::Local {
        return pool.len().checked_sub(1).ok_or(PoolError::Empty);
    }
    let probs = selection_probabilities(pool, method, trainee_rating, params)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(probs.len() - 1)
}

/// Serves opponents from a pool during training. With `live_ratings` the
/// trainee and its opponents are re-rated after every episode.
pub struct PoolOpponents<'a> {
    pub pool: &'a mut ModelPool,
    policies: Vec<Arc<dyn Policy>>,
    pub method: Method,
    pub elo: EloParams,
    pub trainee_role: Role,
    pub trainee_rating: f64,
    pub live_ratings: bool,
}

impl<'a> PoolOpponents<'a> {
    pub fn new(
        pool: &'a mut ModelPool,
        rule: &RulePlannerParams,
        method: Method,
        elo: EloParams,
        trainee_role: Role,
    ) -> Result<Self, PoolError> {
        if pool.is_empty() {
            return Err(PoolError::Empty);
        }
        let policies = pool.policies(rule)?;
        Ok(PoolOpponents {
            pool,
            policies,
            method,
            trainee_rating: elo.initial_rating,
            live_ratings: method == Method::PrioritizedPool,
            elo,
            trainee_role,
        })
    }
}

impl OpponentProvider for PoolOpponents<'_> {
    fn next_opponent(&mut self, _config: InitialConfig, rng: &mut dyn rand::RngCore) -> Opponent {
        let i = select_opponent(self.pool, self.method, self.trainee_rating, &self.elo, rng)
            .expect("pool checked non-empty");
        Opponent {
            id: i,
            policy: self.policies[i].clone(),
            is_adversary: self.pool.role == Role::Npc,
        }
    }

    fn episode_finished(&mut self, outcome: &EpisodeOutcome) {
        if !self.live_ratings {
            return;
        }
        let trainee_won = match self.trainee_role {
            Role::Npc => outcome.crashed,
            Role::Ego => !outcome.crashed,
        };
        let opp = &mut self.pool.records[outcome.opponent];
        let (t, o) = paired_update(
            self.trainee_rating,
            opp.elo,
            if trainee_won { 1.0 } else { 0.0 },
            self.elo.k_for(outcome.config),
            self.elo.zeta,
        );
        self.trainee_rating = t;
        opp.elo = o;
        opp.games_played += 1;
    }

    fn trainee_rating(&self) -> Option<f64> {
        self.live_ratings.then_some(self.trainee_rating)
    }
}
