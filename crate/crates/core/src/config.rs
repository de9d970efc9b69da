//! TOML run configuration holding every tunable of an experiment.

use crate::dqn::{DqnParams, Role, TrainingSetup};
use crate::hardening::{CycleConfig, EloParams, Environment, Method};
use crate::planners::{IdmParams, MobilParams, RulePlannerParams};
use crate::rewards::{EgoRewardParams, NpcRewardParams};
use crate::sim::{Highway, InitialConfig, SimParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub accel_deadband: f64,
}

impl Default for PlannerSection {
    fn default() -> Self {
        PlannerSection {
            accel_deadband: RulePlannerParams::default().accel_deadband,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub npc: NpcRewardParams,
    pub ego: EgoRewardParams,
}

/// Single-agent training (falsification and standalone Ego training).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub transitions: u64,
    pub configs: Vec<InitialConfig>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            transitions: 200_000,
            configs: InitialConfig::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CyclesSection {
    pub n_cycles: u32,
    pub method: Method,
    pub transitions_per_training: u64,
    pub tournament_episodes_per_pair: usize,
    pub configs: Vec<InitialConfig>,
    pub augmented_ego: bool,
    pub warm_start: bool,
}

impl Default for CyclesSection {
    fn default() -> Self {
        let c = CycleConfig::default();
        CyclesSection {
            n_cycles: c.n_cycles,
            method: c.method,
            transitions_per_training: c.transitions_per_training,
            tournament_episodes_per_pair: c.tournament_episodes_per_pair,
            configs: c.configs,
            augmented_ego: c.augmented_ego,
            warm_start: c.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Episodes per evaluation matchup or matrix cell.
    pub episodes: usize,
    pub configs: Vec<InitialConfig>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            episodes: 100,
            configs: InitialConfig::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub sim: SimParams,
    pub idm: IdmParams,
    pub mobil: MobilParams,
    pub planner: PlannerSection,
    pub reward: RewardSection,
    pub dqn: DqnParams,
    pub elo: EloParams,
    pub train: TrainSection,
    pub cycles: CyclesSection,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let checks = [
            self.sim.validate(),
            self.idm.validate(),
            self.mobil.validate(),
            self.reward.npc.validate(),
            self.reward.ego.validate(),
            self.dqn.validate(),
            self.elo.validate(),
        ];
        for c in checks {
            c.map_err(ConfigError::Invalid)?;
        }
        if !(self.planner.accel_deadband >= 0.0) {
            return Err(ConfigError::Invalid("planner.accel_deadband must be >= 0".into()));
        }
        if self.train.configs.is_empty() || self.cycles.configs.is_empty() || self.eval.configs.is_empty() {
            return Err(ConfigError::Invalid("configuration sets must not be empty".into()));
        }
        if self.cycles.n_cycles == 0 {
            return Err(ConfigError::Invalid("cycles.n_cycles must be >= 1".into()));
        }
        if self.eval.episodes == 0 {
            return Err(ConfigError::Invalid("eval.episodes must be >= 1".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn rule_planner(&self) -> RulePlannerParams {
        RulePlannerParams {
            idm: self.idm,
            mobil: self.mobil,
            accel_deadband: self.planner.accel_deadband,
        }
    }

    pub fn highway(&self) -> Highway {
        Highway::new(self.sim.clone())
    }

    pub fn environment(&self) -> Environment {
        Environment {
            highway: self.highway(),
            rule: self.rule_planner(),
            dqn: self.dqn,
            npc_reward: self.reward.npc,
            ego_reward: self.reward.ego,
        }
    }

    pub fn training_setup(&self, role: Role) -> TrainingSetup {
        self.environment().training_setup(role, &self.train.configs, self.train.transitions)
    }

    pub fn cycle_config(&self, jobs: usize) -> CycleConfig {
        CycleConfig {
            n_cycles: self.cycles.n_cycles,
            method: self.cycles.method,
            transitions_per_training: self.cycles.transitions_per_training,
            tournament_episodes_per_pair: self.cycles.tournament_episodes_per_pair,
            configs: self.cycles.configs.clone(),
            elo: self.elo,
            eval_episodes: self.eval.episodes,
            augmented_ego: self.cycles.augmented_ego,
            warm_start: self.cycles.warm_start,
            seed: self.seed,
            jobs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.dqn.adam.lr, 5e-4);
        assert_eq!(c.reward.npc.w1, 400.0);
    }

    #[test]
    fn round_trip_is_identity() {
        let mut c = RunConfig::default();
        c.seed = 99;
        c.cycles.method = Method::PrioritizedPool;
        c.train.configs = vec![InitialConfig::BL];
        c.reward.ego.nominal_speed_range = [20.0, 20.5];
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml_str("bogus = 1"), Err(ConfigError::Parse(_))));
        assert!(matches!(
            RunConfig::from_toml_str("[dqn]\nlearning_rate = 0.1"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(RunConfig::from_toml_str("[dqn]\ngamma = 1.5"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::from_toml_str("[elo]\nzeta = 0.0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            RunConfig::from_toml_str("[train]\nconfigs = []"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::from_toml_str(
            "seed = 3\n[reward.npc]\nw2 = 0.0\nw3 = 0.0\n[cycles]\nmethod = \"uniform_pool\"\nconfigs = [\"BL\", \"AR\"]\n[dqn.adam]\nlr = 0.001\n",
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.reward.npc, NpcRewardParams::sparse());
        assert_eq!(c.cycles.method, Method::UniformPool);
        assert_eq!(c.cycles.configs, vec![InitialConfig::BL, InitialConfig::AR]);
        assert_eq!(c.dqn.adam.lr, 0.001);
        assert_ne!(c.hash(), RunConfig::default().hash());
    }
}
