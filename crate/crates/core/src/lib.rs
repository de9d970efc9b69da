//! Adversarial traffic agents for a two-lane highway: a kinematic simulator,
//! rule-based IDM/MOBIL drivers, Double DQN agents, and pool-based safety
//! hardening with Elo-prioritized opponent sampling.

pub mod commands;
pub mod config;
pub mod dqn;
pub mod eval;
pub mod hardening;
pub mod nn;
pub mod planners;
pub mod policy;
pub mod rewards;
pub mod seed;
pub mod sim;
