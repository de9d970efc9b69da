//! Driving policies that can control either vehicle.

use crate::nn::Mlp;
use crate::planners::{rule_based_action, RulePlannerParams};
use crate::sim::{Highway, MetaAction, World, OBS_FEATURES_PER_VEHICLE};

/// Per-step facts a policy may condition on besides the world itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActContext {
    /// Whether the NPC in this episode is a trained adversary (as opposed to
    /// rule-based traffic). Only augmented networks read it.
    pub npc_is_adversary: bool,
}

pub trait Policy: Send + Sync {
    fn act(&self, hw: &Highway, world: &World, agent: usize, ctx: ActContext) -> MetaAction;

    /// True for trained networks, false for rule-based drivers.
    fn is_learned(&self) -> bool;
}

#[derive(Debug, Clone, Default)]
pub struct RuleBasedPolicy {
    pub params: RulePlannerParams,
}

impl RuleBasedPolicy {
    pub fn new(params: RulePlannerParams) -> Self {
        RuleBasedPolicy { params }
    }
}

impl Policy for RuleBasedPolicy {
    fn act(&self, _hw: &Highway, world: &World, agent: usize, _ctx: ActContext) -> MetaAction {
        rule_based_action(world, agent, &self.params)
    }

    fn is_learned(&self) -> bool {
        false
    }
}

/// Greedy Q-network policy. A network with one extra input beyond the plain
/// observation receives the adversary flag.
#[derive(Debug, Clone)]
pub struct GreedyQPolicy {
    pub net: Mlp,
}

impl GreedyQPolicy {
    pub fn new(net: Mlp) -> Self {
        GreedyQPolicy { net }
    }

    pub fn is_augmented(&self) -> bool {
        self.net.input_dim() == 2 * OBS_FEATURES_PER_VEHICLE + 1
    }

    pub fn q_values(&self, hw: &Highway, world: &World, agent: usize, ctx: ActContext) -> Vec<f64> {
        let flag = self.is_augmented().then_some(ctx.npc_is_adversary);
        let obs = hw.observe(world, agent, flag).expect("agent index in range");
        self.net.forward(obs.as_slice()).expect("observation width matches network")
    }
}

impl Policy for GreedyQPolicy {
    fn act(&self, hw: &Highway, world: &World, agent: usize, ctx: ActContext) -> MetaAction {
        let q = self.q_values(hw, world, agent, ctx);
        MetaAction::from_index(argmax(&q)).expect("network has one output per meta-action")
    }

    fn is_learned(&self) -> bool {
        true
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 5.0, 2.0, 0.0, 3.0]), 1);
        assert_eq!(argmax(&[4.0, 1.0, 4.0, 0.0, 3.0]), 0);
    }
}
