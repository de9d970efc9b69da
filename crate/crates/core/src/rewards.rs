//! Adversarial NPC reward (sparse collision term plus signed time-to-collision
//! shaping) and the Ego driving reward.

use crate::sim::{MetaAction, SimParams, VehicleState, World, EGO, NPC};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NpcRewardParams {
    /// Collision weight.
    pub w1: f64,
    /// Longitudinal TTC weight.
    pub w2: f64,
    /// Lateral TTC weight.
    pub w3: f64,
    pub a: f64,
    pub b: f64,
    /// Floor on `|delta_vel|` when forming a TTC.
    pub eps_v: f64,
}

impl Default for NpcRewardParams {
    fn default() -> Self {
        NpcRewardParams {
            w1: 400.0,
            w2: 4.0,
            w3: 1.0,
            a: 4.0,
            b: 1.0,
            eps_v: 0.01,
        }
    }
}

impl NpcRewardParams {
    pub fn sparse() -> Self {
        NpcRewardParams {
            w2: 0.0,
            w3: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.w1 < 0.0 || self.w2 < 0.0 || self.w3 < 0.0 {
            return Err("reward.npc weights must be >= 0".into());
        }
        if !(self.b > 0.0) || !(self.eps_v > 0.0) || !self.a.is_finite() {
            return Err("reward.npc requires b > 0, eps_v > 0 and finite a".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EgoRewardParams {
    /// Added on collision; non-positive.
    pub collision_penalty: f64,
    pub speed_reward_weight: f64,
    /// `[v_lo, v_hi]` in m/s.
    pub nominal_speed_range: [f64; 2],
    /// Zero disables the overspeed penalty.
    pub overspeed_penalty_weight: f64,
    pub lane_keep_weight: f64,
    /// Lateral distance to the lane center that still counts as centered.
    pub lane_center_tolerance: f64,
}

impl Default for EgoRewardParams {
    fn default() -> Self {
        EgoRewardParams {
            collision_penalty: -1.0,
            speed_reward_weight: 0.4,
            nominal_speed_range: [20.0, 30.0],
            overspeed_penalty_weight: 0.0,
            lane_keep_weight: 0.1,
            lane_center_tolerance: 0.5,
        }
    }
}

impl EgoRewardParams {
    pub fn validate(&self) -> Result<(), String> {
        let [lo, hi] = self.nominal_speed_range;
        if self.collision_penalty > 0.0 {
            return Err("reward.ego.collision_penalty must be <= 0".into());
        }
        if self.speed_reward_weight < 0.0 || self.overspeed_penalty_weight < 0.0 || self.lane_keep_weight < 0.0 {
            return Err("reward.ego weights must be >= 0".into());
        }
        if !(lo < hi) {
            return Err("reward.ego.nominal_speed_range must satisfy v_lo < v_hi".into());
        }
        Ok(())
    }
}

/// Ego-minus-NPC positions and NPC-minus-Ego velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeKinematics {
    pub dx: f64,
    pub dy: f64,
    pub dvx: f64,
    pub dvy: f64,
}

impl RelativeKinematics {
    pub fn between(ego: &VehicleState, npc: &VehicleState) -> Self {
        RelativeKinematics {
            dx: ego.x - npc.x,
            dy: ego.y - npc.y,
            dvx: npc.vx() - ego.vx(),
            dvy: npc.vy() - ego.vy(),
        }
    }

    pub fn of_world(world: &World) -> Self {
        Self::between(&world.vehicles[EGO], &world.vehicles[NPC])
    }
}

/// Signed time to collision. With `delta_pos = ego - npc` and
/// `delta_vel = npc - ego`, a closing NPC gives a positive value. The
/// velocity magnitude is floored at `eps_v` keeping its sign (zero counts as
/// positive).
pub fn signed_ttc(delta_pos: f64, delta_vel: f64, eps_v: f64) -> f64 {
    let floored = if delta_vel >= 0.0 {
        delta_vel.max(eps_v)
    } else {
        delta_vel.min(-eps_v)
    };
    delta_pos / floored
}

/// Sigmoid shaping term for one axis: positive while closing, negative while
/// receding, always inside `(-1, 1)`.
///
/// This is `-sign(l) / (1 + exp(a - b l))` evaluated at `l = -ttc`, i.e. on
/// the TTC measured with the opposite orientation where closing is negative.
pub fn ttc_shaping(ttc: f64, a: f64, b: f64) -> f64 {
    let l = -ttc;
    let sign = if l > 0.0 {
        1.0
    } else if l < 0.0 {
        -1.0
    } else {
        0.0
    };
    -sign / (1.0 + (a - b * l).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NpcRewardTerms {
    pub collision: f64,
    pub longitudinal: f64,
    pub lateral: f64,
    pub total: f64,
}

pub fn npc_reward_terms(rel: &RelativeKinematics, collided: bool, p: &NpcRewardParams) -> NpcRewardTerms {
    let collision = if collided { 1.0 } else { 0.0 };
    let longitudinal = if p.w2 != 0.0 {
        ttc_shaping(signed_ttc(rel.dx, rel.dvx, p.eps_v), p.a, p.b)
    } else {
        0.0
    };
    let lateral = if p.w3 != 0.0 {
        ttc_shaping(signed_ttc(rel.dy, rel.dvy, p.eps_v), p.a, p.b)
    } else {
        0.0
    };
    NpcRewardTerms {
        collision,
        longitudinal,
        lateral,
        total: p.w1 * collision + p.w2 * longitudinal + p.w3 * lateral,
    }
}

pub fn npc_reward(rel: &RelativeKinematics, collided: bool, p: &NpcRewardParams) -> f64 {
    npc_reward_terms(rel, collided, p).total
}

/// Ego reward on the post-step state. The non-collision part is clamped to
/// `[-1, 1]` before the collision penalty is added.
pub fn ego_reward(
    _before: &World,
    _action: MetaAction,
    after: &World,
    sim: &SimParams,
    p: &EgoRewardParams,
) -> f64 {
    let ego = after.ego();
    let [lo, hi] = p.nominal_speed_range;
    let span = hi - lo;
    let speed = ((ego.v - lo) / span).clamp(0.0, 1.0);
    let overspeed = ((ego.v - hi) / span).max(0.0);
    let centered = (ego.y - sim.lane_center(ego.lane)).abs() <= p.lane_center_tolerance;
    let shaped = p.speed_reward_weight * speed - p.overspeed_penalty_weight * overspeed
        + if centered { p.lane_keep_weight } else { 0.0 };
    let collision = if after.collided { p.collision_penalty } else { 0.0 };
    collision + shaped.clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Highway, InitialConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ttc_sign_encodes_approach() {
        // NPC 20 m behind the Ego, closing at 4 m/s.
        assert_eq!(signed_ttc(20.0, 4.0, 0.01), 5.0);
        assert_eq!(signed_ttc(20.0, -4.0, 0.01), -5.0);
        assert!((signed_ttc(20.0, 0.0, 0.01) - 2000.0).abs() < 1e-9);
        assert!((signed_ttc(20.0, -0.0, 0.01) - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn collision_dominates_with_tuned_weights() {
        let p = NpcRewardParams::default();
        for rel in [
            RelativeKinematics { dx: 0.0, dy: 0.0, dvx: 0.0, dvy: 0.0 },
            RelativeKinematics { dx: -50.0, dy: 4.0, dvx: 3.0, dvy: -1.0 },
        ] {
            assert!(npc_reward(&rel, true, &p) >= 400.0 - 4.0 - 1.0);
        }
    }

    #[test]
    fn sigmoid_midpoint() {
        let (a, b) = (4.0, 1.0);
        // Receding with |ttc| = a / b sits at the sigmoid midpoint.
        assert!((ttc_shaping(-a / b, a, b) + 0.5).abs() < 1e-15);
        let (a, b) = (2.0, 0.5);
        assert!((ttc_shaping(-a / b, a, b) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn far_stationary_geometry_is_bounded_and_signed() {
        let p = NpcRewardParams::default();
        let closing = RelativeKinematics { dx: 80.0, dy: 0.0, dvx: 0.5, dvy: 0.0 };
        let receding = RelativeKinematics { dx: 80.0, dy: 0.0, dvx: -0.5, dvy: 0.0 };
        let rc = npc_reward_terms(&closing, false, &p);
        let rr = npc_reward_terms(&receding, false, &p);
        assert!(rc.total.abs() < p.w2 + p.w3);
        assert!(rr.total.abs() < p.w2 + p.w3);
        assert!(rc.longitudinal > 0.0);
        assert!(rr.longitudinal < 0.0);
    }

    #[test]
    fn sparse_weights_give_pure_collision_reward() {
        let p = NpcRewardParams::sparse();
        let rel = RelativeKinematics { dx: 3.0, dy: -2.0, dvx: 1.0, dvy: 0.2 };
        assert_eq!(npc_reward(&rel, true, &p), 400.0);
        assert_eq!(npc_reward(&rel, false, &p), 0.0);
    }

    proptest! {
        #[test]
        fn shaping_bounds_and_signs(dx in -200.0..200.0f64, dvx in -40.0..40.0f64, dy in -8.0..8.0f64, dvy in -10.0..10.0f64) {
            let p = NpcRewardParams::default();
            let rel = RelativeKinematics { dx, dy, dvx, dvy };
            let t = npc_reward_terms(&rel, false, &p);
            // Open interval mathematically; saturates to -1 in floating point.
            prop_assert!((-1.0..1.0).contains(&t.longitudinal));
            prop_assert!((-1.0..1.0).contains(&t.lateral));
            prop_assert!(t.total.abs() <= p.w2 + p.w3);
            let ttc = signed_ttc(dx, dvx, p.eps_v);
            // Far-off closing vehicles earn a reward that underflows to zero.
            if ttc > 0.0 { prop_assert!(t.longitudinal >= 0.0); }
            if ttc > 0.0 && ttc < 100.0 { prop_assert!(t.longitudinal > 0.0); }
            if ttc < 0.0 { prop_assert!(t.longitudinal < 0.0); }
        }

        #[test]
        fn closing_reward_grows_as_ttc_shrinks(t1 in 0.01..50.0f64, dt in 0.01..50.0f64) {
            prop_assert!(ttc_shaping(t1, 4.0, 1.0) >= ttc_shaping(t1 + dt, 4.0, 1.0));
        }

        #[test]
        fn receding_penalty_grows_with_ttc_magnitude(t1 in 0.01..50.0f64, dt in 0.01..50.0f64) {
            prop_assert!(ttc_shaping(-t1, 4.0, 1.0) >= ttc_shaping(-(t1 + dt), 4.0, 1.0));
        }
    }

    fn world_with_ego_speed(v: f64, collided: bool) -> World {
        let mut w = Highway::default().spawn(InitialConfig::FC, &mut ChaCha8Rng::seed_from_u64(0));
        w.vehicles[EGO].v = v;
        w.collided = collided;
        w
    }

    #[test]
    fn ego_collision_penalty_dominates() {
        let sim = SimParams::default();
        let p = EgoRewardParams::default();
        let w = world_with_ego_speed(25.0, true);
        let r = ego_reward(&w, MetaAction::Idle, &w, &sim, &p);
        let r_safe = ego_reward(&w, MetaAction::Idle, &world_with_ego_speed(25.0, false), &sim, &p);
        assert!((r - r_safe - p.collision_penalty).abs() < 1e-12);
        assert!(r < 0.0);
    }

    #[test]
    fn speed_term_saturates_at_v_hi() {
        let sim = SimParams::default();
        let p = EgoRewardParams::default();
        let at_hi = world_with_ego_speed(30.0, false);
        let r = ego_reward(&at_hi, MetaAction::Idle, &at_hi, &sim, &p);
        assert!((r - (0.4 + 0.1)).abs() < 1e-12);
        let above = world_with_ego_speed(35.0, false);
        assert_eq!(ego_reward(&above, MetaAction::Idle, &above, &sim, &p), r);
    }

    #[test]
    fn overspeed_cancels_speed_reward_one_span_above() {
        let sim = SimParams::default();
        let p = EgoRewardParams {
            speed_reward_weight: 1.0,
            overspeed_penalty_weight: 1.0,
            lane_keep_weight: 0.0,
            ..EgoRewardParams::default()
        };
        let w = world_with_ego_speed(40.0, false);
        assert!(ego_reward(&w, MetaAction::Idle, &w, &sim, &p).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn overspeed_reward_non_increasing(v in 30.0..60.0f64, dv in 0.0..10.0f64, w in 0.01..2.0f64) {
            let sim = SimParams::default();
            let p = EgoRewardParams { overspeed_penalty_weight: w, ..EgoRewardParams::default() };
            let a = world_with_ego_speed(v, false);
            let b = world_with_ego_speed(v + dv, false);
            prop_assert!(ego_reward(&b, MetaAction::Idle, &b, &sim, &p) <= ego_reward(&a, MetaAction::Idle, &a, &sim, &p) + 1e-12);
        }
    }
}
