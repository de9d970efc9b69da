//! Rule-based driving: IDM car following plus MOBIL lane changes, emitted as
//! meta-actions.

use crate::sim::{MetaAction, VehicleState, World, LANE_COUNT};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmParams {
    /// Desired speed (m/s).
    pub v0: f64,
    /// Desired time headway (s).
    pub time_headway: f64,
    /// Minimum bumper-to-bumper gap (m).
    pub s0: f64,
    pub a_max: f64,
    /// Comfortable deceleration, positive.
    pub b_comf: f64,
    pub delta: f64,
    /// Emergency deceleration bound, positive.
    pub b_hard: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v0: 30.0,
            time_headway: 1.5,
            s0: 5.0,
            a_max: 3.0,
            b_comf: 5.0,
            delta: 4.0,
            b_hard: 10.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.v0, self.time_headway, self.s0, self.a_max, self.b_comf, self.b_hard];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("idm parameters must be strictly positive".into());
        }
        if !(self.delta >= 1.0) {
            return Err("idm.delta must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilParams {
    pub politeness: f64,
    pub delta_a_threshold: f64,
    /// Largest deceleration a lane change may impose on the new follower.
    pub b_safe: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        MobilParams {
            politeness: 0.3,
            delta_a_threshold: 0.2,
            b_safe: 4.0,
        }
    }
}

impl MobilParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.politeness) {
            return Err("mobil.politeness must lie in [0, 1]".into());
        }
        if !(self.delta_a_threshold >= 0.0) || !(self.b_safe > 0.0) {
            return Err("mobil.delta_a_threshold must be >= 0 and mobil.b_safe > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RulePlannerParams {
    pub idm: IdmParams,
    pub mobil: MobilParams,
    /// Dead-band on IDM acceleration before `Faster`/`Slower` is issued.
    pub accel_deadband: f64,
}

impl Default for RulePlannerParams {
    fn default() -> Self {
        RulePlannerParams {
            idm: IdmParams::default(),
            mobil: MobilParams::default(),
            accel_deadband: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmOutput {
    pub accel: f64,
    /// Set when the gap to the leader was non-positive.
    pub emergency: bool,
}

/// IDM acceleration of `follower` behind `leader`. A non-positive gap returns
/// `-b_hard` with `emergency` set.
pub fn idm_acceleration(follower: &VehicleState, leader: Option<&VehicleState>, p: &IdmParams) -> IdmOutput {
    let v = follower.v;
    let free = p.a_max * (1.0 - (v / p.v0).powf(p.delta));
    let accel = match leader {
        None => free,
        Some(l) => {
            let gap = bumper_gap(follower, l);
            if gap <= 0.0 {
                return IdmOutput {
                    accel: -p.b_hard,
                    emergency: true,
                };
            }
            let dv = v - l.v;
            let s_star = p.s0 + (v * p.time_headway + v * dv / (2.0 * (p.a_max * p.b_comf).sqrt())).max(0.0);
            free - p.a_max * (s_star / gap).powi(2)
        }
    };
    IdmOutput {
        accel: accel.clamp(-p.b_hard, p.a_max),
        emergency: false,
    }
}

/// Bumper-to-bumper distance from `follower` to `leader` along the road.
pub fn bumper_gap(follower: &VehicleState, leader: &VehicleState) -> f64 {
    leader.x - follower.x - 0.5 * (leader.length + follower.length)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneChange {
    Stay,
    ChangeLeft,
    ChangeRight,
}

/// Closest leader and follower of a vehicle in one lane.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LaneNeighbors {
    pub leader: Option<VehicleState>,
    pub follower: Option<VehicleState>,
}

/// Neighbors of a vehicle in its current lane and both adjacent lanes.
/// `None` for a side means that lane does not exist.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeighborSet {
    pub current: LaneNeighbors,
    pub left: Option<LaneNeighbors>,
    pub right: Option<LaneNeighbors>,
}

impl NeighborSet {
    pub fn from_world(world: &World, index: usize) -> NeighborSet {
        let me = &world.vehicles[index];
        let lane_neighbors = |lane: usize| {
            let mut n = LaneNeighbors::default();
            for (i, other) in world.vehicles.iter().enumerate() {
                if i == index || other.lane != lane {
                    continue;
                }
                if other.x >= me.x {
                    if n.leader.map_or(true, |l| other.x < l.x) {
                        n.leader = Some(*other);
                    }
                } else if n.follower.map_or(true, |f| other.x > f.x) {
                    n.follower = Some(*other);
                }
            }
            n
        };
        NeighborSet {
            current: lane_neighbors(me.lane),
            left: (me.lane > 0).then(|| lane_neighbors(me.lane - 1)),
            right: (me.lane + 1 < LANE_COUNT).then(|| lane_neighbors(me.lane + 1)),
        }
    }

    /// Lane-swapped copy of the traffic around the vehicle.
    pub fn mirrored(&self) -> NeighborSet {
        NeighborSet {
            current: self.current,
            left: self.right,
            right: self.left,
        }
    }
}

/// MOBIL incentive of moving into `target`, or `None` if the safety
/// criterion vetoes it.
pub fn mobil_incentive(
    me: &VehicleState,
    current: &LaneNeighbors,
    target: &LaneNeighbors,
    idm: &IdmParams,
    mobil: &MobilParams,
) -> Option<f64> {
    let acc = |f: &VehicleState, l: Option<&VehicleState>| idm_acceleration(f, l, idm).accel;
    // New follower after the change, following us instead of its leader.
    let (new_follower_gain, new_follower_after) = match &target.follower {
        Some(nf) => {
            let after = acc(nf, Some(me));
            let before = acc(nf, target.leader.as_ref());
            (after - before, after)
        }
        None => (0.0, 0.0),
    };
    if new_follower_after < -mobil.b_safe {
        return None;
    }
    let own_gain = acc(me, target.leader.as_ref()) - acc(me, current.leader.as_ref());
    let old_follower_gain = match &current.follower {
        Some(of) => acc(of, current.leader.as_ref()) - acc(of, Some(me)),
        None => 0.0,
    };
    Some(own_gain + mobil.politeness * (new_follower_gain + old_follower_gain))
}

pub fn mobil_decide(me: &VehicleState, neighbors: &NeighborSet, idm: &IdmParams, mobil: &MobilParams) -> LaneChange {
    let candidate = |side: &Option<LaneNeighbors>| {
        side.as_ref()
            .and_then(|t| mobil_incentive(me, &neighbors.current, t, idm, mobil))
            .filter(|&inc| inc > mobil.delta_a_threshold)
    };
    match (candidate(&neighbors.left), candidate(&neighbors.right)) {
        (Some(l), Some(r)) if l > r => LaneChange::ChangeLeft,
        (Some(l), Some(r)) if r > l => LaneChange::ChangeRight,
        (Some(_), Some(_)) => LaneChange::Stay,
        (Some(_), None) => LaneChange::ChangeLeft,
        (None, Some(_)) => LaneChange::ChangeRight,
        (None, None) => LaneChange::Stay,
    }
}

/// IDM + MOBIL for the vehicle at `index`, discretized into a meta-action.
pub fn rule_based_action(world: &World, index: usize, params: &RulePlannerParams) -> MetaAction {
    let me = &world.vehicles[index];
    let neighbors = NeighborSet::from_world(world, index);
    if !me.is_changing_lane() {
        match mobil_decide(me, &neighbors, &params.idm, &params.mobil) {
            LaneChange::ChangeLeft => return MetaAction::LaneLeft,
            LaneChange::ChangeRight => return MetaAction::LaneRight,
            LaneChange::Stay => {}
        }
    }
    let a = idm_acceleration(me, neighbors.current.leader.as_ref(), &params.idm).accel;
    if a > params.accel_deadband {
        MetaAction::Faster
    } else if a < -params.accel_deadband {
        MetaAction::Slower
    } else {
        MetaAction::Idle
    }
}
