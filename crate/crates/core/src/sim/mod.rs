//! Two-lane highway world with kinematic-bicycle vehicles driven by
//! discrete meta-actions.
//!
//! Lane 0 is the left lane and sits at `y = 0`; lane 1 is the right lane at
//! `y = lane_width`. `x` grows in the direction of travel, so an NPC that is
//! behind and to the left of the Ego has negative relative `x` and `y`.

mod geometry;
mod observe;

pub use geometry::{detect_collision, point_in_vehicle, vehicle_corners};
pub use observe::{ObservationVector, OBS_FEATURES_PER_VEHICLE};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

/// Index of the Ego vehicle in [`World::vehicles`].
pub const EGO: usize = 0;
/// Index of the (single) NPC vehicle.
pub const NPC: usize = 1;
pub const LANE_COUNT: usize = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("cannot step a terminal world ({0:?})")]
    Terminal(Termination),
    #[error("agent index {0} out of range")]
    BadAgent(usize),
}

/// Discrete high-level command executed by the low-level controllers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetaAction {
    LaneLeft,
    Idle,
    LaneRight,
    Faster,
    Slower,
}

impl MetaAction {
    pub const ALL: [MetaAction; 5] = [
        MetaAction::LaneLeft,
        MetaAction::Idle,
        MetaAction::LaneRight,
        MetaAction::Faster,
        MetaAction::Slower,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<MetaAction> {
        Self::ALL.get(i).copied()
    }
}

/// Where the NPC starts relative to the Ego.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InitialConfig {
    BL,
    BC,
    BR,
    AL,
    AR,
    FL,
    FC,
    FR,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigLayout {
    pub ego_lane: usize,
    pub npc_lane: usize,
    /// Unit sign of the NPC-minus-Ego longitudinal offset (-1, 0 or +1).
    pub offset_sign: f64,
}

impl InitialConfig {
    pub const ALL: [InitialConfig; 8] = [
        InitialConfig::BL,
        InitialConfig::BC,
        InitialConfig::BR,
        InitialConfig::AL,
        InitialConfig::AR,
        InitialConfig::FL,
        InitialConfig::FC,
        InitialConfig::FR,
    ];

    pub fn layout(self) -> ConfigLayout {
        use InitialConfig::*;
        let (ego_lane, npc_lane, offset_sign) = match self {
            BL => (1, 0, -1.0),
            BC => (1, 1, -1.0),
            BR => (0, 1, -1.0),
            AL => (1, 0, 0.0),
            AR => (0, 1, 0.0),
            FL => (1, 0, 1.0),
            FC => (1, 1, 1.0),
            FR => (0, 1, 1.0),
        };
        ConfigLayout {
            ego_lane,
            npc_lane,
            offset_sign,
        }
    }

    pub fn is_adjacent(self) -> bool {
        matches!(self, InitialConfig::AL | InitialConfig::AR)
    }

    pub fn name(self) -> &'static str {
        use InitialConfig::*;
        match self {
            BL => "BL",
            BC => "BC",
            BR => "BR",
            AL => "AL",
            AR => "AR",
            FL => "FL",
            FC => "FC",
            FR => "FR",
        }
    }
}

impl fmt::Display for InitialConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitialConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InitialConfig::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown initial configuration `{s}`"))
    }
}

/// Geometry, timing, controller gains and spawn distribution of the road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub substeps_per_decision: u32,
    /// Seconds between two meta-action decisions.
    pub decision_period: f64,
    pub max_decision_steps: u32,
    pub lane_width: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Target-speed increment applied by `Faster` / `Slower`.
    pub speed_step: f64,
    pub min_target_speed: f64,
    pub max_target_speed: f64,
    /// Proportional speed gain, `1 / tau_v`.
    pub speed_gain: f64,
    pub lateral_gain: f64,
    pub heading_gain: f64,
    pub max_steering: f64,
    pub spawn_offset: f64,
    pub spawn_jitter: f64,
    pub spawn_speed_min: f64,
    pub spawn_speed_max: f64,
    pub obs_x_range: f64,
    pub obs_y_range: f64,
    pub obs_v_range: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            substeps_per_decision: 15,
            decision_period: 1.0,
            max_decision_steps: 40,
            lane_width: 4.0,
            vehicle_length: 5.0,
            vehicle_width: 2.0,
            speed_step: 5.0,
            min_target_speed: 10.0,
            max_target_speed: 40.0,
            speed_gain: 2.0,
            lateral_gain: 1.0 / 0.6,
            heading_gain: 5.0,
            max_steering: FRAC_PI_4,
            spawn_offset: 25.0,
            spawn_jitter: 5.0,
            spawn_speed_min: 20.0,
            spawn_speed_max: 30.0,
            obs_x_range: 100.0,
            obs_y_range: 12.0,
            obs_v_range: 40.0,
        }
    }
}

impl SimParams {
    pub fn dt(&self) -> f64 {
        self.decision_period / f64::from(self.substeps_per_decision)
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        lane as f64 * self.lane_width
    }

    pub fn nearest_lane(&self, y: f64) -> usize {
        let lane = (y / self.lane_width).round();
        lane.clamp(0.0, (LANE_COUNT - 1) as f64) as usize
    }

    pub fn is_on_road(&self, y: f64) -> bool {
        let half = 0.5 * self.lane_width;
        y >= -half && y <= self.lane_center(LANE_COUNT - 1) + half
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("decision_period", self.decision_period),
            ("lane_width", self.lane_width),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
            ("speed_gain", self.speed_gain),
            ("lateral_gain", self.lateral_gain),
            ("heading_gain", self.heading_gain),
            ("max_steering", self.max_steering),
            ("obs_x_range", self.obs_x_range),
            ("obs_y_range", self.obs_y_range),
            ("obs_v_range", self.obs_v_range),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("sim.{name} must be positive, got {v}"));
            }
        }
        if self.substeps_per_decision == 0 || self.max_decision_steps == 0 {
            return Err("sim.substeps_per_decision and sim.max_decision_steps must be >= 1".into());
        }
        if self.speed_step < 0.0 || self.spawn_jitter < 0.0 || self.spawn_offset < 0.0 {
            return Err("sim.speed_step, spawn_offset and spawn_jitter must be >= 0".into());
        }
        if !(0.0 <= self.min_target_speed && self.min_target_speed <= self.max_target_speed) {
            return Err("sim target speed range must satisfy 0 <= min <= max".into());
        }
        if !(0.0 <= self.spawn_speed_min && self.spawn_speed_min <= self.spawn_speed_max) {
            return Err("sim spawn speed range must satisfy 0 <= min <= max".into());
        }
        Ok(())
    }
}

/// Pose, speed and controller setpoints of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
    pub lane: usize,
    pub target_speed: f64,
    pub target_lane: usize,
    pub length: f64,
    pub width: f64,
}

impl VehicleState {
    pub fn vx(&self) -> f64 {
        self.v * self.psi.cos()
    }

    pub fn vy(&self) -> f64 {
        self.v * self.psi.sin()
    }

    pub fn is_changing_lane(&self) -> bool {
        self.lane != self.target_lane
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    Collision,
    Timeout,
    OffRoad,
}

/// Complete state of one episode. Index 0 is the Ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub vehicles: Vec<VehicleState>,
    pub sim_time: f64,
    pub step_count: u32,
    pub collided: bool,
    pub config: InitialConfig,
}

impl World {
    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[EGO]
    }

    pub fn npc(&self) -> &VehicleState {
        &self.vehicles[NPC]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KinematicsDelta {
    pub dx: f64,
    pub dy: f64,
    pub dpsi: f64,
    pub dv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEvents {
    pub collision: bool,
    pub off_road: bool,
    pub deltas: Vec<KinematicsDelta>,
}

/// Stateless simulator: all episode state lives in [`World`].
#[derive(Debug, Clone, Default)]
pub struct Highway {
    pub params: SimParams,
}

impl Highway {
    pub fn new(params: SimParams) -> Self {
        Highway { params }
    }

    /// Places both vehicles for `config`. Both start at the same speed.
    pub fn spawn<R: Rng + ?Sized>(&self, config: InitialConfig, rng: &mut R) -> World {
        let p = &self.params;
        let layout = config.layout();
        let speed = if p.spawn_speed_max > p.spawn_speed_min {
            rng.gen_range(p.spawn_speed_min..=p.spawn_speed_max)
        } else {
            p.spawn_speed_min
        };
        let jitter = if p.spawn_jitter > 0.0 {
            rng.gen_range(-p.spawn_jitter..=p.spawn_jitter)
        } else {
            0.0
        };
        let offset = layout.offset_sign * p.spawn_offset + jitter;
        let make = |x: f64, lane: usize| VehicleState {
            x,
            y: p.lane_center(lane),
            psi: 0.0,
            v: speed,
            lane,
            target_speed: speed,
            target_lane: lane,
            length: p.vehicle_length,
            width: p.vehicle_width,
        };
        World {
            vehicles: vec![make(0.0, layout.ego_lane), make(offset, layout.npc_lane)],
            sim_time: 0.0,
            step_count: 0,
            collided: false,
            config,
        }
    }

    pub fn status(&self, world: &World) -> Option<Termination> {
        if world.collided {
            Some(Termination::Collision)
        } else if world.step_count >= self.params.max_decision_steps {
            Some(Termination::Timeout)
        } else if world.vehicles.iter().any(|v| !self.params.is_on_road(v.y)) {
            Some(Termination::OffRoad)
        } else {
            None
        }
    }

    /// Applies one meta-action per vehicle and integrates one decision period.
    pub fn step(
        &self,
        world: &mut World,
        ego_action: MetaAction,
        npc_action: MetaAction,
    ) -> Result<StepEvents, SimError> {
        if let Some(t) = self.status(world) {
            return Err(SimError::Terminal(t));
        }
        let p = &self.params;
        let before: Vec<VehicleState> = world.vehicles.clone();
        for (vehicle, action) in world.vehicles.iter_mut().zip([ego_action, npc_action]) {
            apply_meta_action(p, vehicle, action);
        }

        let dt = p.dt();
        let mut collision = false;
        for _ in 0..p.substeps_per_decision {
            for vehicle in world.vehicles.iter_mut() {
                integrate(p, vehicle, dt);
            }
            world.sim_time += dt;
            if detect_collision(&world.vehicles[EGO], &world.vehicles[NPC]) {
                collision = true;
                break;
            }
        }
        world.step_count += 1;
        world.collided |= collision;
        let off_road = world.vehicles.iter().any(|v| !p.is_on_road(v.y));
        let deltas = before
            .iter()
            .zip(&world.vehicles)
            .map(|(a, b)| KinematicsDelta {
                dx: b.x - a.x,
                dy: b.y - a.y,
                dpsi: b.psi - a.psi,
                dv: b.v - a.v,
            })
            .collect();
        Ok(StepEvents {
            collision,
            off_road,
            deltas,
        })
    }

    pub fn observe(
        &self,
        world: &World,
        agent_index: usize,
        adversary_flag: Option<bool>,
    ) -> Result<ObservationVector, SimError> {
        observe::observe(&self.params, world, agent_index, adversary_flag)
    }
}

fn apply_meta_action(p: &SimParams, v: &mut VehicleState, action: MetaAction) {
    match action {
        MetaAction::Faster => {
            v.target_speed = (v.target_speed + p.speed_step).clamp(p.min_target_speed, p.max_target_speed)
        }
        MetaAction::Slower => {
            v.target_speed = (v.target_speed - p.speed_step).clamp(p.min_target_speed, p.max_target_speed)
        }
        MetaAction::LaneLeft => v.target_lane = v.target_lane.saturating_sub(1),
        MetaAction::LaneRight => v.target_lane = (v.target_lane + 1).min(LANE_COUNT - 1),
        MetaAction::Idle => {}
    }
}

/// Front-wheel steering that drives the vehicle onto its target lane center.
pub fn lane_keeping_steering(p: &SimParams, v: &VehicleState) -> f64 {
    let lateral_error = v.y - p.lane_center(v.target_lane);
    let lateral_speed_cmd = -p.lateral_gain * lateral_error;
    let heading_ref = (lateral_speed_cmd / v.v.max(1e-3))
        .clamp(-1.0, 1.0)
        .asin()
        .clamp(-FRAC_PI_4, FRAC_PI_4);
    let heading_rate_cmd = p.heading_gain * wrap_angle(heading_ref - v.psi);
    let rear_axle = 0.5 * v.length;
    let slip = (rear_axle / v.v.max(1e-3) * heading_rate_cmd).clamp(-1.0, 1.0).asin();
    (2.0 * slip.tan()).atan().clamp(-p.max_steering, p.max_steering)
}

/// One explicit-Euler substep of the kinematic bicycle model.
fn integrate(p: &SimParams, v: &mut VehicleState, dt: f64) {
    let accel = p.speed_gain * (v.target_speed - v.v);
    let steering = lane_keeping_steering(p, v);
    let beta = (0.5 * steering.tan()).atan();
    let rear_axle = 0.5 * v.length;
    v.x += v.v * (v.psi + beta).cos() * dt;
    v.y += v.v * (v.psi + beta).sin() * dt;
    v.psi = wrap_angle(v.psi + v.v * beta.sin() / rear_axle * dt);
    v.v = (v.v + accel * dt).max(0.0);
    v.lane = p.nearest_lane(v.y);
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = (a + PI) % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a - PI
}
