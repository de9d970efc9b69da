use super::{SimError, SimParams, World};

pub const OBS_FEATURES_PER_VEHICLE: usize = 5;

/// Flat feature vector: the observer's own row `[presence, x, y, vx, vy]`
/// in absolute terms, then the other vehicle's row relative to the observer,
/// then an optional adversary flag. Every entry lies in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector(pub Vec<f64>);

impl ObservationVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub(super) fn observe(
    p: &SimParams,
    world: &World,
    agent_index: usize,
    adversary_flag: Option<bool>,
) -> Result<ObservationVector, SimError> {
    let me = world.vehicles.get(agent_index).ok_or(SimError::BadAgent(agent_index))?;
    let mut out = Vec::with_capacity(world.vehicles.len() * OBS_FEATURES_PER_VEHICLE + 1);
    let norm = |v: f64, range: f64| (v / range).clamp(-1.0, 1.0);
    out.extend([
        1.0,
        norm(me.x, p.obs_x_range),
        norm(me.y, p.obs_y_range),
        norm(me.vx(), p.obs_v_range),
        norm(me.vy(), p.obs_v_range),
    ]);
    for (i, other) in world.vehicles.iter().enumerate() {
        if i == agent_index {
            continue;
        }
        out.extend([
            1.0,
            norm(other.x - me.x, p.obs_x_range),
            norm(other.y - me.y, p.obs_y_range),
            norm(other.vx() - me.vx(), p.obs_v_range),
            norm(other.vy() - me.vy(), p.obs_v_range),
        ]);
    }
    if let Some(flag) = adversary_flag {
        out.push(if flag { 1.0 } else { 0.0 });
    }
    Ok(ObservationVector(out))
}
