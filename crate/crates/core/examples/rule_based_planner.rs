//! IDM accelerations and MOBIL lane decisions for a few hand-built scenes.

use adversarial_traffic::planners::{
    idm_acceleration, mobil_decide, rule_based_action, IdmParams, MobilParams, NeighborSet, RulePlannerParams,
};
use adversarial_traffic::seed;
use adversarial_traffic::sim::{Highway, InitialConfig, VehicleState};

fn car(x: f64, v: f64, lane: usize) -> VehicleState {
    VehicleState {
        x,
        y: 2.0 + 4.0 * lane as f64,
        psi: 0.0,
        v,
        lane,
        target_speed: v,
        target_lane: lane,
        length: 5.0,
        width: 2.0,
    }
}

fn main() {
    let idm = IdmParams::default();
    println!("IDM, v0 = {} m/s", idm.v0);
    for (gap, v_lead) in [(200.0, 30.0), (40.0, 25.0), (15.0, 20.0), (8.0, 0.0)] {
        let me = car(0.0, 25.0, 1);
        let lead = car(gap + 5.0, v_lead, 1);
        let out = idm_acceleration(&me, Some(&lead), &idm);
        println!("  gap {gap:>5.1} m, leader {v_lead:>4.1} m/s -> a = {:+.2} m/s^2", out.accel);
    }
    println!("  free road at v0 -> a = {:+.2}", idm_acceleration(&car(0.0, idm.v0, 0), None, &idm).accel);

    // A slow leader ahead in the right lane and an empty left lane.
    let hw = Highway::default();
    let mut world = hw.spawn(InitialConfig::FC, &mut seed::stream(0, "example", &[]));
    world.vehicles[1].v = 5.0;
    world.vehicles[1].x = 20.0;
    let me = world.vehicles[0];
    let neighbors = NeighborSet::from_world(&world, 0);
    println!("MOBIL with a 5 m/s leader 20 m ahead: {:?}", mobil_decide(&me, &neighbors, &idm, &MobilParams::default()));
    println!("  as a meta-action: {:?}", rule_based_action(&world, 0, &RulePlannerParams::default()));
}
