//! The adversarial reward: sparse collision bonus plus signed-TTC shaping.

use adversarial_traffic::rewards::{npc_reward_terms, signed_ttc, ttc_shaping, NpcRewardParams, RelativeKinematics};

fn main() {
    let p = NpcRewardParams::default();
    println!("shaping term by signed TTC (a = {}, b = {})", p.a, p.b);
    for ttc in [-20.0, -5.0, -1.0, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0] {
        println!("  ttc {ttc:>6.1} s -> {:+.4}", ttc_shaping(ttc, p.a, p.b));
    }

    // NPC 20 m behind the Ego, closing at 5 m/s, one lane to the left.
    let rel = RelativeKinematics {
        dx: 20.0,
        dy: 4.0,
        dvx: 5.0,
        dvy: 0.0,
    };
    println!("longitudinal TTC = {:.1} s", signed_ttc(rel.dx, rel.dvx, p.eps_v));
    for (name, params) in [("shaped", p), ("sparse", NpcRewardParams::sparse())] {
        for collided in [false, true] {
            let t = npc_reward_terms(&rel, collided, &params);
            println!(
                "  {name:<6} collided={collided:<5} total {:>8.3} (lon {:+.3}, lat {:+.3})",
                t.total, t.longitudinal, t.lateral
            );
        }
    }
}
