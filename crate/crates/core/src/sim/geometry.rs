use super::VehicleState;

/// Corners of the vehicle footprint, counter-clockwise from rear-right.
pub fn vehicle_corners(v: &VehicleState) -> [(f64, f64); 4] {
    let (s, c) = v.psi.sin_cos();
    let hl = 0.5 * v.length;
    let hw = 0.5 * v.width;
    [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)].map(|(lx, ly)| (v.x + lx * c - ly * s, v.y + lx * s + ly * c))
}

/// Whether the world point lies inside (or on the boundary of) the footprint.
pub fn point_in_vehicle(v: &VehicleState, px: f64, py: f64) -> bool {
    let (s, c) = v.psi.sin_cos();
    let dx = px - v.x;
    let dy = py - v.y;
    let lx = dx * c + dy * s;
    let ly = -dx * s + dy * c;
    lx.abs() <= 0.5 * v.length && ly.abs() <= 0.5 * v.width
}

/// Separating-axis test between two oriented rectangles. Touching counts as
/// overlap.
pub fn detect_collision(a: &VehicleState, b: &VehicleState) -> bool {
    // Cheap reject on bounding circles.
    let reach = 0.5 * (a.length.hypot(a.width) + b.length.hypot(b.width));
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    if dx * dx + dy * dy > reach * reach {
        return false;
    }
    let ca = vehicle_corners(a);
    let cb = vehicle_corners(b);
    let axes = [a.psi.sin_cos(), b.psi.sin_cos()]
        .into_iter()
        .flat_map(|(s, c)| [(c, s), (-s, c)]);
    for (ax, ay) in axes {
        let (amin, amax) = project(&ca, ax, ay);
        let (bmin, bmax) = project(&cb, ax, ay);
        if amax < bmin || bmax < amin {
            return false;
        }
    }
    true
}

fn project(corners: &[(f64, f64); 4], ax: f64, ay: f64) -> (f64, f64) {
    corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
        let d = x * ax + y * ay;
        (lo.min(d), hi.max(d))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn car(x: f64, y: f64, psi: f64) -> VehicleState {
        VehicleState {
            x,
            y,
            psi,
            v: 20.0,
            lane: 0,
            target_speed: 20.0,
            target_lane: 0,
            length: 5.0,
            width: 2.0,
        }
    }

    #[test]
    fn identical_poses_collide() {
        let a = car(3.0, 1.0, 0.3);
        assert!(detect_collision(&a, &a));
    }

    #[test]
    fn disjoint_aligned_boxes_do_not_collide() {
        let a = car(0.0, 0.0, 0.0);
        assert!(!detect_collision(&a, &car(5.01, 0.0, 0.0)));
        assert!(!detect_collision(&a, &car(0.0, 2.01, 0.0)));
        assert!(detect_collision(&a, &car(4.99, 1.99, 0.0)));
    }

    #[test]
    fn rotated_corner_case() {
        // A box rotated 45 degrees whose corner reaches into the other box.
        let a = car(0.0, 0.0, 0.0);
        let reach = 0.5 * 5.0f64.hypot(2.0);
        let b = car(2.5 + reach - 0.05, 0.0, (2.0f64).atan2(5.0));
        assert!(detect_collision(&a, &b));
        let c = car(2.5 + reach + 0.05, 0.0, (2.0f64).atan2(5.0));
        assert!(!detect_collision(&a, &c));
    }

    proptest! {
        #[test]
        fn collision_is_symmetric(
            x in -8.0..8.0f64, y in -5.0..5.0f64,
            pa in -3.2..3.2f64, pb in -3.2..3.2f64,
        ) {
            let a = car(0.0, 0.0, pa);
            let b = car(x, y, pb);
            prop_assert_eq!(detect_collision(&a, &b), detect_collision(&b, &a));
        }
    }
}
