//! Self-collision counting between the trunk box and the eight leg-link capsules.

use nalgebra::Vector3;

use super::kinematics::link_segments;
use super::model::{RobotModel, NUM_LEGS};
use super::state::SimState;

const UPPER: usize = 0;
const LOWER: usize = 1;

/// Closest distance between segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_distance(p1: &Vector3<f64>, q1: &Vector3<f64>, p2: &Vector3<f64>, q2: &Vector3<f64>) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let eps = 1e-15;
    let (s, t);
    if a <= eps && e <= eps {
        return r.norm();
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

fn point_box_distance(p: &Vector3<f64>, half: &Vector3<f64>) -> f64 {
    let d = Vector3::new((p.x.abs() - half.x).max(0.0), (p.y.abs() - half.y).max(0.0), (p.z.abs() - half.z).max(0.0));
    d.norm()
}

/// Distance from a segment to an origin-centred axis-aligned box (0 when intersecting).
pub fn segment_box_distance(p: &Vector3<f64>, q: &Vector3<f64>, half: &Vector3<f64>) -> f64 {
    // distance to a convex set is convex along the segment: golden-section search
    let f = |t: f64| point_box_distance(&(p + (q - p) * t), half);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
}

/// Number of colliding non-adjacent pairs among {trunk, 8 link capsules}.
///
/// Adjacent pairs (trunk with each upper link, upper with lower link of the
/// same leg) are excluded.
pub fn self_collision_count(model: &RobotModel, state: &SimState) -> u32 {
    let seg = link_segments(model, state);
    let half = Vector3::from(model.trunk_half_extents);
    let r = model.link_radius;
    let mut count = 0;
    for leg in 0..NUM_LEGS {
        let (a, b) = seg[leg][LOWER];
        if segment_box_distance(&a, &b, &half) < r {
            count += 1;
        }
    }
    for la in 0..NUM_LEGS {
        for lb in la + 1..NUM_LEGS {
            for ka in [UPPER, LOWER] {
                for kb in [UPPER, LOWER] {
                    let (p1, q1) = seg[la][ka];
                    let (p2, q2) = seg[lb][kb];
                    if segment_distance(&p1, &q1, &p2, &q2) < 2.0 * r {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}
