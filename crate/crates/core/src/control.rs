//! Unicycle kinematics and the safe path-following law.
//!
//! The robot chases the reference point `p(s)`. The path parameter advances
//! at a rate bounded by the clearance of a motion prediction set (a region
//! known to contain the closed-loop trajectory toward `p(s)`), so the
//! reference point only moves ahead while the robot can follow it safely.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::costmap::PathPlan;
use crate::distance::DistanceField;
use crate::error::{ExploreError, Result};
use crate::geometry::{wrap_angle, Vec2};
use crate::occupancy::SafeSpaces;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnicycleState {
    pub position: Vec2,
    /// Radians in `[-pi, pi)`.
    pub heading: f64,
    /// Normalized path parameter in `[0, 1]`.
    pub s: f64,
}

impl UnicycleState {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: wrap_angle(heading),
            s: 0.0,
        }
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub k_v: f64,
    pub k_w: f64,
    pub k_safety: f64,
    pub k_s: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub dt: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            k_v: 1.0,
            k_w: 2.0,
            k_safety: 1.0,
            k_s: 1.0,
            v_max: 1.0,
            w_max: 1.0,
            dt: 0.1,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("k_v", self.k_v),
            ("k_w", self.k_w),
            ("k_safety", self.k_safety),
            ("k_s", self.k_s),
            ("v_max", self.v_max),
            ("w_max", self.w_max),
            ("dt", self.dt),
        ];
        for (key, value) in named {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ExploreError::config(key, format!("must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

/// Region guaranteed to contain the closed-loop trajectory toward a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionPrediction {
    /// Convex hull of `apex` and the disc of `radius` around `center`.
    Cone {
        apex: Vec2,
        center: Vec2,
        radius: f64,
    },
    Disc {
        center: Vec2,
        radius: f64,
    },
}

pub fn motion_prediction(state: &UnicycleState, target: Vec2) -> MotionPrediction {
    let d = target - state.position;
    let heading = state.forward();
    if d.dot(heading) >= 0.0 {
        MotionPrediction::Cone {
            apex: state.position,
            center: target,
            radius: d.dot(heading.perp()).abs(),
        }
    } else {
        MotionPrediction::Disc {
            center: target,
            radius: d.norm(),
        }
    }
}

impl MotionPrediction {
    /// Euclidean distance from `q` to the region, zero inside it.
    pub fn distance_to(&self, q: Vec2) -> f64 {
        match *self {
            MotionPrediction::Disc { center, radius } => (q.distance(center) - radius).max(0.0),
            MotionPrediction::Cone { apex, center, radius } => {
                // the hull is the union of discs of radius t*radius centered
                // on the spine apex + t*(center - apex); the gap is convex in t
                let u = center - apex;
                let gap = |t: f64| q.distance(apex + u * t) - t * radius;
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                for _ in 0..200 {
                    let a = lo + (hi - lo) / 3.0;
                    let b = hi - (hi - lo) / 3.0;
                    if gap(a) <= gap(b) {
                        hi = b;
                    } else {
                        lo = a;
                    }
                }
                gap(0.5 * (lo + hi)).min(gap(0.0)).min(gap(1.0)).max(0.0)
            }
        }
    }

    pub fn contains(&self, q: Vec2) -> bool {
        self.distance_to(q) <= 1e-12
    }
}

/// Lower bound on the distance from `p` to the nearest unsafe cell square:
/// the field stores center distances, and a square reaches at most half a
/// diagonal closer than its center.
fn square_clearance(field: &DistanceField, p: Vec2) -> f64 {
    field.distance_at(p) - FRAC_1_SQRT_2 * field.spec().resolution
}

/// Clearance of the prediction set from the exterior of the control space,
/// read from the precomputed distance field.
pub fn dist_to_unsafe(region: &MotionPrediction, spaces: &SafeSpaces) -> f64 {
    let field = &spaces.control_distance;
    match *region {
        MotionPrediction::Disc { center, radius } => (square_clearance(field, center) - radius).max(0.0),
        MotionPrediction::Cone { apex, center, radius } => {
            let spacing = 0.5 * field.spec().resolution;
            let n = (apex.distance(center) / spacing).ceil().max(1.0) as usize;
            let mut best = f64::INFINITY;
            for k in 0..=n {
                let t = k as f64 / n as f64;
                let d = (square_clearance(field, apex.lerp(center, t)) - t * radius).max(0.0);
                best = best.min(d);
                if best == 0.0 {
                    break;
                }
            }
            best
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub v: f64,
    pub w: f64,
    pub s_rate: f64,
    pub dist_to_unsafe: f64,
}

pub fn control_law(
    state: &UnicycleState,
    path: &PathPlan,
    spaces: &SafeSpaces,
    params: &ControlParams,
) -> Result<ControlOutput> {
    if !spaces.in_control(state.position) {
        return Err(ExploreError::SafetyViolation(state.position));
    }
    let goal = path.point_at(state.s);
    let d = goal - state.position;
    let heading = state.forward();
    let fwd = d.dot(heading);
    let lat = d.dot(heading.perp());
    let v = (params.k_v * fwd.max(0.0)).min(params.v_max);
    let w = (params.k_w * lat.atan2(fwd)).clamp(-params.w_max, params.w_max);
    let clearance = dist_to_unsafe(&motion_prediction(state, goal), spaces);
    let s_rate = (params.k_safety * clearance).min(params.k_s * (1.0 - state.s)).max(0.0);
    Ok(ControlOutput {
        v,
        w,
        s_rate,
        dist_to_unsafe: clearance,
    })
}

/// One explicit-Euler tick. The reference point may move at most half the
/// predicted clearance per tick. Returns the new state and the applied
/// controls, with `s_rate` reduced to the rate actually applied.
pub fn step(
    state: &UnicycleState,
    path: &PathPlan,
    spaces: &SafeSpaces,
    params: &ControlParams,
) -> Result<(UnicycleState, ControlOutput)> {
    let mut out = control_law(state, path, spaces, params)?;
    let dt = params.dt;
    let mut ds = out.s_rate * dt;
    let length = path.total_length();
    if length > 0.0 {
        ds = ds.min(0.5 * out.dist_to_unsafe / length);
    }
    let s = (state.s + ds).clamp(0.0, 1.0);
    out.s_rate = (s - state.s) / dt;
    let next = UnicycleState {
        position: state.position + state.forward() * (out.v * dt),
        heading: wrap_angle(state.heading + out.w * dt),
        s,
    };
    if !spaces.in_control(next.position) {
        return Err(ExploreError::SafetyViolation(next.position));
    }
    Ok((next, out))
}
