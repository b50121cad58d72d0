use crate::error::{Error, Result};
use crate::geom::{pure_pursuit_steer, BicycleState, Polyline, Pose2D, Vec2, DEFAULT_WHEELBASE};
use crate::risk::{ego_rollout, Actor, SceneContext};
use crate::traj::{RouteWaypoints, SpeedWaypoints, Trajectory, ROUTE_PITCH};
use serde::{Deserialize, Serialize};

/// Upper bound on the synthesized collision speed, m/s.
pub const DEFAULT_V_MAX: f64 = 30.0;

const TRACK_LOOKAHEAD: f64 = 3.0;
const TRACK_DT: f64 = 0.05;
const TRACK_SPEED: f64 = 5.0;
const TRACK_MAX_STEER: f64 = 0.6;

/// Scales every speed-waypoint displacement by `gamma`, so each implied
/// speed is multiplied by exactly `gamma`. The route is left untouched.
pub fn scale_speed(t: &Trajectory, gamma: f64) -> Result<Trajectory> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("speed scale must be > 0, got {gamma}")));
    }
    if gamma == 1.0 {
        return Ok(t.clone());
    }
    let src = t.speed.points();
    let mut pts = Vec::with_capacity(src.len());
    pts.push(src[0]);
    for w in src.windows(2) {
        let last = *pts.last().unwrap();
        pts.push(last + (w[1] - w[0]) * gamma);
    }
    Ok(Trajectory::new(t.route.clone(), SpeedWaypoints::new(pts, t.speed.dt())?))
}

/// Unit left normals from central differences (one-sided at the ends).
fn left_normals(points: &[Vec2]) -> Vec<Vec2> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (a, b) = (points[i.saturating_sub(1)], points[(i + 1).min(n - 1)]);
            (b - a).normalized().map(Vec2::perp).unwrap_or(Vec2::new(0.0, 1.0))
        })
        .collect()
}

fn check_window(len: usize, k_start: usize, l_trans: usize) -> Result<()> {
    if l_trans < 1 {
        return Err(Error::invalid("transition length must be >= 1"));
    }
    if k_start + l_trans > len {
        return Err(Error::invalid(format!(
            "transition window {k_start}+{l_trans} exceeds route length {len}"
        )));
    }
    Ok(())
}

/// Geometric shift before any tracking: point `i` moves by `alpha_i * W`
/// along its left normal, with `alpha` ramping from 0 at `k_start` to 1 at
/// `k_start + l_trans`.
pub fn shifted_route(route: &[Vec2], w: f64, k_start: usize, l_trans: usize) -> Result<Vec<Vec2>> {
    check_window(route.len(), k_start, l_trans)?;
    let normals = left_normals(route);
    Ok(route
        .iter()
        .zip(&normals)
        .enumerate()
        .map(|(i, (p, n))| {
            let alpha = ((i as f64 - k_start as f64) / l_trans as f64).clamp(0.0, 1.0);
            *p + *n * (alpha * w)
        })
        .collect())
}

/// Drives a pure-pursuit bicycle along `target` from its first point and
/// returns the traced positions.
/// Past the end of `target` the pursuit follows its final tangent, so the
/// trace covers at least `min_length` meters.
fn track(target: &[Vec2], min_length: f64) -> Result<Vec<Vec2>> {
    let path = Polyline::new(target.to_vec())?;
    let heading = path.tangent_at(0.0).angle();
    let mut state = BicycleState::new(Pose2D::new(target[0].x, target[0].y, heading), TRACK_SPEED, DEFAULT_WHEELBASE)?;
    let goal = path.length().max(min_length) + 2.0;
    let mut trace = vec![target[0]];
    let mut travelled = 0.0;
    let max_steps = ((goal * 3.0) / (TRACK_SPEED * TRACK_DT)) as usize + 10;
    for _ in 0..max_steps {
        let steer = pure_pursuit_steer(&state.pose, &path, TRACK_LOOKAHEAD, state.wheelbase, TRACK_MAX_STEER);
        state = state.step(steer, 0.0, TRACK_DT);
        travelled += TRACK_SPEED * TRACK_DT;
        trace.push(state.pose.position());
        if travelled >= goal {
            return Ok(trace);
        }
    }
    Err(Error::Infeasible("lane deviation tracking did not reach the route end".into()))
}

/// Along-track coordinate of `p` on `path`, negative behind the start.
fn along(path: &Polyline, p: Vec2) -> f64 {
    let pr = path.project(p);
    if pr.s <= 0.0 {
        (p - path.points()[0]).dot(path.tangent_at(0.0))
    } else {
        pr.s
    }
}

/// Re-places speed points at their along-track positions on a new route.
fn transfer_speed(speed: &SpeedWaypoints, old: &Polyline, new: &Polyline) -> Result<SpeedWaypoints> {
    let pts = speed.points();
    let mut s = along(old, pts[0]);
    let mut out = Vec::with_capacity(pts.len());
    out.push(new.point_at(s));
    for w in pts.windows(2) {
        s += w[0].distance(w[1]);
        out.push(new.point_at(s));
    }
    SpeedWaypoints::new(out, speed.dt())
}

/// Forced lateral deviation: shifts the route toward an adjacent zone and
/// replaces it with the path a bicycle model traces while tracking it.
pub fn lane_deviation(t: &Trajectory, w: f64, k_start: usize, l_trans: usize) -> Result<Trajectory> {
    let route = t.route.points();
    let target = shifted_route(route, w, k_start, l_trans)?;
    if w == 0.0 {
        return Ok(t.clone());
    }
    let old = t.route.polyline();
    let traced = Polyline::new(track(&target, old.length())?)?;
    let new_pts: Vec<Vec2> = old.cumulative().iter().map(|&s| traced.point_at(s)).collect();
    let new_route = RouteWaypoints::new(new_pts)?;
    let speed = transfer_speed(&t.speed, &old, &new_route.polyline())?;
    Ok(Trajectory::new(new_route, speed))
}

/// Collision speed needed to close `distance - delta_safety` in `dt_crash`.
pub fn collision_speed(distance: f64, delta_safety: f64, dt_crash: f64) -> Result<f64> {
    if !(dt_crash > 0.0) {
        return Err(Error::invalid(format!("time to crash must be > 0, got {dt_crash}")));
    }
    Ok((distance - delta_safety) / dt_crash)
}

/// Parameters of a forced collision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionTarget {
    pub actor_id: u32,
    /// Seconds from now; must fall on the speed-waypoint grid.
    pub t_crash: f64,
    pub delta_safety: f64,
}

const OVERSHOOT: f64 = 3.0;
const REJOIN: f64 = 8.0;

fn grid_index(t_crash: f64, dt: f64, n: usize) -> Result<usize> {
    let k = (t_crash / dt).round();
    if !(t_crash > 0.0) || (k * dt - t_crash).abs() > 1e-6 || k < 1.0 || k as usize > n - 1 {
        return Err(Error::invalid(format!(
            "t_crash {t_crash} s must be a positive multiple of {dt} s within the {} s horizon",
            (n - 1) as f64 * dt
        )));
    }
    Ok(k as usize)
}

/// Redirects the trajectory into `target` so that the ego reaches the
/// actor's position at `t_crash` at constant speed, then rejoins the
/// original route. The result is rolled out and must overlap the target
/// within one grid step of `t_crash`.
pub fn forced_collision(t: &Trajectory, ctx: &SceneContext, target: &CollisionTarget, v_max: f64) -> Result<Trajectory> {
    let actor: &Actor = ctx
        .actor(target.actor_id)
        .ok_or_else(|| Error::invalid(format!("no actor with id {}", target.actor_id)))?;
    let dt = t.speed.dt();
    let n = t.speed.len();
    let k = grid_index(target.t_crash, dt, n)?;
    let p_obj = actor
        .forecast
        .get(k)
        .ok_or_else(|| Error::invalid(format!("actor {} has no pose at step {k}", actor.id)))?
        .position();
    let p_ego = ctx.ego.pose.position();
    let dist = p_ego.distance(p_obj);
    let v_crash = collision_speed(dist, target.delta_safety, target.t_crash)?;
    if v_crash <= 0.0 {
        return Err(Error::Infeasible(format!(
            "target {} already within the safety distance ({dist:.2} m <= {:.2} m)",
            actor.id, target.delta_safety
        )));
    }
    if v_crash > v_max {
        return Err(Error::Infeasible(format!("collision needs {v_crash:.1} m/s, above the {v_max} m/s cap")));
    }
    let u = (p_obj - p_ego).normalized().expect("positive distance");

    let mut original = vec![p_ego];
    original.extend_from_slice(t.route.points());
    let original = Polyline::new(original)?;
    let overshoot_end = p_obj + u * OVERSHOOT;
    let s_ref = along(&original, overshoot_end).max(0.0);
    let mut pts = vec![p_ego, overshoot_end];
    let steps = REJOIN as usize;
    for j in 1..=steps {
        let w = j as f64 / steps as f64;
        let smooth = w * w * (3.0 - 2.0 * w);
        let straight_on = overshoot_end + u * j as f64;
        pts.push(straight_on.lerp(original.point_at(s_ref + j as f64), smooth));
    }
    let tail_len = t.route.len() as f64 * ROUTE_PITCH + 2.0;
    for j in 1..=tail_len.ceil() as usize {
        pts.push(original.point_at(s_ref + REJOIN + j as f64));
    }
    let dense = Polyline::new(pts)?;
    let route = RouteWaypoints::new(dense.resample(ROUTE_PITCH, ROUTE_PITCH, t.route.len()))?;
    let speed = SpeedWaypoints::along(&dense, 0.0, &vec![v_crash; n - 1], dt)?;
    let out = Trajectory::new(route, speed);

    let poses = ego_rollout(&out, ctx)?;
    let hit = (k.saturating_sub(1)..=(k + 1).min(n - 1)).any(|j| {
        match (ctx.ego_extent.obb(poses[j]), actor.obb_at(j)) {
            (Ok(e), Ok(a)) => crate::geom::sat_intersects(&e, &a),
            _ => false,
        }
    });
    if !hit {
        return Err(Error::Infeasible(format!(
            "rollout misses actor {} around t = {:.2} s",
            actor.id, target.t_crash
        )));
    }
    Ok(out)
}

/// Dynamic plausibility measures of a trajectory under the bicycle model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// Largest distance from a rolled-out ego pose to the planned path, meters.
    pub tracking_error: f64,
    /// Largest v^2 * curvature along the route, m/s^2.
    pub lateral_accel: f64,
}

fn menger_curvature(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let area2 = (b - a).cross(c - a).abs();
    let denom = a.distance(b) * b.distance(c) * a.distance(c);
    if denom < 1e-12 {
        0.0
    } else {
        2.0 * area2 / denom
    }
}

pub fn feasibility(t: &Trajectory, ctx: &SceneContext) -> Result<Feasibility> {
    let mut pts = vec![ctx.ego.pose.position()];
    pts.extend_from_slice(t.route.points());
    let path = Polyline::new(pts.clone())?;
    let poses = ego_rollout(t, ctx)?;
    let tracking_error = poses.iter().map(|p| path.project(p.position()).distance).fold(0.0, f64::max);
    let curv: Vec<f64> = (0..pts.len())
        .map(|i| {
            if i == 0 || i + 1 == pts.len() {
                0.0
            } else {
                menger_curvature(pts[i - 1], pts[i], pts[i + 1])
            }
        })
        .collect();
    let cum = path.cumulative();
    let speeds = t.speeds();
    let sp = t.speed.points();
    let mut s = along(&path, sp[0]);
    let mut lateral_accel: f64 = 0.0;
    for (j, v) in speeds.iter().enumerate() {
        let mid = s + 0.5 * sp[j].distance(sp[j + 1]);
        s += sp[j].distance(sp[j + 1]);
        let i = cum.partition_point(|&c| c < mid).min(cum.len() - 1);
        let kappa = curv[i].max(curv[i.saturating_sub(1)]);
        lateral_accel = lateral_accel.max(v * v * kappa);
    }
    Ok(Feasibility { tracking_error, lateral_accel })
}
