use super::{ActorClass, SceneContext};
use crate::error::{Error, Result};
use crate::geom::{pure_pursuit_steer, sat_intersects, Polyline, Pose2D};
use crate::traj::{speed_profile, Trajectory};
use serde::{Deserialize, Serialize};

pub const ROLLOUT_LOOKAHEAD: f64 = 3.0;
pub const ROLLOUT_SUBSTEPS: usize = 5;
const ROLLOUT_MAX_STEER: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvidence {
    pub actor_id: u32,
    pub actor_class: ActorClass,
    /// Index on the speed-waypoint grid of the first overlap.
    pub timestep: usize,
    pub time: f64,
    /// Ego travel distance until the first overlap, meters.
    pub distance: f64,
}

/// Ego poses on the speed-waypoint grid: index 0 is the current pose, and
/// interval `k` covers exactly `v_k * dt` of travel with pure-pursuit steering
/// toward the predicted route.
pub fn ego_rollout(pred: &Trajectory, ctx: &SceneContext) -> Result<Vec<Pose2D>> {
    let speeds = speed_profile(&pred.speed)?;
    let dt = pred.speed.dt();
    let mut pts = Vec::with_capacity(pred.route.len() + 1);
    pts.push(ctx.ego.pose.position());
    pts.extend_from_slice(pred.route.points());
    let path = Polyline::new(pts)?;
    let mut state = ctx.ego;
    let h = dt / ROLLOUT_SUBSTEPS as f64;
    let mut poses = Vec::with_capacity(speeds.len() + 1);
    poses.push(state.pose);
    for v in speeds {
        state.speed = v;
        for _ in 0..ROLLOUT_SUBSTEPS {
            let steer = pure_pursuit_steer(&state.pose, &path, ROLLOUT_LOOKAHEAD, state.wheelbase, ROLLOUT_MAX_STEER);
            state = state.step(steer, 0.0, h);
        }
        poses.push(state.pose);
    }
    Ok(poses)
}

/// First ego/actor box overlap along the rolled-out prediction, if any.
pub fn check_collisions(pred: &Trajectory, ctx: &SceneContext) -> Result<Option<CollisionEvidence>> {
    if ctx.actors.is_empty() {
        return Ok(None);
    }
    if (ctx.forecast_dt - pred.speed.dt()).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "forecast grid {} s does not match speed waypoint grid {} s",
            ctx.forecast_dt,
            pred.speed.dt()
        )));
    }
    let n = pred.speed.len();
    if let Some(a) = ctx.actors.iter().find(|a| a.forecast.len() < n) {
        return Err(Error::invalid(format!(
            "actor {} forecast covers {} steps, prediction needs {n}",
            a.id,
            a.forecast.len()
        )));
    }
    let poses = ego_rollout(pred, ctx)?;
    let mut travelled = 0.0;
    for (k, pose) in poses.iter().enumerate() {
        if k > 0 {
            travelled += pose.position().distance(poses[k - 1].position());
        }
        let ego = ctx.ego_extent.obb(*pose)?;
        for a in &ctx.actors {
            if sat_intersects(&ego, &a.obb_at(k)?) {
                return Ok(Some(CollisionEvidence {
                    actor_id: a.id,
                    actor_class: a.class,
                    timestep: k,
                    time: k as f64 * pred.speed.dt(),
                    distance: travelled,
                }));
            }
        }
    }
    Ok(None)
}
