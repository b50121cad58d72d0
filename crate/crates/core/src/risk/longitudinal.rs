use super::{RiskThresholds, SceneContext};
use crate::error::{Error, Result};
use crate::traj::{speed_profile, SpeedWaypoints, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionIntent {
    Accelerating,
    Decelerating,
    Maintaining,
    BrakingToStop,
}

/// Time-weighted mean acceleration; later intervals weigh more.
fn weighted_accel(v: &[f64], dt: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (j, w) in v.windows(2).enumerate() {
        let wt = (j + 1) as f64;
        num += wt * (w[1] - w[0]) / dt;
        den += wt;
    }
    num / den
}

fn intent_from(final_speed: f64, accel: f64, th: &RiskThresholds) -> MotionIntent {
    if final_speed < th.stop_speed && accel < 0.0 {
        MotionIntent::BrakingToStop
    } else if accel > th.intent_accel {
        MotionIntent::Accelerating
    } else if accel < -th.intent_accel {
        MotionIntent::Decelerating
    } else {
        MotionIntent::Maintaining
    }
}

fn check_len(w: &SpeedWaypoints, who: &str) -> Result<()> {
    if w.len() < 4 {
        return Err(Error::invalid(format!("{who} speed profile needs >= 4 waypoints, got {}", w.len())));
    }
    Ok(())
}

pub fn classify_intent(w: &SpeedWaypoints, th: &RiskThresholds) -> Result<MotionIntent> {
    check_len(w, "intent")?;
    let v = speed_profile(w)?;
    Ok(intent_from(*v.last().unwrap(), weighted_accel(&v, w.dt()), th))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalEvidence {
    pub v_curr: f64,
    pub speed_limit: f64,
    pub pred_mean: f64,
    pub expert_mean: f64,
    pub pred_final: f64,
    pub expert_final: f64,
    pub pred_accel: f64,
    pub expert_accel: f64,
    pub pred_intent: MotionIntent,
    pub expert_intent: MotionIntent,
}

fn rel_abs(p: f64, e: f64) -> (f64, f64) {
    let abs = (p - e).abs();
    (abs / e.abs().max(1e-9), abs)
}

impl LongitudinalEvidence {
    pub fn limit_violation(&self, th: &RiskThresholds) -> bool {
        self.v_curr > th.speed_limit_margin * self.speed_limit
    }

    pub fn mean_error(&self) -> (f64, f64) {
        rel_abs(self.pred_mean, self.expert_mean)
    }

    pub fn final_error(&self) -> (f64, f64) {
        rel_abs(self.pred_final, self.expert_final)
    }

    pub fn deviation(&self, th: &RiskThresholds) -> bool {
        [self.mean_error(), self.final_error()]
            .iter()
            .any(|(rel, abs)| *rel > th.tau_rel && *abs > th.tau_abs)
    }

    pub fn intent_mismatch(&self, th: &RiskThresholds) -> bool {
        intent_from(self.pred_final, self.pred_accel, th) != intent_from(self.expert_final, self.expert_accel, th)
    }

    pub fn decide(&self, th: &RiskThresholds) -> bool {
        self.limit_violation(th) || self.deviation(th) || self.intent_mismatch(th)
    }
}

pub fn analyze_longitudinal(
    pred: &Trajectory,
    ctx: &SceneContext,
    th: &RiskThresholds,
) -> Result<(bool, LongitudinalEvidence)> {
    let expert = ctx.expert()?;
    check_len(&pred.speed, "predicted")?;
    check_len(&expert.speed, "expert")?;
    let vp = speed_profile(&pred.speed)?;
    let ve = speed_profile(&expert.speed)?;
    let mean3 = |v: &[f64]| v.iter().take(3).sum::<f64>() / v.len().min(3) as f64;
    let pred_accel = weighted_accel(&vp, pred.speed.dt());
    let expert_accel = weighted_accel(&ve, expert.speed.dt());
    let ev = LongitudinalEvidence {
        v_curr: vp[0],
        speed_limit: ctx.speed_limit,
        pred_mean: mean3(&vp),
        expert_mean: mean3(&ve),
        pred_final: *vp.last().unwrap(),
        expert_final: *ve.last().unwrap(),
        pred_accel,
        expert_accel,
        pred_intent: intent_from(*vp.last().unwrap(), pred_accel, th),
        expert_intent: intent_from(*ve.last().unwrap(), expert_accel, th),
    };
    Ok((ev.decide(th), ev))
}
