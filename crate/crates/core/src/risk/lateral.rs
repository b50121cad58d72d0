use super::{RiskThresholds, SceneContext};
use crate::error::{Error, Result};
use crate::geom::{heading_deviation, signed_cross_track, Pose2D, Vec2};
use crate::traj::Trajectory;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    Straight,
    LeftTurn,
    RightTurn,
    LaneChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "Left",
            Side::Right => "Right",
        }
    }
}

/// Raw shape measurements behind a topology label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyEvidence {
    /// Signed angle from the opening chord to the closing chord, degrees.
    pub heading_change: f64,
    /// Signed offset of the last point from the opening chord line, meters.
    pub lateral_displacement: f64,
}

impl TopologyEvidence {
    pub fn classify(&self, th: &RiskThresholds) -> Topology {
        if self.heading_change > th.turn_angle {
            Topology::LeftTurn
        } else if self.heading_change < -th.turn_angle {
            Topology::RightTurn
        } else if self.lateral_displacement.abs() > th.lane_change_offset {
            Topology::LaneChange
        } else {
            Topology::Straight
        }
    }
}

/// Measures the route shape from its opening and closing quarter chords.
pub fn classify_topology(route: &[Vec2]) -> Result<TopologyEvidence> {
    let n = route.len();
    if n < 2 {
        return Err(Error::invalid("topology needs >= 2 route points"));
    }
    let k = (n / 4).max(1);
    let first = route[k] - route[0];
    let last = route[n - 1] - route[n - 1 - k];
    let dir = first
        .normalized()
        .ok_or_else(|| Error::invalid("route opening chord is degenerate"))?;
    if last.norm() < 1e-12 {
        return Err(Error::invalid("route closing chord is degenerate"));
    }
    Ok(TopologyEvidence {
        heading_change: dir.cross(last).atan2(dir.dot(last)).to_degrees(),
        lateral_displacement: dir.cross(route[n - 1] - route[0]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateralEvidence {
    pub heading_deviation: f64,
    pub max_cte: f64,
    /// Signed cross-track error at the worst point, left positive.
    pub signed_cte: f64,
    pub cte_index: usize,
    pub pred_shape: TopologyEvidence,
    pub expert_shape: TopologyEvidence,
    pub pred_topology: Topology,
    pub expert_topology: Topology,
    /// Side of the expert route the prediction drifts toward.
    pub offset: Option<Side>,
}

impl LateralEvidence {
    pub fn angular(&self, th: &RiskThresholds) -> bool {
        self.heading_deviation > th.tau_theta
    }

    pub fn route_offset(&self, th: &RiskThresholds) -> bool {
        self.max_cte > th.tau_lat
    }

    pub fn topology_mismatch(&self, th: &RiskThresholds) -> bool {
        self.pred_shape.classify(th) != self.expert_shape.classify(th)
    }

    pub fn decide(&self, th: &RiskThresholds) -> bool {
        self.angular(th) || self.route_offset(th) || self.topology_mismatch(th)
    }
}

fn heading_vec(route: &[Vec2], origin: &Pose2D) -> Vec2 {
    let tail = &route[route.len() - 5..];
    tail.iter().fold(Vec2::ZERO, |a, p| a + *p) * 0.2 - origin.position()
}

pub fn analyze_lateral(pred: &Trajectory, ctx: &SceneContext, th: &RiskThresholds) -> Result<(bool, LateralEvidence)> {
    let expert = ctx.expert()?;
    let (p, e) = (pred.route.points(), expert.route.points());
    let origin = ctx.ego.pose;
    let dtheta = heading_deviation(p, e, &origin)?;
    let cte = signed_cross_track(p, e)?;
    let pred_shape = classify_topology(p)?;
    let expert_shape = classify_topology(e)?;
    let offset = if cte.signed > 0.0 {
        Some(Side::Left)
    } else if cte.signed < 0.0 {
        Some(Side::Right)
    } else {
        let c = heading_vec(e, &origin).cross(heading_vec(p, &origin));
        (c != 0.0).then_some(if c > 0.0 { Side::Left } else { Side::Right })
    };
    let ev = LateralEvidence {
        heading_deviation: dtheta,
        max_cte: cte.max_abs,
        signed_cte: cte.signed,
        cte_index: cte.index,
        pred_shape,
        expert_shape,
        pred_topology: pred_shape.classify(th),
        expert_topology: expert_shape.classify(th),
        offset,
    };
    Ok((ev.decide(th), ev))
}
