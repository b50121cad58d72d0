//! Critique template: six risk flags, speed and direction suggestions and an
//! evidence log, rendered to (and parsed from) a canonical text block.
//!
//! ```text
//! Risk Analysis:
//! Collision Risk: False
//! Speed Risk: True
//! Direction Risk: False
//! Pedestrian Risk: False
//! Stop Sign Risk: False
//! Traffic Light Risk: False
//! Action Suggestions:
//! Speed: Reduce speed from 7.4 m/s to 3.5 m/s
//! Direction: Maintain direction.
//! Detail:
//! longitudinal.pred_final: 7.412
//! ...
//! ```

use crate::error::{Error, Result};
use crate::risk::{ActorClass, RiskKind, RiskReport, Side};
use crate::traj::Trajectory;
use serde::{Deserialize, Serialize};

/// Bumped whenever any rendered wording changes.
pub const TEMPLATE_VERSION: u32 = 1;

const V_FROM_KEY: &str = "suggestion.speed.v_from";
const V_TO_KEY: &str = "suggestion.speed.v_to";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedKind {
    Reduce,
    Increase,
    Maintain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSuggestion {
    pub kind: SpeedKind,
    pub v_from: f64,
    pub v_to: f64,
}

impl SpeedSuggestion {
    pub fn maintain(v: f64) -> Self {
        SpeedSuggestion { kind: SpeedKind::Maintain, v_from: v, v_to: v }
    }

    pub fn text(&self) -> String {
        match self.kind {
            SpeedKind::Reduce => format!("Reduce speed from {:.1} m/s to {:.1} m/s", self.v_from, self.v_to),
            SpeedKind::Increase => format!("Increase speed from {:.1} m/s to {:.1} m/s", self.v_from, self.v_to),
            SpeedKind::Maintain => format!("Maintain speed at {:.1} m/s", self.v_from),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    AdjustLeft,
    AdjustRight,
    Maintain,
    YieldOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionSuggestion {
    pub kind: DirectionKind,
    pub target_class: Option<ActorClass>,
}

impl DirectionSuggestion {
    pub const MAINTAIN: DirectionSuggestion = DirectionSuggestion { kind: DirectionKind::Maintain, target_class: None };

    pub fn text(&self) -> String {
        match self.kind {
            DirectionKind::AdjustLeft => "Adjust direction to the Left".into(),
            DirectionKind::AdjustRight => "Adjust direction to the Right".into(),
            DirectionKind::Maintain => "Maintain direction.".into(),
            DirectionKind::YieldOverride => format!(
                "Collision risk with {}, proceed with caution and yield",
                self.target_class.map(ActorClass::name).unwrap_or("actor")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critique {
    /// Flags in canonical order: Collision, Speed, Direction, Pedestrian,
    /// Stop Sign, Traffic Light.
    pub flags: [bool; 6],
    pub speed: SpeedSuggestion,
    pub direction: DirectionSuggestion,
    /// Evidence log as ordered key/value pairs.
    pub detail: Vec<(String, String)>,
}

impl Critique {
    pub fn flag(&self, kind: RiskKind) -> bool {
        self.flags[RiskKind::ALL.iter().position(|k| *k == kind).unwrap()]
    }

    pub fn any(&self) -> bool {
        self.flags.iter().any(|f| *f)
    }
}

/// Speed command from the final-frame speeds when the speed flag is raised.
pub fn suggest_speed(report: &RiskReport, pred: &Trajectory, expert: &Trajectory) -> SpeedSuggestion {
    let v_pred = pred.final_speed();
    if !report.speed {
        return SpeedSuggestion::maintain(v_pred);
    }
    let v_gt = expert.final_speed();
    let kind = if v_pred > v_gt {
        SpeedKind::Reduce
    } else if v_pred < v_gt {
        SpeedKind::Increase
    } else {
        return SpeedSuggestion::maintain(v_pred);
    };
    SpeedSuggestion { kind, v_from: v_pred, v_to: v_gt }
}

/// Lateral command; a collision overrides any directional advice.
pub fn suggest_direction(report: &RiskReport) -> Result<DirectionSuggestion> {
    if report.collision {
        let ev = report
            .collision_evidence
            .ok_or_else(|| Error::InconsistentReport("collision flag set without actor evidence".into()))?;
        return Ok(DirectionSuggestion { kind: DirectionKind::YieldOverride, target_class: Some(ev.actor_class) });
    }
    if report.direction {
        if let Some(side) = report.lateral.offset {
            let kind = match side.opposite() {
                Side::Left => DirectionKind::AdjustLeft,
                Side::Right => DirectionKind::AdjustRight,
            };
            return Ok(DirectionSuggestion { kind, target_class: None });
        }
    }
    Ok(DirectionSuggestion::MAINTAIN)
}

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

/// Flattens the report evidence into the detail log.
pub fn evidence_log(report: &RiskReport) -> Vec<(String, String)> {
    let mut d: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| d.push((k.to_string(), v));
    let lat = &report.lateral;
    put("lateral.heading_deviation_deg", f3(lat.heading_deviation));
    put("lateral.max_cte_m", f3(lat.max_cte));
    put("lateral.signed_cte_m", f3(lat.signed_cte));
    put("lateral.topology.pred", format!("{:?}", lat.pred_topology));
    put("lateral.topology.expert", format!("{:?}", lat.expert_topology));
    put("lateral.offset", lat.offset.map(Side::name).unwrap_or("none").to_string());
    let lon = &report.longitudinal;
    put("longitudinal.v_curr", f3(lon.v_curr));
    put("longitudinal.speed_limit", f3(lon.speed_limit));
    put("longitudinal.pred_mean", f3(lon.pred_mean));
    put("longitudinal.expert_mean", f3(lon.expert_mean));
    put("longitudinal.pred_final", f3(lon.pred_final));
    put("longitudinal.expert_final", f3(lon.expert_final));
    put("longitudinal.intent.pred", format!("{:?}", lon.pred_intent));
    put("longitudinal.intent.expert", format!("{:?}", lon.expert_intent));
    if let Some(c) = &report.collision_evidence {
        put("collision.actor_id", c.actor_id.to_string());
        put("collision.actor_class", c.actor_class.name().to_string());
        put("collision.timestep", c.timestep.to_string());
        put("collision.time_s", f3(c.time));
        put("collision.distance_m", f3(c.distance));
    }
    let ctx = &report.context;
    if let Some((id, dist)) = ctx.nearest_pedestrian {
        put("context.nearest_pedestrian", format!("{id} at {dist:.3} m"));
    }
    put("context.dynamic_actors", ctx.dynamic_actors.to_string());
    put("context.complex", ctx.complex.to_string());
    put("context.visibility", format!("{:?}", ctx.visibility).to_lowercase());
    put("context.wetness", f3(ctx.wetness));
    put("context.adverse", ctx.adverse.to_string());
    if let Some((zone, point)) = ctx.forbidden_entry {
        put("context.forbidden_entry", format!("zone {zone} at route point {point}"));
    }
    d
}

/// Builds the full critique for a prediction judged against its expert.
pub fn critique(report: &RiskReport, pred: &Trajectory, expert: &Trajectory) -> Result<Critique> {
    Ok(Critique {
        flags: report.flags(),
        speed: suggest_speed(report, pred, expert),
        direction: suggest_direction(report)?,
        detail: evidence_log(report),
    })
}

fn tf(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

/// Canonical text block. Identical critiques render to identical bytes.
pub fn render(c: &Critique) -> String {
    let mut s = String::from("Risk Analysis:\n");
    for (kind, flag) in RiskKind::ALL.iter().zip(c.flags) {
        s.push_str(&format!("{} Risk: {}\n", kind.label(), tf(flag)));
    }
    s.push_str("Action Suggestions:\n");
    s.push_str(&format!("Speed: {}\n", c.speed.text()));
    s.push_str(&format!("Direction: {}\n", c.direction.text()));
    s.push_str("Detail:\n");
    for (k, v) in &c.detail {
        s.push_str(&format!("{k}: {v}\n"));
    }
    s.push_str(&format!("{V_FROM_KEY}: {}\n{V_TO_KEY}: {}\n", c.speed.v_from, c.speed.v_to));
    s
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { context: format!("critique line {line}"), message: message.into() }
}

fn parse_speed(text: &str, line: usize) -> Result<SpeedSuggestion> {
    let num = |s: &str| s.trim().trim_end_matches(" m/s").parse::<f64>().map_err(|e| perr(line, format!("{e}: {s:?}")));
    let pair = |rest: &str| -> Result<(f64, f64)> {
        let (a, b) = rest.split_once(" to ").ok_or_else(|| perr(line, "expected 'from X m/s to Y m/s'"))?;
        Ok((num(a)?, num(b)?))
    };
    if let Some(rest) = text.strip_prefix("Reduce speed from ") {
        let (v_from, v_to) = pair(rest)?;
        Ok(SpeedSuggestion { kind: SpeedKind::Reduce, v_from, v_to })
    } else if let Some(rest) = text.strip_prefix("Increase speed from ") {
        let (v_from, v_to) = pair(rest)?;
        Ok(SpeedSuggestion { kind: SpeedKind::Increase, v_from, v_to })
    } else if let Some(rest) = text.strip_prefix("Maintain speed at ") {
        Ok(SpeedSuggestion::maintain(num(rest)?))
    } else {
        Err(perr(line, format!("unrecognized speed suggestion {text:?}")))
    }
}

fn parse_direction(text: &str, line: usize) -> Result<DirectionSuggestion> {
    let plain = |kind| Ok(DirectionSuggestion { kind, target_class: None });
    match text {
        "Adjust direction to the Left" => plain(DirectionKind::AdjustLeft),
        "Adjust direction to the Right" => plain(DirectionKind::AdjustRight),
        "Maintain direction." => plain(DirectionKind::Maintain),
        _ => {
            let class = text
                .strip_prefix("Collision risk with ")
                .and_then(|r| r.strip_suffix(", proceed with caution and yield"))
                .ok_or_else(|| perr(line, format!("unrecognized direction suggestion {text:?}")))?;
            let target_class = match class {
                "actor" => None,
                c => Some(ActorClass::parse(c).ok_or_else(|| perr(line, format!("unknown actor class {c:?}")))?),
            };
            Ok(DirectionSuggestion { kind: DirectionKind::YieldOverride, target_class })
        }
    }
}

/// Parses a rendered critique. Full-precision speeds are taken from the
/// detail log when present, otherwise from the one-decimal text.
pub fn parse(text: &str) -> Result<Critique> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut expect = |want: &str| -> Result<(usize, String)> {
        let (n, l) = lines.next().ok_or_else(|| perr(0, format!("unexpected end of input, expected {want:?}")))?;
        Ok((n, l.to_string()))
    };
    let (n, l) = expect("Risk Analysis:")?;
    if l != "Risk Analysis:" {
        return Err(perr(n, format!("expected 'Risk Analysis:', got {l:?}")));
    }
    let mut flags = [false; 6];
    for (i, kind) in RiskKind::ALL.iter().enumerate() {
        let (n, l) = expect(kind.label())?;
        let prefix = format!("{} Risk: ", kind.label());
        flags[i] = match l.strip_prefix(&prefix) {
            Some("True") => true,
            Some("False") => false,
            _ => return Err(perr(n, format!("expected '{prefix}True|False', got {l:?}"))),
        };
    }
    let (n, l) = expect("Action Suggestions:")?;
    if l != "Action Suggestions:" {
        return Err(perr(n, format!("expected 'Action Suggestions:', got {l:?}")));
    }
    let (n, l) = expect("Speed:")?;
    let mut speed = parse_speed(l.strip_prefix("Speed: ").ok_or_else(|| perr(n, "expected 'Speed: '"))?, n)?;
    let (n, l) = expect("Direction:")?;
    let direction = parse_direction(l.strip_prefix("Direction: ").ok_or_else(|| perr(n, "expected 'Direction: '"))?, n)?;
    let (n, l) = expect("Detail:")?;
    if l != "Detail:" {
        return Err(perr(n, format!("expected 'Detail:', got {l:?}")));
    }
    let mut detail = Vec::new();
    for (n, l) in lines {
        let (k, v) = l.split_once(": ").ok_or_else(|| perr(n, format!("expected 'key: value', got {l:?}")))?;
        let exact = || v.parse::<f64>().map_err(|e| perr(n, format!("{e}: {v:?}")));
        match k {
            V_FROM_KEY => speed.v_from = exact()?,
            V_TO_KEY => speed.v_to = exact()?,
            _ => detail.push((k.to_string(), v.to_string())),
        }
    }
    Ok(Critique { flags, speed, direction, detail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{BicycleState, Pose2D, Vec2};
    use crate::risk::{aggregate, Actor, Extent, RiskThresholds, SceneContext};
    use crate::traj::{straight, RouteWaypoints, SpeedWaypoints};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene() -> SceneContext {
        let ego = BicycleState::new(Pose2D::new(0.0, 0.0, 0.0), 5.0, 2.9).unwrap();
        SceneContext::empty(ego, 15.0).with_expert(straight(Vec2::ZERO, 0.0, 5.0, 20, 10, 0.25).unwrap())
    }

    fn final_speed_traj(v_final: f64) -> Trajectory {
        let base = straight(Vec2::ZERO, 0.0, 5.0, 20, 10, 0.25).unwrap();
        let mut pts = base.speed.points().to_vec();
        let n = pts.len();
        pts[n - 1] = pts[n - 2] + Vec2::new(v_final * 0.25, 0.0);
        Trajectory::new(base.route, SpeedWaypoints::new(pts, 0.25).unwrap())
    }

    fn report_for(pred: &Trajectory, ctx: &SceneContext) -> RiskReport {
        aggregate(pred, ctx, &RiskThresholds::default()).unwrap()
    }

    #[test]
    fn reduce_text_matches_published_example() {
        let ctx = scene();
        let expert = final_speed_traj(3.5);
        let pred = final_speed_traj(7.4);
        let mut r = report_for(&pred, &ctx);
        r.speed = true;
        let s = suggest_speed(&r, &pred, &expert);
        assert_eq!(s.kind, SpeedKind::Reduce);
        assert_eq!(s.text(), "Reduce speed from 7.4 m/s to 3.5 m/s");
    }

    #[test]
    fn equal_speeds_maintain() {
        let ctx = scene();
        let t = final_speed_traj(5.0);
        let mut r = report_for(&t, &ctx);
        r.speed = true;
        assert_eq!(suggest_speed(&r, &t, &t).text(), "Maintain speed at 5.0 m/s");
    }

    #[test]
    fn slower_prediction_increases() {
        let ctx = scene();
        let (pred, expert) = (final_speed_traj(2.0), final_speed_traj(4.0));
        let mut r = report_for(&pred, &ctx);
        r.speed = true;
        let s = suggest_speed(&r, &pred, &expert);
        assert_eq!(s.kind, SpeedKind::Increase);
        assert!((s.v_from - 2.0).abs() < 1e-9 && (s.v_to - 4.0).abs() < 1e-9);
        r.speed = false;
        assert_eq!(suggest_speed(&r, &pred, &expert).kind, SpeedKind::Maintain);
    }

    #[test]
    fn direction_opposes_offset() {
        let ctx = scene();
        let shifted: Vec<Vec2> = ctx.expert().unwrap().route.points().iter().map(|p| *p + Vec2::new(0.0, 2.5)).collect();
        let pred = Trajectory::new(RouteWaypoints::new(shifted).unwrap(), ctx.expert().unwrap().speed.clone());
        let r = report_for(&pred, &ctx);
        assert_eq!(r.lateral.offset, Some(Side::Left));
        assert_eq!(suggest_direction(&r).unwrap().text(), "Adjust direction to the Right");
    }

    #[test]
    fn collision_overrides_direction() {
        let mut ctx = scene();
        ctx.actors.push(Actor {
            id: 3,
            class: ActorClass::Pedestrian,
            extent: Extent::PEDESTRIAN,
            forecast: vec![Pose2D::new(6.0, 2.5, 0.0); 10],
        });
        let shifted: Vec<Vec2> = ctx.expert().unwrap().route.points().iter().map(|p| *p + Vec2::new(0.0, 2.5)).collect();
        let pred = Trajectory::new(RouteWaypoints::new(shifted).unwrap(), ctx.expert().unwrap().speed.clone());
        let r = report_for(&pred, &ctx);
        assert!(r.collision && r.direction);
        let d = suggest_direction(&r).unwrap();
        assert_eq!(d.kind, DirectionKind::YieldOverride);
        assert_eq!(d.text(), "Collision risk with pedestrian, proceed with caution and yield");
    }

    #[test]
    fn collision_without_evidence_is_inconsistent() {
        let ctx = scene();
        let mut r = report_for(ctx.expert().unwrap(), &ctx);
        r.collision = true;
        assert!(matches!(suggest_direction(&r), Err(Error::InconsistentReport(_))));
    }

    #[test]
    fn benign_render() {
        let ctx = scene();
        let e = ctx.expert().unwrap();
        let c = critique(&report_for(e, &ctx), e, e).unwrap();
        let text = render(&c);
        let head: Vec<&str> = text.lines().take(10).collect();
        assert_eq!(
            head,
            [
                "Risk Analysis:",
                "Collision Risk: False",
                "Speed Risk: False",
                "Direction Risk: False",
                "Pedestrian Risk: False",
                "Stop Sign Risk: False",
                "Traffic Light Risk: False",
                "Action Suggestions:",
                "Speed: Maintain speed at 5.0 m/s",
                "Direction: Maintain direction.",
            ]
        );
        assert_eq!(render(&c), text);
    }

    fn random_critique(rng: &mut ChaCha8Rng) -> Critique {
        let mut flags = [false; 6];
        flags.iter_mut().for_each(|f| *f = rng.random_bool(0.4));
        let v_from: f64 = rng.random_range(0.0..20.0);
        let v_to: f64 = rng.random_range(0.0..20.0);
        let speed = match rng.random_range(0..3) {
            0 => SpeedSuggestion { kind: SpeedKind::Reduce, v_from, v_to },
            1 => SpeedSuggestion { kind: SpeedKind::Increase, v_from, v_to },
            _ => SpeedSuggestion::maintain(v_from),
        };
        let classes = [ActorClass::Vehicle, ActorClass::Pedestrian, ActorClass::Static];
        let direction = match rng.random_range(0..4) {
            0 => DirectionSuggestion { kind: DirectionKind::AdjustLeft, target_class: None },
            1 => DirectionSuggestion { kind: DirectionKind::AdjustRight, target_class: None },
            2 => DirectionSuggestion::MAINTAIN,
            _ => DirectionSuggestion {
                kind: DirectionKind::YieldOverride,
                target_class: Some(classes[rng.random_range(0..3)]),
            },
        };
        let detail = (0..rng.random_range(0..8))
            .map(|i| (format!("k{i}.x"), format!("{:.4} units", rng.random_range(-5.0..5.0))))
            .collect();
        Critique { flags, speed, direction, detail }
    }

    #[test]
    fn parse_render_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let c = random_critique(&mut rng);
            assert_eq!(parse(&render(&c)).unwrap(), c);
        }
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(parse("Risk Analysis:\nCollision Risk: Maybe\n").is_err());
        assert!(parse("").is_err());
        let c = random_critique(&mut ChaCha8Rng::seed_from_u64(1));
        let broken = render(&c).replace("Speed: ", "Sped: ");
        assert!(matches!(parse(&broken), Err(Error::Parse { .. })));
    }

    #[test]
    fn text_only_parse_recovers_rounded_values() {
        let text = "Risk Analysis:\nCollision Risk: False\nSpeed Risk: True\nDirection Risk: False\n\
                    Pedestrian Risk: False\nStop Sign Risk: False\nTraffic Light Risk: False\n\
                    Action Suggestions:\nSpeed: Reduce speed from 7.4 m/s to 3.5 m/s\n\
                    Direction: Maintain direction.\nDetail:\n";
        let c = parse(text).unwrap();
        assert_eq!(c.speed, SpeedSuggestion { kind: SpeedKind::Reduce, v_from: 7.4, v_to: 3.5 });
        assert!(c.flag(RiskKind::Speed));
    }
}
