use super::suite::*;
use super::*;
use crate::geom::{BicycleState, Pose2D, Vec2};

fn settings() -> SimSettings {
    SimSettings::default()
}

fn straight_empty() -> Scenario {
    Scenario {
        name: "empty".into(),
        duration: 20.0,
        tick: 0.05,
        replan_period: 0.5,
        ego: BicycleState::new(Pose2D::new(0.0, 0.0, 0.0), 5.0, 2.9).unwrap(),
        route: vec![Vec2::new(0.0, 0.0), Vec2::new(50.0, 0.0)],
        goal_radius: 2.0,
        speed_limit: 13.9,
        cruise_speed: 8.0,
        actors: vec![],
        light: None,
        environment: Default::default(),
        forbidden_zones: vec![],
        lane_zones: vec![],
        fault: Fault::None,
    }
}

#[test]
fn expert_completes_empty_straight() {
    let r = run_episode(&straight_empty(), &ExpertPlanner::clean(), 0, &settings(), 0).unwrap();
    assert!(r.success, "{r:?}");
    assert_eq!(r.route_completion, 1.0);
    assert!(r.collision.is_none());
}

fn lead_stop() -> Scenario {
    let mut sc = straight_empty();
    sc.name = "lead_stop".into();
    sc.duration = 30.0;
    sc.route = vec![Vec2::new(0.0, 0.0), Vec2::new(100.0, 0.0)];
    sc.fault = Fault::IgnoreActors;
    sc.actors = vec![ActorScript {
        id: 42,
        class: crate::risk::ActorClass::Vehicle,
        extent: crate::risk::Extent::CAR,
        keyframes: vec![
            Keyframe { t: 0.0, pose: Pose2D::new(20.0, 0.0, 0.0) },
            Keyframe { t: 2.0, pose: Pose2D::new(30.0, 0.0, 0.0) },
            Keyframe { t: 2.8, pose: Pose2D::new(32.0, 0.0, 0.0) },
            Keyframe { t: 30.0, pose: Pose2D::new(32.0, 0.0, 0.0) },
        ],
    }];
    sc
}

#[test]
fn ignoring_planner_hits_stopped_lead_and_refinement_avoids_it() {
    let raw = run_episode(&lead_stop(), &ExpertPlanner::degraded(), 0, &settings(), 0).unwrap();
    let hit = raw.collision.expect("raw planner collides");
    assert_eq!(hit.actor_id, 42);
    assert!(!raw.success);
    let refined = run_episode(&lead_stop(), &ExpertPlanner::degraded(), 1, &settings(), 0).unwrap();
    assert!(refined.collision.is_none(), "{:?}", refined.collision);
    let last = refined.telemetry.last().unwrap();
    assert!(last.x < 32.0 - 2.3 - 2.45, "stops behind the lead: {last:?}");
}

#[test]
fn episodes_are_deterministic() {
    let sc = lead_vehicle_stop();
    let p = degrade_planner(ExpertPlanner::degraded(), 0.5, 9).unwrap();
    let a = run_episode(&sc, &p, 1, &settings(), 9).unwrap();
    let b = run_episode(&sc, &p, 1, &settings(), 9).unwrap();
    assert_eq!(serde_json::to_string(&a.telemetry).unwrap(), serde_json::to_string(&b.telemetry).unwrap());
    assert_eq!(a, b);
}

#[test]
fn zero_sigma_is_identity_and_noise_is_reproducible() {
    let sc = benign_cruise();
    let ego = sc.ego;
    let inner = ExpertPlanner::clean();
    let same = degrade_planner(inner, 0.0, 3).unwrap();
    assert_eq!(same.plan(&sc, &ego, 0.0, 0).unwrap(), inner.plan(&sc, &ego, 0.0, 0).unwrap());
    let n1 = degrade_planner(inner, 0.5, 3).unwrap();
    let n2 = degrade_planner(inner, 0.5, 3).unwrap();
    let n3 = degrade_planner(inner, 0.5, 4).unwrap();
    assert_eq!(n1.plan(&sc, &ego, 0.0, 2).unwrap(), n2.plan(&sc, &ego, 0.0, 2).unwrap());
    assert_ne!(n1.plan(&sc, &ego, 0.0, 2).unwrap(), n3.plan(&sc, &ego, 0.0, 2).unwrap());
    assert_ne!(n1.plan(&sc, &ego, 0.0, 2).unwrap(), n1.plan(&sc, &ego, 0.0, 3).unwrap());
    assert!(degrade_planner(inner, -0.1, 0).is_err());
}

#[test]
fn noise_has_requested_spread() {
    let sc = benign_cruise();
    let inner = ExpertPlanner::clean();
    let noisy = degrade_planner(inner, 0.5, 11).unwrap();
    let clean = inner.plan(&sc, &sc.ego, 0.0, 0).unwrap();
    let mut sq = Vec::new();
    for k in 0..400 {
        let p = noisy.plan(&sc, &sc.ego, 0.0, k).unwrap();
        for (a, b) in p.route.points().iter().zip(clean.route.points()) {
            sq.push((a.x - b.x).powi(2));
            sq.push((a.y - b.y).powi(2));
        }
    }
    let sd = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
    assert!((sd - 0.5).abs() < 0.01, "sd {sd}");
}

#[test]
fn refinement_leaves_expert_episodes_unchanged() {
    for sc in builtin_suite() {
        let raw = run_episode(&sc, &ExpertPlanner::clean(), 0, &settings(), 1).unwrap();
        let refined = run_episode(&sc, &ExpertPlanner::clean(), 2, &settings(), 1).unwrap();
        assert_eq!(raw.telemetry, refined.telemetry, "{}", sc.name);
        assert_eq!(raw.success, refined.success);
    }
}

#[test]
fn expert_succeeds_on_every_builtin_scenario() {
    let suite = builtin_suite();
    assert_eq!(suite.len(), 12);
    for sc in &suite {
        sc.validate().unwrap();
        let r = run_episode(sc, &ExpertPlanner::clean(), 0, &settings(), 0).unwrap();
        assert!(r.success, "{}: {:?} {:?} {}", sc.name, r.collision, r.zone_entry, r.route_completion);
    }
}

#[test]
fn faults_break_every_scenario_but_the_benign_one() {
    for sc in builtin_suite() {
        let r = run_episode(&sc, &ExpertPlanner::degraded(), 0, &settings(), 0).unwrap();
        assert_eq!(r.success, sc.fault == Fault::None, "{}", sc.name);
    }
}

#[test]
fn collision_excludes_success_and_brake_excludes_throttle() {
    let variants = [Variant::new("raw", true, 0.5, 0), Variant::new("refined", true, 1.0, 1)];
    for v in &variants {
        for sc in builtin_suite() {
            let p = degrade_planner(ExpertPlanner::degraded(), v.sigma, 5).unwrap();
            let r = run_episode(&sc, &p, v.refine_steps, &settings(), 5).unwrap();
            if r.collision.is_some() || r.zone_entry.is_some() {
                assert!(!r.success);
            }
            assert!(r.telemetry.iter().all(|k| !k.brake || k.throttle == 0.0), "{}", sc.name);
        }
    }
}

#[test]
fn trivial_suite_passes_both_variants() {
    let variants = [Variant::new("raw", false, 0.0, 0), Variant::new("refined", false, 0.0, 1)];
    let rep = run_suite(&[straight_empty()], &variants, &[1, 2], &settings()).unwrap();
    for v in &rep.variants {
        assert_eq!(v.success_rate, 1.0);
        assert_eq!(v.collision_rate, 0.0);
        assert_eq!(v.per_seed.len(), 2);
    }
    assert!(run_suite(&[], &variants, &[1], &settings()).is_err());
}

#[test]
fn suite_is_independent_of_thread_count() {
    let suite: Vec<Scenario> = builtin_suite().into_iter().take(4).collect();
    let variants = [Variant::new("refined", true, 0.5, 1)];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_suite(&suite, &variants, &[3, 4], &settings()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn refined_beats_raw_on_builtin_suite() {
    let variants = [Variant::new("raw", true, 0.5, 0), Variant::new("refined", true, 0.5, 1)];
    let rep = run_suite(&builtin_suite(), &variants, &[1, 2], &settings()).unwrap();
    let (raw, refined) = (rep.variant("raw").unwrap(), rep.variant("refined").unwrap());
    assert!(refined.success_rate > raw.success_rate, "{} vs {}", refined.success_rate, raw.success_rate);
    assert!(refined.q_gain_per_step[0] > 0.0);
}

#[test]
fn planner_failure_is_reported_with_time() {
    struct Broken;
    impl Planner for Broken {
        fn plan(&self, _: &Scenario, _: &BicycleState, t: f64, _: usize) -> crate::Result<crate::traj::Trajectory> {
            Err(Error::invalid(format!("no plan at {t}")))
        }
        fn id(&self) -> String {
            "broken".into()
        }
    }
    match run_episode(&straight_empty(), &Broken, 0, &settings(), 0) {
        Err(Error::Planner { time, .. }) => assert_eq!(time, 0.0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut sc = lead_stop();
    sc.actors[0].keyframes.pop();
    assert!(run_episode(&sc, &ExpertPlanner::clean(), 0, &settings(), 0).is_err());
    let mut sc = straight_empty();
    sc.tick = 0.0;
    assert!(sc.validate().is_err());
    let mut sc = straight_empty();
    sc.duration = 0.01;
    assert!(sc.validate().is_err());
}

#[test]
fn fault_serializes_tagged() {
    let f = Fault::LateralDrift { angle_deg: -20.0 };
    let s = serde_json::to_string(&f).unwrap();
    assert_eq!(s, r#"{"type":"lateral_drift","angle_deg":-20.0}"#);
    assert_eq!(serde_json::from_str::<Fault>(&s).unwrap(), f);
    let sc = curve_drift();
    let back: Scenario = serde_json::from_str(&serde_json::to_string(&sc).unwrap()).unwrap();
    assert_eq!(back, sc);
}
