//! Dual waypoint representation: a spatially pitched route for lateral
//! geometry and temporally pitched speed points for the velocity profile.
//!
//! Coordinates are world-frame meters. Route point `i` nominally sits
//! `i + 1` meters of arc ahead of the ego; speed point `i` is the planned
//! position at `t = i * dt`, so speed point 0 is the current position.

use crate::error::{Error, Result};
use crate::geom::{Polyline, Vec2};
use serde::{Deserialize, Serialize};

pub const ROUTE_POINTS: usize = 20;
pub const ROUTE_PITCH: f64 = 1.0;
pub const SPEED_POINTS: usize = 10;
pub const SPEED_DT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct RouteWaypoints {
    points: Vec<Vec2>,
}

impl RouteWaypoints {
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!("route needs >= 2 points, got {}", points.len())));
        }
        for (i, w) in points.windows(2).enumerate() {
            if !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::invalid(format!("route point {i} is not finite")));
            }
            if w[0] == w[1] {
                return Err(Error::invalid(format!("route points {i} and {} coincide", i + 1)));
            }
        }
        Ok(RouteWaypoints { points })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn polyline(&self) -> Polyline {
        Polyline::new(self.points.clone()).expect("validated route")
    }
}

impl TryFrom<Vec<Vec2>> for RouteWaypoints {
    type Error = Error;
    fn try_from(points: Vec<Vec2>) -> Result<Self> {
        RouteWaypoints::new(points)
    }
}

impl From<RouteWaypoints> for Vec<Vec2> {
    fn from(r: RouteWaypoints) -> Self {
        r.points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpeed", into = "RawSpeed")]
pub struct SpeedWaypoints {
    points: Vec<Vec2>,
    dt: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpeed {
    points: Vec<Vec2>,
    dt: f64,
}

impl SpeedWaypoints {
    pub fn new(points: Vec<Vec2>, dt: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!("speed waypoints need >= 2 points, got {}", points.len())));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("speed waypoint dt must be > 0, got {dt}")));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("speed point {i} is not finite")));
        }
        Ok(SpeedWaypoints { points, dt })
    }

    /// Places points along `path` starting at arc length `s0`, advancing
    /// `speeds[i] * dt` per interval.
    pub fn along(path: &Polyline, s0: f64, speeds: &[f64], dt: f64) -> Result<Self> {
        let mut s = s0;
        let mut points = Vec::with_capacity(speeds.len() + 1);
        points.push(path.point_at(s));
        for (i, v) in speeds.iter().enumerate() {
            if !(*v >= 0.0) {
                return Err(Error::invalid(format!("speed {i} must be >= 0, got {v}")));
            }
            s += v * dt;
            points.push(path.point_at(s));
        }
        SpeedWaypoints::new(points, dt)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl TryFrom<RawSpeed> for SpeedWaypoints {
    type Error = Error;
    fn try_from(r: RawSpeed) -> Result<Self> {
        SpeedWaypoints::new(r.points, r.dt)
    }
}

impl From<SpeedWaypoints> for RawSpeed {
    fn from(s: SpeedWaypoints) -> Self {
        RawSpeed { points: s.points, dt: s.dt }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub route: RouteWaypoints,
    pub speed: SpeedWaypoints,
}

impl Trajectory {
    pub fn new(route: RouteWaypoints, speed: SpeedWaypoints) -> Self {
        Trajectory { route, speed }
    }

    pub fn speeds(&self) -> Vec<f64> {
        implied_speeds(&self.speed.points, self.speed.dt)
    }

    pub fn final_speed(&self) -> f64 {
        *self.speeds().last().expect("at least one interval")
    }

    pub fn same_shape(&self, o: &Trajectory) -> bool {
        self.route.len() == o.route.len() && self.speed.len() == o.speed.len()
    }

    /// All route coordinates followed by all speed coordinates.
    pub fn flatten(&self) -> Vec<f64> {
        self.route
            .points
            .iter()
            .chain(self.speed.points.iter())
            .flat_map(|p| [p.x, p.y])
            .collect()
    }
}

fn implied_speeds(points: &[Vec2], dt: f64) -> Vec<f64> {
    points.windows(2).map(|w| w[0].distance(w[1]) / dt).collect()
}

/// Implied per-interval speeds in m/s; one shorter than the waypoint list.
pub fn speed_profile(w: &SpeedWaypoints) -> Result<Vec<f64>> {
    if w.points.len() < 2 {
        return Err(Error::invalid("speed profile needs >= 2 waypoints"));
    }
    Ok(implied_speeds(&w.points, w.dt))
}

/// Euclidean distance over the concatenated route and speed coordinates.
pub fn traj_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    traj_distance_weighted(a, b, 1.0, 1.0)
}

/// As [`traj_distance`] with separate weights on the route and speed blocks.
pub fn traj_distance_weighted(a: &Trajectory, b: &Trajectory, route_w: f64, speed_w: f64) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "trajectory shapes differ: route {} vs {}, speed {} vs {}",
            a.route.len(),
            b.route.len(),
            a.speed.len(),
            b.speed.len()
        )));
    }
    let sq = |xs: &[Vec2], ys: &[Vec2]| xs.iter().zip(ys).map(|(p, q)| (*p - *q).norm_sq()).sum::<f64>();
    let total = route_w * sq(&a.route.points, &b.route.points) + speed_w * sq(&a.speed.points, &b.speed.points);
    Ok(total.sqrt())
}

/// Monotone piecewise cubic Hermite interpolant of a scalar series.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::invalid(format!(
                "pchip needs >= 2 matching samples, got {} knots and {} values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("pchip knots must be strictly increasing"));
        }
        let slopes = monotone_slopes(&xs, &ys);
        Ok(Pchip { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let tol = 1e-9 * (hi - lo).max(1.0);
        if !(x >= lo - tol && x <= hi + tol) {
            return Err(Error::OutOfRange(format!("query {x} outside [{lo}, {hi}]")));
        }
        Ok(self.eval_clamped(x))
    }

    /// Evaluates with the query clamped into the domain.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let k = (self.xs.partition_point(|&v| v <= x).max(1) - 1).min(self.xs.len() - 2);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }
}

fn monotone_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] <= 0.0 {
            continue;
        }
        let w1 = 2.0 * h[k] + h[k - 1];
        let w2 = h[k] + 2.0 * h[k - 1];
        m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
    }
    m[0] = end_slope(h[0], h[1], d[0], d[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Interpolates a polyline coordinate-wise over its chord-length
/// parameterization and evaluates it at the given arc-length positions.
pub fn pchip_resample(points: &[Vec2], queries: &[f64]) -> Result<Vec<Vec2>> {
    let path = PchipPath::new(points)?;
    queries.iter().map(|&s| path.eval(s)).collect()
}

/// Reusable chord-length PCHIP curve through a polyline.
#[derive(Debug, Clone)]
pub struct PchipPath {
    x: Pchip,
    y: Pchip,
}

impl PchipPath {
    pub fn new(points: &[Vec2]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!("interpolation needs >= 2 points, got {}", points.len())));
        }
        let mut s = Vec::with_capacity(points.len());
        let mut keep: Vec<Vec2> = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for p in points {
            if let Some(last) = keep.last() {
                let step = last.distance(*p);
                if step <= 1e-12 {
                    continue;
                }
                acc += step;
            }
            s.push(acc);
            keep.push(*p);
        }
        if keep.len() < 2 {
            return Err(Error::invalid("interpolation input has zero length"));
        }
        Ok(PchipPath {
            x: Pchip::new(s.clone(), keep.iter().map(|p| p.x).collect())?,
            y: Pchip::new(s, keep.iter().map(|p| p.y).collect())?,
        })
    }

    pub fn length(&self) -> f64 {
        self.x.domain().1
    }

    pub fn eval(&self, s: f64) -> Result<Vec2> {
        Ok(Vec2::new(self.x.eval(s)?, self.y.eval(s)?))
    }

    pub fn eval_clamped(&self, s: f64) -> Vec2 {
        Vec2::new(self.x.eval_clamped(s), self.y.eval_clamped(s))
    }

    /// Dense polyline sampled every `step` meters of parameter.
    pub fn densify(&self, step: f64) -> Vec<Vec2> {
        let n = (self.length() / step).ceil().max(1.0) as usize;
        (0..=n).map(|i| self.eval_clamped(self.length() * i as f64 / n as f64)).collect()
    }
}

/// Straight constant-speed trajectory helper used by fixtures and examples.
pub fn straight(origin: Vec2, heading: f64, speed: f64, route_len: usize, speed_len: usize, dt: f64) -> Result<Trajectory> {
    let dir = Vec2::from_angle(heading);
    let route = (1..=route_len).map(|i| origin + dir * (i as f64 * ROUTE_PITCH)).collect();
    let speed_pts = (0..speed_len).map(|i| origin + dir * (i as f64 * speed * dt)).collect();
    Ok(Trajectory::new(RouteWaypoints::new(route)?, SpeedWaypoints::new(speed_pts, dt)?))
}
