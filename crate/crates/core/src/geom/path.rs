use super::{Pose2D, Vec2};
use crate::error::{Error, Result};

/// Polyline with cached cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cum: Vec<f64>,
}

/// Closest-point query result against a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point.
    pub s: f64,
    /// Signed perpendicular offset, positive to the left of the travel direction.
    pub lateral: f64,
    pub distance: f64,
    pub segment: usize,
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!("polyline needs at least 2 points, got {}", points.len())));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("non-finite polyline point {p:?}")));
        }
        let mut cum = Vec::with_capacity(points.len());
        cum.push(0.0);
        for w in points.windows(2) {
            let last = *cum.last().unwrap();
            cum.push(last + w[0].distance(w[1]));
        }
        if *cum.last().unwrap() <= 0.0 {
            return Err(Error::invalid("polyline has zero length"));
        }
        Ok(Polyline { points, cum })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn segment_for(&self, s: f64) -> usize {
        let n = self.points.len();
        if s <= 0.0 {
            return self.first_proper_segment();
        }
        if s >= self.length() {
            return self.last_proper_segment();
        }
        let i = self.cum.partition_point(|&c| c <= s);
        (i - 1).min(n - 2)
    }

    fn first_proper_segment(&self) -> usize {
        (0..self.points.len() - 1)
            .find(|&i| self.cum[i + 1] > self.cum[i])
            .unwrap_or(0)
    }

    fn last_proper_segment(&self) -> usize {
        (0..self.points.len() - 1)
            .rev()
            .find(|&i| self.cum[i + 1] > self.cum[i])
            .unwrap_or(0)
    }

    /// Point at arc length `s`; extrapolates linearly past either end.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let i = self.segment_for(s);
        let (a, b) = (self.points[i], self.points[i + 1]);
        let len = self.cum[i + 1] - self.cum[i];
        if len <= 0.0 {
            return a;
        }
        a + (b - a) * ((s - self.cum[i]) / len)
    }

    /// Unit tangent at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        let i = self.segment_for(s);
        (self.points[i + 1] - self.points[i]).normalized().unwrap_or(Vec2::new(1.0, 0.0))
    }

    pub fn project(&self, p: Vec2) -> Projection {
        let mut best = Projection { s: 0.0, lateral: 0.0, distance: f64::INFINITY, segment: 0 };
        for i in 0..self.points.len() - 1 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let ab = b - a;
            let len_sq = ab.norm_sq();
            let t = if len_sq > 0.0 { ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
            let foot = a + ab * t;
            let d = p.distance(foot);
            if d < best.distance {
                let side = if len_sq > 0.0 { ab.cross(p - a).signum() } else { 0.0 };
                best = Projection {
                    s: self.cum[i] + t * len_sq.sqrt(),
                    lateral: side * d,
                    distance: d,
                    segment: i,
                };
            }
        }
        best
    }

    /// Resamples at uniform arc-length pitch, starting at `start` (inclusive).
    pub fn resample(&self, start: f64, pitch: f64, count: usize) -> Vec<Vec2> {
        (0..count).map(|i| self.point_at(start + pitch * i as f64)).collect()
    }
}

/// Result of [`signed_cross_track`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedCrossTrack {
    pub max_abs: f64,
    /// Signed offset at the point of maximum magnitude (left positive).
    pub signed: f64,
    pub index: usize,
}

/// Maximum over predicted points of the distance to the nearest reference segment,
/// together with its side.
pub fn signed_cross_track(pred: &[Vec2], reference: &[Vec2]) -> Result<SignedCrossTrack> {
    if pred.len() < 2 {
        return Err(Error::invalid(format!("cross-track needs >= 2 predicted points, got {}", pred.len())));
    }
    let reference = Polyline::new(reference.to_vec())?;
    let mut out = SignedCrossTrack { max_abs: 0.0, signed: 0.0, index: 0 };
    for (i, p) in pred.iter().enumerate() {
        let proj = reference.project(*p);
        if proj.distance > out.max_abs {
            out = SignedCrossTrack { max_abs: proj.distance, signed: proj.lateral, index: i };
        }
    }
    Ok(out)
}

/// Cross-track error: maximum perpendicular distance from the predicted points
/// to the reference polyline.
pub fn cross_track_error(pred: &[Vec2], reference: &[Vec2]) -> Result<f64> {
    signed_cross_track(pred, reference).map(|c| c.max_abs)
}

const HEADING_TAIL: usize = 5;

fn tail_heading(route: &[Vec2], origin: Vec2, which: &str) -> Result<Vec2> {
    if route.len() < HEADING_TAIL {
        return Err(Error::invalid(format!(
            "{which} route needs at least {HEADING_TAIL} points, got {}",
            route.len()
        )));
    }
    let tail = &route[route.len() - HEADING_TAIL..];
    let mean = tail.iter().fold(Vec2::ZERO, |acc, p| acc + *p) * (1.0 / HEADING_TAIL as f64);
    let v = mean - origin;
    if v.norm() < 1e-9 {
        return Err(Error::invalid(format!("{which} heading vector is degenerate")));
    }
    Ok(v)
}

/// Unsigned angle in degrees between the heading vectors of two routes. Each
/// heading vector runs from `origin` to the mean of the route's final five points.
pub fn heading_deviation(pred: &[Vec2], reference: &[Vec2], origin: &Pose2D) -> Result<f64> {
    let a = tail_heading(pred, origin.position(), "predicted")?;
    let b = tail_heading(reference, origin.position(), "reference")?;
    Ok(a.cross(b).abs().atan2(a.dot(b)).to_degrees())
}

/// Even-odd rule point-in-polygon test.
pub fn point_in_polygon(p: Vec2, polygon: &[Vec2]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
