//! Slow brute-force reference implementations used only to check the fast
//! paths in tests. Enabled for unit tests and through the `oracles` feature.

use crate::geom::{Obb, Vec2};

fn row_interval(poly: &[Vec2; 4], y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..4 {
        let (a, b) = (poly[i], poly[(i + 1) % 4]);
        let (ymin, ymax) = (a.y.min(b.y), a.y.max(b.y));
        if y < ymin || y > ymax {
            continue;
        }
        if (b.y - a.y).abs() < 1e-15 {
            lo = lo.min(a.x.min(b.x));
            hi = hi.max(a.x.max(b.x));
        } else {
            let x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Rasterizes both footprints on a grid of `cell`-sized squares (membership
/// decided at cell centers) and reports whether any cell is shared. The
/// vertical intervals must also overlap.
pub fn raster_overlap(a: &Obb, b: &Obb, cell: f64) -> bool {
    if !(a.z_min <= b.z_max && b.z_min <= a.z_max) {
        return false;
    }
    let (pa, pb) = (a.corners(), b.corners());
    let bounds = |p: &[Vec2; 4]| {
        p.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |acc, v| {
            (acc.0.min(v.x), acc.1.max(v.x), acc.2.min(v.y), acc.3.max(v.y))
        })
    };
    let (ax0, ax1, ay0, ay1) = bounds(&pa);
    let (bx0, bx1, by0, by1) = bounds(&pb);
    let (y0, y1) = (ay0.max(by0), ay1.min(by1));
    if y0 > y1 || ax0.max(bx0) > ax1.min(bx1) {
        return false;
    }
    let row_start = (y0 / cell).floor() as i64;
    let row_end = (y1 / cell).ceil() as i64;
    for r in row_start..=row_end {
        let yc = (r as f64 + 0.5) * cell;
        let (Some(ia), Some(ib)) = (row_interval(&pa, yc), row_interval(&pb, yc)) else {
            continue;
        };
        let (lo, hi) = (ia.0.max(ib.0), ia.1.min(ib.1));
        if lo > hi {
            continue;
        }
        // first cell center at or after `lo`
        let first = ((lo / cell) - 0.5).ceil();
        if (first + 0.5) * cell <= hi {
            return true;
        }
    }
    false
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn segments_cross(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = (p2 - p1).cross(q1 - p1);
    let d2 = (p2 - p1).cross(q2 - p1);
    let d3 = (q2 - q1).cross(p1 - q1);
    let d4 = (q2 - q1).cross(p2 - q1);
    if d1 == 0.0 && d2 == 0.0 {
        // collinear: overlap of the parameter ranges along the first segment
        let dir = p2 - p1;
        let (t1, t2) = ((q1 - p1).dot(dir), (q2 - p1).dot(dir));
        return t1.min(t2) <= dir.norm_sq() && t1.max(t2) >= 0.0;
    }
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

fn inside_convex(p: Vec2, poly: &[Vec2; 4]) -> bool {
    (0..4).all(|i| (poly[(i + 1) % 4] - poly[i]).cross(p - poly[i]) >= 0.0)
}

fn footprints_overlap(pa: &[Vec2; 4], pb: &[Vec2; 4]) -> bool {
    if pa.iter().any(|p| inside_convex(*p, pb)) || pb.iter().any(|p| inside_convex(*p, pa)) {
        return true;
    }
    (0..4).any(|i| (0..4).any(|j| segments_cross(pa[i], pa[(i + 1) % 4], pb[j], pb[(j + 1) % 4])))
}

/// How far the pair is from the touching configuration: the gap between
/// footprints when apart, the minimal axis penetration when overlapping.
/// Vertical extents are ignored.
pub fn obb_boundary_distance(a: &Obb, b: &Obb) -> f64 {
    let (pa, pb) = (a.corners(), b.corners());
    if !footprints_overlap(&pa, &pb) {
        let mut d = f64::INFINITY;
        for i in 0..4 {
            for j in 0..4 {
                d = d.min(point_segment_distance(pa[i], pb[j], pb[(j + 1) % 4]));
                d = d.min(point_segment_distance(pb[i], pa[j], pa[(j + 1) % 4]));
            }
        }
        return d;
    }
    let mut depth = f64::INFINITY;
    for poly in [&pa, &pb] {
        for i in 0..2 {
            let axis = (poly[i + 1] - poly[i]).normalized().unwrap().perp();
            let span = |p: &[Vec2; 4]| {
                p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    let s = v.dot(axis);
                    (lo.min(s), hi.max(s))
                })
            };
            let (amin, amax) = span(&pa);
            let (bmin, bmax) = span(&pb);
            depth = depth.min((amax - bmin).min(bmax - amin));
        }
    }
    depth
}

/// Cross-track error against a reference densely resampled every `step`
/// meters, using nearest-sample distance.
pub fn dense_cross_track(pred: &[Vec2], reference: &[Vec2], step: f64) -> f64 {
    let mut samples = Vec::new();
    for w in reference.windows(2) {
        let len = w[0].distance(w[1]);
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 0..n {
            samples.push(w[0].lerp(w[1], k as f64 / n as f64));
        }
    }
    samples.push(*reference.last().unwrap());
    pred.iter()
        .map(|p| samples.iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}
