use super::{Pose2D, Vec2};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Gravity-aligned oriented box: a yawed rectangle plus a vertical interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub center: Pose2D,
    pub half_length: f64,
    pub half_width: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Obb {
    pub fn new(center: Pose2D, half_length: f64, half_width: f64, z_min: f64, z_max: f64) -> Result<Self> {
        if !(half_length > 0.0 && half_width > 0.0) {
            return Err(Error::invalid(format!(
                "box half extents must be positive, got {half_length} x {half_width}"
            )));
        }
        if !(z_min <= z_max) {
            return Err(Error::invalid(format!("box z interval [{z_min}, {z_max}] is empty")));
        }
        Ok(Obb { center, half_length, half_width, z_min, z_max })
    }

    /// Unit axes along the length and the width.
    pub fn axes(&self) -> [Vec2; 2] {
        let u = self.center.heading();
        [u, u.perp()]
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let c = self.center.position();
        let [u, v] = self.axes();
        let l = u * self.half_length;
        let w = v * self.half_width;
        [c + l + w, c - l + w, c - l - w, c + l - w]
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_length * self.half_width
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let c = self.center.position().dot(axis);
        let [u, v] = self.axes();
        let r = self.half_length * u.dot(axis).abs() + self.half_width * v.dot(axis).abs();
        (c - r, c + r)
    }

    pub fn z_overlaps(&self, other: &Obb) -> bool {
        self.z_min <= other.z_max && other.z_min <= self.z_max
    }
}

/// Separating-axis test over the four rectangle edge normals plus the
/// vertical interval. Touching boxes count as intersecting.
pub fn sat_intersects(a: &Obb, b: &Obb) -> bool {
    if !a.z_overlaps(b) {
        return false;
    }
    let [a0, a1] = a.axes();
    let [b0, b1] = b.axes();
    [a0, a1, b0, b1].into_iter().all(|axis| {
        let (amin, amax) = a.project(axis);
        let (bmin, bmax) = b.project(axis);
        amin <= bmax && bmin <= amax
    })
}
