//! Turns the projected pad corners into the per-frame observation
//! `Z = [x_c, y_c, O_w, O_h, theta]` and decides whether it is usable.
//!
//! Image coordinates are x-right, y-down. Corners are kept in clockwise
//! order (as seen on screen) starting from the corner with the smallest
//! `(y, x)`, so "top edge" is `c0 -> c1` and "left edge" is `c3 -> c0`.

use nalgebra::Point2;
use thiserror::Error;

/// Two corners closer than this are treated as coincident.
pub const COINCIDENT_TOL_PX: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservationError {
    #[error("degenerate quad: corners {0} and {1} coincide")]
    DegenerateQuad(usize, usize),
}

/// Reduces an angle in degrees into `[0, 90)`.
pub fn wrap_deg_90(theta: f64) -> f64 {
    let r = theta.rem_euclid(90.0);
    if r >= 90.0 {
        0.0
    } else {
        r
    }
}

/// Shortest signed difference on the 90-degree circle, in `(-45, 45]`.
pub fn angle_diff_90(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(90.0);
    if d > 45.0 {
        d - 90.0
    } else {
        d
    }
}

/// Orders four points clockwise around their mean, starting from the one
/// with the smallest `(y, x)`.
pub fn sort_corners(points: [Point2<f64>; 4]) -> Result<[Point2<f64>; 4], ObservationError> {
    for i in 0..4 {
        for j in (i + 1)..4 {
            if (points[i] - points[j]).norm() < COINCIDENT_TOL_PX {
                return Err(ObservationError::DegenerateQuad(i, j));
            }
        }
    }
    let mx = points.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let my = points.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mut sorted = points;
    // atan2 increases clockwise on screen because y points down.
    sorted.sort_by(|a, b| {
        let ta = (a.y - my).atan2(a.x - mx);
        let tb = (b.y - my).atan2(b.x - mx);
        ta.total_cmp(&tb)
    });
    let start = (0..4)
        .min_by(|&i, &j| {
            sorted[i].y.total_cmp(&sorted[j].y).then(sorted[i].x.total_cmp(&sorted[j].x))
        })
        .unwrap_or(0);
    sorted.rotate_left(start);
    Ok(sorted)
}

/// Pad corners in canonical order plus the projected template center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerQuad {
    corners: [Point2<f64>; 4],
    centroid: Point2<f64>,
}

impl CornerQuad {
    /// Sorts `corners` into canonical order.
    pub fn new(corners: [Point2<f64>; 4], centroid: Point2<f64>) -> Result<Self, ObservationError> {
        Ok(Self { corners: sort_corners(corners)?, centroid })
    }

    /// Builds a quad from `project_template` output (4 corners then center).
    pub fn from_projection(points: &[Point2<f64>; 5]) -> Result<Self, ObservationError> {
        Self::new([points[0], points[1], points[2], points[3]], points[4])
    }

    pub fn corners(&self) -> &[Point2<f64>; 4] {
        &self.corners
    }

    pub fn centroid(&self) -> Point2<f64> {
        self.centroid
    }

    /// Shoelace area in px².
    pub fn area(&self) -> f64 {
        let c = &self.corners;
        let mut twice = 0.0;
        for i in 0..4 {
            let (a, b) = (c[i], c[(i + 1) % 4]);
            twice += a.x * b.y - b.x * a.y;
        }
        twice.abs() / 2.0
    }

    pub fn is_convex(&self) -> bool {
        let c = &self.corners;
        let mut sign = 0.0_f64;
        for i in 0..4 {
            let (a, b, d) = (c[i], c[(i + 1) % 4], c[(i + 2) % 4]);
            let cross = (b.x - a.x) * (d.y - b.y) - (b.y - a.y) * (d.x - b.x);
            if cross.abs() < 1e-12 {
                return false;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        true
    }
}

/// `(O_w, O_h)`: mean of the top and bottom edge lengths, and mean of the
/// left and right edge lengths.
pub fn compute_object_dims(quad: &CornerQuad) -> (f64, f64) {
    let c = quad.corners();
    let top = (c[1] - c[0]).norm();
    let right = (c[2] - c[1]).norm();
    let bottom = (c[3] - c[2]).norm();
    let left = (c[0] - c[3]).norm();
    ((top + bottom) / 2.0, (left + right) / 2.0)
}

/// Angle of the top edge against the image x-axis, in degrees, reduced
/// into `[0, 90)`.
pub fn compute_angle(quad: &CornerQuad) -> f64 {
    let c = quad.corners();
    let d = c[1] - c[0];
    wrap_deg_90(d.y.atan2(d.x).to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationVector {
    pub x_c: f64,
    pub y_c: f64,
    pub width: f64,
    pub height: f64,
    /// Degrees, in `[0, 90)`.
    pub theta: f64,
}

impl ObservationVector {
    pub fn new(x_c: f64, y_c: f64, width: f64, height: f64, theta: f64) -> Self {
        Self { x_c, y_c, width, height, theta }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.x_c, self.y_c, self.width, self.height, self.theta]
    }
}

/// Thresholds for accepting a detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityGate {
    pub min_area_px2: f64,
    /// `O_w / O_h` must lie in `[1 / max_aspect, max_aspect]`.
    pub max_aspect: f64,
    /// Fraction by which the image bounds are grown for the centroid check.
    pub bounds_inflation: f64,
}

impl Default for ValidityGate {
    fn default() -> Self {
        Self { min_area_px2: 100.0, max_aspect: 4.0, bounds_inflation: 0.2 }
    }
}

/// An observation and whether it may be used to correct the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub z: ObservationVector,
    pub valid: bool,
}

pub fn build_observation(quad: &CornerQuad, image_w: f64, image_h: f64, gate: &ValidityGate) -> Observation {
    let (width, height) = compute_object_dims(quad);
    let theta = compute_angle(quad);
    let c = quad.centroid();
    let z = ObservationVector::new(c.x, c.y, width, height, theta);

    let aspect = width / height;
    let (mx, my) = (gate.bounds_inflation * image_w, gate.bounds_inflation * image_h);
    let in_bounds = c.x >= -mx && c.x <= image_w + mx && c.y >= -my && c.y <= image_h + my;
    let valid = quad.is_convex()
        && quad.area() >= gate.min_area_px2
        && aspect.is_finite()
        && aspect >= 1.0 / gate.max_aspect
        && aspect <= gate.max_aspect
        && in_bounds;
    Observation { z, valid }
}
