//! Planar vector math, disc primitives, boundary sampling and the directed
//! Hausdorff distance.

use std::f64::consts::TAU;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("boundary sampling needs at least 3 points, got {0}")]
    TooFewSamples(usize),
    #[error("point set is empty")]
    EmptySet,
    #[error("disc radius must be positive, got {0}")]
    BadRadius(f64),
}

/// A point (or free vector) in the table plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// Forces and velocities share the point representation.
pub type Vec2 = Point2;

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    /// Rescales the vector so its magnitude does not exceed `limit`.
    pub fn clamp_norm(self, limit: f64) -> Self {
        let n = self.norm();
        if n > limit && n > 0.0 {
            self * (limit / n)
        } else {
            self
        }
    }

    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, rhs: Self) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Point2 {
    fn sub_assign(&mut self, rhs: Self) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        p * self
    }
}

impl Div<f64> for Point2 {
    type Output = Self;
    fn div(self, k: f64) -> Self {
        Self::new(self.x / k, self.y / k)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// A circular footprint: cylinder cross-sections and the robot body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point2,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point2, radius: f64) -> Result<Self, GeometryError> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Self { center, radius })
        } else {
            Err(GeometryError::BadRadius(radius))
        }
    }

    /// Closed membership test.
    pub fn contains(&self, p: Point2) -> bool {
        distance(p, self.center) <= self.radius
    }

    /// Same center, radius grown by `by`.
    pub fn inflated(&self, by: f64) -> Self {
        Self {
            center: self.center,
            radius: self.radius + by,
        }
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    /// Closest boundary point to `p`. For `p` at the center the point at angle 0
    /// is returned.
    pub fn nearest_boundary_point(&self, p: Point2) -> Point2 {
        let dir = (p - self.center).normalized().unwrap_or(Point2::new(1.0, 0.0));
        self.center + dir * self.radius
    }
}

pub fn distance(p: Point2, q: Point2) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    (dx * dx + dy * dy).sqrt()
}

/// Signed clearance from `p` to the disc boundary; negative inside.
pub fn disc_clearance(p: Point2, d: &Disc) -> f64 {
    distance(p, d.center) - d.radius
}

/// `n` equally spaced boundary points, counter-clockwise from angle 0.
pub fn sample_boundary(d: &Disc, n: usize) -> Result<Vec<Point2>, GeometryError> {
    if n < 3 {
        return Err(GeometryError::TooFewSamples(n));
    }
    Ok((0..n)
        .map(|i| {
            let a = TAU * i as f64 / n as f64;
            Point2::new(d.center.x + d.radius * a.cos(), d.center.y + d.radius * a.sin())
        })
        .collect())
}

/// Directed Hausdorff distance `max_{a in A} min_{b in B} d(a, b)` together
/// with the maximizing point of `A`. Ties keep the lowest index in `A`.
pub fn directed_hausdorff(a: &[Point2], b: &[Point2]) -> Result<(f64, Point2), GeometryError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    let mut best = (f64::NEG_INFINITY, a[0]);
    for &pa in a {
        // Squared distances keep the inner loop cheap; sqrt is monotone so the
        // argmin and the final value are unchanged.
        let mut min_sq = f64::INFINITY;
        for &pb in b {
            let dx = pa.x - pb.x;
            let dy = pa.y - pb.y;
            let d2 = dx * dx + dy * dy;
            if d2 < min_sq {
                min_sq = d2;
            }
        }
        let d = min_sq.sqrt();
        if d > best.0 {
            best = (d, pa);
        }
    }
    Ok(best)
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return distance(p, a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    distance(p, a + ab * t)
}

/// Whether the segment `[a, b]` passes within `radius` of `center`.
pub fn segment_hits_disc(a: Point2, b: Point2, center: Point2, radius: f64) -> bool {
    point_segment_distance(center, a, b) < radius
}
