use serde::{Deserialize, Serialize};

use super::{GeomError, RigidTransform, UnitVec3, Vec3, PARALLEL_EPS};

/// An infinite line in 3D, stored in canonical form so that any two
/// descriptions of the same line compare equal and serialize identically:
///
/// * `point` is the point on the line closest to the origin,
/// * `direction` has its first nonzero component positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LineWire", into = "LineWire")]
pub struct Line3 {
    point: Vec3,
    direction: UnitVec3,
}

#[derive(Serialize, Deserialize)]
struct LineWire {
    point: [f64; 3],
    direction: [f64; 3],
}

impl Line3 {
    /// Builds the canonical form of the line through `point` along
    /// `direction`.
    pub fn new(point: Vec3, direction: UnitVec3) -> Self {
        let direction = canonical_sign(direction);
        let d = direction.as_vec3();
        let foot = point - d * point.dot(d);
        Self {
            point: foot,
            direction,
        }
    }

    /// Canonical point: the foot of the perpendicular from the origin.
    pub fn point(&self) -> Vec3 {
        self.point
    }

    /// Canonical direction: first nonzero component positive.
    pub fn direction(&self) -> UnitVec3 {
        self.direction
    }

    pub fn point_at(&self, t: f64) -> Vec3 {
        self.point + self.direction * t
    }

    /// Orthogonal projection of `p` onto the line: the unique point on the
    /// line minimizing the distance to `p`.
    pub fn closest_point_to(&self, p: Vec3) -> Vec3 {
        let d = self.direction.as_vec3();
        self.point + d * (p - self.point).dot(d)
    }

    pub fn distance_to_point(&self, p: Vec3) -> f64 {
        self.closest_point_to(p).distance_to(p)
    }

    /// Component-wise comparison of the canonical forms.
    pub fn approx_eq(&self, other: &Line3, tol: f64) -> bool {
        self.point.distance_to(other.point) <= tol
            && (self.direction.as_vec3() - other.direction.as_vec3()).norm() <= tol
    }

    /// The line carried into another frame: point mapped, direction rotated.
    pub fn transformed(&self, t: &RigidTransform) -> Line3 {
        let direction = t
            .rotation
            .apply(self.direction.as_vec3())
            .normalized()
            .expect("rotations preserve unit length");
        Line3::new(t.apply_point(self.point), direction)
    }
}

impl TryFrom<LineWire> for Line3 {
    type Error = GeomError;
    fn try_from(w: LineWire) -> Result<Self, GeomError> {
        let direction = Vec3::from(w.direction).normalized()?;
        Ok(Line3::new(Vec3::from(w.point), direction))
    }
}

impl From<Line3> for LineWire {
    fn from(l: Line3) -> LineWire {
        LineWire {
            point: l.point.into(),
            direction: l.direction.as_vec3().into(),
        }
    }
}

fn canonical_sign(direction: UnitVec3) -> UnitVec3 {
    let v = direction.as_vec3();
    let flip = if v.x != 0.0 {
        v.x < 0.0
    } else if v.y != 0.0 {
        v.y < 0.0
    } else {
        v.z < 0.0
    };
    if flip {
        direction.flipped()
    } else {
        direction
    }
}

/// The unique pair of mutually closest points `(on_a, on_b)` between two
/// non-parallel lines, from the standard normal-equations solution of
/// minimizing `|a(s) - b(t)|²` over the two line parameters.
///
/// Errors with [`GeomError::ParallelLines`] when the direction cross-product
/// norm is below [`PARALLEL_EPS`].
pub fn closest_points_between_lines(a: &Line3, b: &Line3) -> Result<(Vec3, Vec3), GeomError> {
    let d1 = a.direction().as_vec3();
    let d2 = b.direction().as_vec3();
    if d1.cross(d2).norm() < PARALLEL_EPS {
        return Err(GeomError::ParallelLines);
    }
    let r = a.point() - b.point();
    let k = d1.dot(d2);
    let c = d1.dot(r);
    let f = d2.dot(r);
    // Stationarity of |a.point + s·d1 - b.point - t·d2|²:
    //   s - t·k = -c
    //   s·k - t = -f
    let denom = 1.0 - k * k;
    let s = (k * f - c) / denom;
    let t = (f - k * c) / denom;
    Ok((a.point() + d1 * s, b.point() + d2 * t))
}
