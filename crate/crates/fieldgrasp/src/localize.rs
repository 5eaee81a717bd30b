//! Two-magnetometer triangulation of a straight AC conductor.
//!
//! Each magnetometer supplies one field vector at the target frequency
//! (known up to sign). After rotating the second sensor's vector into the
//! first sensor's frame, the conductor direction is the normalized cross
//! product of the two vectors: the AC field of a straight conductor is
//! everywhere perpendicular to the conductor axis, so the axis is the one
//! direction perpendicular to both measurements. Crossing that direction
//! with each field vector yields, per sensor, the line through the sensor
//! and its closest point on the conductor. Those two rays are both
//! perpendicular to the conductor, so the segment between their mutually
//! closest points lies on the conductor itself; the conductor is the line
//! through that segment along the recovered direction.
//!
//! Every step is invariant to flipping the sign of either field vector,
//! which is what makes the scheme work on alternating fields.
//!
//! All outputs are expressed in the first magnetometer's frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fieldsim::MU_0;
use crate::geom::{
    closest_points_between_lines, GeomError, Line3, RigidTransform, RotationMatrix, Vec3,
};
use crate::sigproc::FieldVectorEstimate;

/// Default minimum angle between the two measured field vectors, in radians
/// (10 degrees). Below it the cross product is too ill-conditioned to trust
/// and the geometry is reported as degenerate.
pub const DEFAULT_ALPHA_MIN: f64 = 10.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LocalizeError {
    /// The measured field vectors are parallel within `alpha_min`: both
    /// sensors lie in a common plane through the conductor axis and the
    /// triangulation has no unique solution. Carries the folded angle
    /// between the vectors in radians.
    #[error("field vectors are parallel within the minimum angle (angle {angle} rad)")]
    DegenerateParallel { angle: f64 },
    /// A field vector has zero or non-finite magnitude.
    #[error("a field vector is zero or non-finite")]
    ZeroField,
    /// The rig translation must be a nonzero finite baseline.
    #[error("sensor baseline is zero or non-finite; coincident sensors cannot triangulate")]
    CoincidentSensors,
}

/// Rigid relation between the two magnetometers, following the measurement
/// convention of the localization math:
///
/// * `rotation` maps vector coordinates from the m1 frame to the m2 frame,
///   so a measurement of m2 is brought into the m1 frame with the inverse;
/// * `translation` is the position of m2's origin expressed in the m1
///   frame (the sensor baseline).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRig {
    rotation: RotationMatrix,
    translation: Vec3,
}

impl SensorRig {
    pub fn new(rotation: RotationMatrix, translation: Vec3) -> Result<Self, LocalizeError> {
        if !translation.is_finite() || translation.norm() <= 0.0 {
            return Err(LocalizeError::CoincidentSensors);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds the rig from the two sensor mount poses expressed in a common
    /// parent frame (e.g. the tool flange). The result is independent of
    /// the parent's own pose.
    pub fn from_mounts(m1: &RigidTransform, m2: &RigidTransform) -> Result<Self, LocalizeError> {
        let rotation = m2.rotation.transpose() * m1.rotation;
        let translation = m1
            .rotation
            .transpose()
            .apply(m2.translation - m1.translation);
        Self::new(rotation, translation)
    }

    pub fn rotation(&self) -> RotationMatrix {
        self.rotation
    }

    /// Baseline: m2's position in the m1 frame.
    pub fn translation(&self) -> Vec3 {
        self.translation
    }
}

/// A triangulated conductor with its quality diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductorEstimate {
    /// Conductor line in the m1 frame.
    pub line: Line3,
    /// Angle between the two field vectors after folding to `[0, π/2]`;
    /// larger is better conditioned.
    pub angle_between_fields: f64,
    /// Ratio `(|b1|·r1) / (|b2|·r2)`: exactly 1 when both measurements obey
    /// the single-conductor inverse-distance law.
    pub magnitude_consistency: f64,
}

/// Triangulates the conductor line from one field vector per magnetometer.
///
/// `alpha_min` is the folded-angle threshold below which the geometry is
/// reported as [`LocalizeError::DegenerateParallel`]; non-positive or
/// non-finite values disable the threshold (the hard parallel limit of the
/// closest-point construction still applies).
pub fn localize_conductor(
    b1: &FieldVectorEstimate,
    b2: &FieldVectorEstimate,
    rig: &SensorRig,
    alpha_min: f64,
) -> Result<ConductorEstimate, LocalizeError> {
    let b1v = b1.vector;
    let b2v = rig.rotation.transpose().apply(b2.vector);
    let u1 = normalized_or_zero_field(b1v)?;
    let u2 = normalized_or_zero_field(b2v)?;

    // Fold the angle to [0, π/2]: either vector's sign is arbitrary.
    let cos = u1.dot(u2).abs().min(1.0);
    let angle = cos.acos();
    let threshold = if alpha_min.is_finite() && alpha_min > 0.0 {
        alpha_min
    } else {
        0.0
    };
    if angle < threshold {
        return Err(LocalizeError::DegenerateParallel { angle });
    }

    let direction = u1
        .cross(u2)
        .normalized()
        .map_err(|_| LocalizeError::DegenerateParallel { angle })?;

    // Per-sensor ray through the sensor and its closest point on the
    // conductor: perpendicular to both the conductor direction and the
    // local field.
    let ray = |origin: Vec3, unit_field: Vec3| -> Result<Line3, LocalizeError> {
        let dir = direction
            .as_vec3()
            .cross(unit_field)
            .normalized()
            .map_err(|_| LocalizeError::DegenerateParallel { angle })?;
        Ok(Line3::new(origin, dir))
    };
    let ray1 = ray(Vec3::zero(), u1)?;
    let ray2 = ray(rig.translation, u2)?;

    let (_, on_ray2) = closest_points_between_lines(&ray1, &ray2).map_err(|e| match e {
        GeomError::ParallelLines => LocalizeError::DegenerateParallel { angle },
        _ => LocalizeError::ZeroField,
    })?;

    let line = Line3::new(on_ray2, direction);
    let magnitude_consistency = consistency_check(b1, b2, rig, &line);
    Ok(ConductorEstimate {
        line,
        angle_between_fields: angle,
        magnitude_consistency,
    })
}

fn normalized_or_zero_field(v: Vec3) -> Result<Vec3, LocalizeError> {
    let n = v.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(LocalizeError::ZeroField);
    }
    Ok(v / n)
}

/// Cross-sensor magnitude consistency of a candidate conductor line:
/// `(|b1|·r1) / (|b2|·r2)` with `r_i` the perpendicular sensor-to-line
/// distances. The inverse-distance law makes this exactly 1 for a single
/// straight conductor; deviations flag model violations such as nearby
/// return conductors.
pub fn consistency_check(
    b1: &FieldVectorEstimate,
    b2: &FieldVectorEstimate,
    rig: &SensorRig,
    line: &Line3,
) -> f64 {
    let r1 = line.distance_to_point(Vec3::zero());
    let r2 = line.distance_to_point(rig.translation);
    (b1.vector.norm() * r1) / (b2.vector.norm() * r2)
}

/// Current magnitude implied by one field vector and the estimated line:
/// inverts `|B| = μ0·I/(2π·r)` at the sensor's perpendicular distance and
/// reports rms (the field estimate is a peak amplitude, so the peak current
/// is divided by √2).
pub fn estimate_current_rms(line: &Line3, b: &FieldVectorEstimate, sensor_position: Vec3) -> f64 {
    let r = line.distance_to_point(sensor_position);
    std::f64::consts::TAU * r * b.vector.norm() / (MU_0 * std::f64::consts::SQRT_2)
}
