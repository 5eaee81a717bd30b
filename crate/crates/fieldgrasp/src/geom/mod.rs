//! Minimal 3D geometry: vectors, unit vectors, rotations, rigid transforms
//! and infinite lines in canonical form.
//!
//! Everything is `f64` and kept deliberately small; the localization math
//! only needs dot/cross products, projections onto lines and the common
//! perpendicular between two skew lines.

mod line;
mod rotation;
mod vec3;

pub use line::{closest_points_between_lines, Line3};
pub use rotation::{RigidTransform, RotationMatrix};
pub use vec3::{UnitVec3, Vec3};

use thiserror::Error;

/// Unit directions whose cross-product norm (the sine of the angle between
/// them) falls below this are treated as parallel. Far above f64 rounding
/// noise, far below any angle that is distinguishable at lab scale (meters).
pub const PARALLEL_EPS: f64 = 1e-9;

/// Maximum allowed orthonormality defect (max |RᵀR − I| entry) and
/// determinant error for a matrix accepted as a rotation.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeomError {
    /// A vector with zero (or non-finite) norm cannot be normalized.
    #[error("cannot normalize a zero or non-finite vector")]
    DegenerateVector,
    /// The two line directions are parallel within [`PARALLEL_EPS`]; the
    /// closest-point pair is not unique.
    #[error("lines are parallel within tolerance; no unique closest points")]
    ParallelLines,
    /// The matrix fails the orthonormality or determinant check.
    #[error("not a proper rotation matrix: {0}")]
    InvalidRotation(&'static str),
}
