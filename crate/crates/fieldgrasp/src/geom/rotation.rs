use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::{GeomError, UnitVec3, Vec3, ROTATION_TOL};

/// A proper rotation (orthonormal, determinant +1), stored row-major.
///
/// Every construction path validates orthonormality and determinant within
/// [`ROTATION_TOL`], so any value of this type can be trusted as a rotation.
/// Serializes as three rows of three numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct RotationMatrix {
    m: [[f64; 3]; 3],
}

impl RotationMatrix {
    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Validates and wraps a row-major matrix.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, GeomError> {
        let r = Self { m };
        let defect = r.orthonormality_defect();
        if !(defect <= ROTATION_TOL) {
            return Err(GeomError::InvalidRotation("columns are not orthonormal"));
        }
        if !((r.determinant() - 1.0).abs() <= ROTATION_TOL) {
            return Err(GeomError::InvalidRotation("determinant is not +1"));
        }
        Ok(r)
    }

    /// Builds a rotation whose columns are the given unit vectors; fails if
    /// they are not an orthonormal right-handed triple.
    pub fn from_columns(c0: UnitVec3, c1: UnitVec3, c2: UnitVec3) -> Result<Self, GeomError> {
        let (a, b, c) = (c0.as_vec3(), c1.as_vec3(), c2.as_vec3());
        Self::from_matrix([[a.x, b.x, c.x], [a.y, b.y, c.y], [a.z, b.z, c.z]])
    }

    /// Rodrigues formula; valid by construction for any finite angle.
    pub fn from_axis_angle(axis: UnitVec3, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        let (x, y, z) = (axis.x(), axis.y(), axis.z());
        Self {
            m: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        }
    }

    /// Intrinsic roll (x), pitch (y), yaw (z) angles: `Rz(yaw)·Ry(pitch)·Rx(roll)`.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        let x = UnitVec3::try_from([1.0, 0.0, 0.0]).expect("unit");
        let y = UnitVec3::try_from([0.0, 1.0, 0.0]).expect("unit");
        let z = UnitVec3::try_from([0.0, 0.0, 1.0]).expect("unit");
        Self::from_axis_angle(z, yaw)
            * Self::from_axis_angle(y, pitch)
            * Self::from_axis_angle(x, roll)
    }

    /// Rotates a vector.
    pub fn apply(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        )
    }

    /// Transpose, which for a rotation is also the inverse.
    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn column(&self, i: usize) -> Vec3 {
        Vec3::new(self.m[0][i], self.m[1][i], self.m[2][i])
    }

    pub fn to_array(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max-entry deviation of RᵀR from the identity. NaN entries make the
    /// defect NaN, which every `<= tol` check rejects.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                let d = (self.column(i).dot(self.column(j)) - expected).abs();
                if !(d <= worst) {
                    worst = d;
                }
            }
        }
        worst
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    /// Matrix product: `(a * b).apply(v) == a.apply(b.apply(v))`.
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        RotationMatrix { m }
    }
}

impl TryFrom<[[f64; 3]; 3]> for RotationMatrix {
    type Error = GeomError;
    fn try_from(m: [[f64; 3]; 3]) -> Result<Self, GeomError> {
        Self::from_matrix(m)
    }
}

impl From<RotationMatrix> for [[f64; 3]; 3] {
    fn from(r: RotationMatrix) -> Self {
        r.m
    }
}

/// Rotation followed by translation: `p ↦ R·p + t`.
///
/// Used both as a frame placement (pose of frame B expressed in frame A,
/// mapping B-coordinates to A-coordinates) and as the sensor-rig convention
/// documented on `localize::SensorRig`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: RotationMatrix::identity(),
            translation: Vec3::zero(),
        }
    }

    pub fn new(rotation: RotationMatrix, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }

    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.apply(v)
    }

    /// `self ∘ inner`: applies `inner` first. For pose chains
    /// `T_a_c = T_a_b.compose(&T_b_c)`.
    pub fn compose(&self, inner: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation.apply(inner.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -rt.apply(self.translation),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use approx::assert_relative_eq;

    use super::*;

    fn unit_z() -> UnitVec3 {
        UnitVec3::try_from([0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn ninety_degrees_about_z_maps_x_to_y() {
        let r = RotationMatrix::from_axis_angle(unit_z(), FRAC_PI_2);
        let v = r.apply(Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(v.y, 1.0, epsilon = 1e-15);
        assert_relative_eq!(v.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn from_matrix_rejects_reflections_and_shears() {
        let reflection = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        assert!(RotationMatrix::from_matrix(reflection).is_err());
        let shear = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(RotationMatrix::from_matrix(shear).is_err());
        let nan = [[f64::NAN, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(RotationMatrix::from_matrix(nan).is_err());
    }

    #[test]
    fn transpose_inverts() {
        let r = RotationMatrix::from_rpy(0.3, -0.7, 1.9);
        let v = Vec3::new(0.2, -1.0, 3.0);
        let back = r.transpose().apply(r.apply(v));
        assert_relative_eq!(back.x, v.x, epsilon = 1e-14);
        assert_relative_eq!(back.y, v.y, epsilon = 1e-14);
        assert_relative_eq!(back.z, v.z, epsilon = 1e-14);
    }

    #[test]
    fn rigid_transform_composes_with_inverse_to_identity() {
        let t = RigidTransform::new(
            RotationMatrix::from_rpy(0.1, 0.2, 0.3),
            Vec3::new(1.0, -2.0, 0.5),
        );
        let id = t.compose(&t.inverse());
        let p = Vec3::new(4.0, 5.0, -6.0);
        let q = id.apply_point(p);
        assert_relative_eq!(q.distance_to(p), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn serde_rejects_non_rotation() {
        let bad = "[[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,2.0]]";
        assert!(serde_json::from_str::<RotationMatrix>(bad).is_err());
        let good = "[[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]]";
        assert!(serde_json::from_str::<RotationMatrix>(good).is_ok());
    }
}
