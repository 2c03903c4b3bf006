//! Small 3D vector and rigid-motion primitives used by every other module.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    #[inline]
    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    /// Any unit vector orthogonal to `self` (which must be nonzero).
    pub fn any_orthonormal(self) -> Vec3 {
        let a = if self.x.abs() < 0.9 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        self.cross(a).normalized()
    }

    pub fn max_abs_component(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Scalar triple product det[a b c] = a · (b × c).
#[inline]
pub fn triple(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    a.dot(b.cross(c))
}

/// 3x3 matrix in row-major order, used for the rotation part of a rigid motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    #[inline]
    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        triple(
            Vec3::new(m[0][0], m[1][0], m[2][0]),
            Vec3::new(m[0][1], m[1][1], m[2][1]),
            Vec3::new(m[0][2], m[1][2], m[2][2]),
        )
    }

    /// Max absolute entry of Rᵀ R − I; zero for an exactly orthogonal matrix.
    pub fn orthogonality_defect(&self) -> f64 {
        let m = &self.0;
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn rotation_z(angle: f64) -> Mat3 {
        let (s, c) = angle.sin_cos();
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn rotation_axis(axis: Vec3, angle: f64) -> Mat3 {
        let u = axis.normalized();
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Mat3([
            [t * u.x * u.x + c, t * u.x * u.y - s * u.z, t * u.x * u.z + s * u.y],
            [t * u.x * u.y + s * u.z, t * u.y * u.y + c, t * u.y * u.z - s * u.x],
            [t * u.x * u.z - s * u.y, t * u.y * u.z + s * u.x, t * u.z * u.z + c],
        ])
    }

    /// Reflection z -> -z, determinant -1.
    pub fn mirror_z() -> Mat3 {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
    }
}

/// Orthogonal map (det ±1) with uniform scale and translation,
/// applied as x ↦ scale · R x + translation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RigidMotion {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub scale: f64,
}

impl RigidMotion {
    pub const ORTHOGONALITY_TOL: f64 = 1e-12;

    pub fn new(rotation: Mat3, translation: Vec3, scale: f64) -> Result<Self, String> {
        let defect = rotation.orthogonality_defect();
        if defect > Self::ORTHOGONALITY_TOL {
            return Err(format!("rotation is not orthogonal (defect {defect:.3e})"));
        }
        let det = rotation.det();
        if (det.abs() - 1.0).abs() > 1e-9 {
            return Err(format!("rotation determinant {det} is not ±1"));
        }
        if !(scale > 0.0) {
            return Err(format!("scale must be positive, got {scale}"));
        }
        Ok(RigidMotion { rotation, translation, scale })
    }

    pub fn identity() -> Self {
        RigidMotion { rotation: Mat3::IDENTITY, translation: Vec3::ZERO, scale: 1.0 }
    }

    pub fn mirror_z() -> Self {
        RigidMotion { rotation: Mat3::mirror_z(), translation: Vec3::ZERO, scale: 1.0 }
    }

    pub fn rotation_z(angle: f64) -> Self {
        RigidMotion { rotation: Mat3::rotation_z(angle), translation: Vec3::ZERO, scale: 1.0 }
    }

    pub fn translation(t: Vec3) -> Self {
        RigidMotion { rotation: Mat3::IDENTITY, translation: t, scale: 1.0 }
    }

    pub fn scaling(s: f64) -> Self {
        RigidMotion { rotation: Mat3::IDENTITY, translation: Vec3::ZERO, scale: s }
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.apply(p) * self.scale + self.translation
    }

    /// Linear part only, for transforming tangents and other vectors.
    #[inline]
    pub fn apply_linear(&self, v: Vec3) -> Vec3 {
        self.rotation.apply(v) * self.scale
    }

    pub fn det(&self) -> f64 {
        self.rotation.det()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_product_basis() {
        let e1 = Vec3::new(1.0, 0.0, 0.0);
        let e2 = Vec3::new(0.0, 1.0, 0.0);
        let e3 = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(triple(e1, e2, e3), 1.0);
        assert_eq!(triple(e1, e1, e3), 0.0);
        assert_eq!(triple(e3, e2, e3), 0.0);
    }

    #[test]
    fn triple_product_cyclic() {
        let a = Vec3::new(0.3, -1.2, 2.0);
        let b = Vec3::new(1.7, 0.4, -0.6);
        let c = Vec3::new(-0.9, 0.8, 1.1);
        let t = triple(a, b, c);
        assert!((triple(b, c, a) - t).abs() < 1e-14);
        assert!((triple(c, a, b) - t).abs() < 1e-14);
        assert!((triple(b, a, c) + t).abs() < 1e-14);
    }

    #[test]
    fn rotation_is_orthogonal() {
        let r = Mat3::rotation_axis(Vec3::new(1.0, 2.0, -0.5), 1.234);
        assert!(r.orthogonality_defect() < 1e-14);
        assert!((r.det() - 1.0).abs() < 1e-14);
        assert!((Mat3::mirror_z().det() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_z_quarter_turn() {
        let m = RigidMotion::rotation_z(std::f64::consts::FRAC_PI_2);
        let p = m.apply(Vec3::new(1.0, 0.0, 0.0));
        assert!(p.dist(Vec3::new(0.0, 1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn bad_rotation_rejected() {
        let m = Mat3([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(RigidMotion::new(m, Vec3::ZERO, 1.0).is_err());
        assert!(RigidMotion::new(Mat3::IDENTITY, Vec3::ZERO, -2.0).is_err());
    }
}
