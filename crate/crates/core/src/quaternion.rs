//! Minimal unit-quaternion algebra for orientation primitives.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Quaternion<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Rotation by `yaw` radians about the z axis.
    pub fn from_yaw(yaw: T) -> Self {
        let h = yaw * T::lit(0.5);
        Self::new(h.cos(), T::zero(), T::zero(), h.sin())
    }

    pub fn from_slice(v: &[T]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn normalized(self) -> Self {
        self.scale(T::one() / self.norm())
    }

    /// Hamilton product `self ⊗ o`.
    pub fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Logarithm of a unit quaternion as a rotation half-vector
    /// (`exp(log(q)) == q`, with `2·log(q)` the rotation vector).
    pub fn log(self) -> [T; 3] {
        let vn = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        if vn == T::zero() {
            return [T::zero(); 3];
        }
        let s = vn.atan2(self.w) / vn;
        [self.x * s, self.y * s, self.z * s]
    }

    pub fn exp(r: [T; 3]) -> Self {
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if n == T::zero() {
            return Self::identity();
        }
        let s = n.sin() / n;
        Self::new(n.cos(), r[0] * s, r[1] * s, r[2] * s)
    }

    /// Rotation angle between two unit quaternions, in `[0, π]`.
    pub fn angle_to(self, o: Self) -> T {
        let d = self.dot(o).abs().min(T::one());
        T::lit(2.0) * d.acos()
    }

    /// Rotation vector taking `self` to `target`: `2·log(target ⊗ self*)`.
    pub fn error_to(self, target: Self) -> [T; 3] {
        let l = target.mul(self.conj()).log();
        let two = T::lit(2.0);
        [l[0] * two, l[1] * two, l[2] * two]
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_inverts_log() {
        let q = Quaternion::new(0.3, -0.4, 0.5, 0.7f64).normalized();
        let back = Quaternion::exp(q.log());
        assert!((back.dot(q) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn yaw_error_is_rotation_vector() {
        let a = Quaternion::<f64>::identity();
        let b = Quaternion::from_yaw(std::f64::consts::FRAC_PI_2);
        let e = a.error_to(b);
        assert!(e[0].abs() < 1e-15 && e[1].abs() < 1e-15);
        assert!((e[2] - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert!((a.angle_to(b) - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn self_error_is_exactly_zero() {
        let q = Quaternion::new(0.1, 0.2, -0.3, 0.9f64).normalized();
        assert_eq!(q.error_to(q), [0.0; 3]);
    }
}
