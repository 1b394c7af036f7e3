//! Unit quaternions with Hamilton product, scalar-first storage and a
//! canonical `w >= 0` hemisphere.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Mul;

use crate::error::{Error, Result};

/// Tolerance used when deciding whether a vector or quaternion is unit length.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// A rotation quaternion `w + xi + yj + zk`.
///
/// Values built through [`Quat::new`], [`Quat::from_axis_angle`] or the
/// product operator are unit-norm and canonicalized.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl fmt::Debug for Quat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Quat({:.6}, {:.6}, {:.6}, {:.6})", self.w, self.x, self.y, self.z)
    }
}

impl Default for Quat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Raw components, no normalization. Callers are expected to know the
    /// value is already a valid rotation (or to call [`Quat::normalized`]).
    pub const fn from_raw(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    /// Builds a quaternion from components that must already be unit length
    /// (within [`UNIT_TOLERANCE`]). The result is renormalized and canonicalized.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Quat { w, x, y, z };
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Validation(format!("quaternion norm {n} is not 1")));
        }
        Ok(q.scale(1.0 / n).canonicalize())
    }

    /// Rotation of `angle` radians about the unit vector `axis`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Validation(format!("rotation axis norm {n} is not 1")));
        }
        if !angle.is_finite() {
            return Err(Error::Validation(format!("rotation angle {angle} is not finite")));
        }
        Ok(Self::axis_angle_unchecked(axis, angle))
    }

    /// Same as [`Quat::from_axis_angle`] for axes already known to be unit.
    #[inline]
    pub(crate) fn axis_angle_unchecked(axis: [f64; 3], angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Quat { w: c, x: axis[0] * s, y: axis[1] * s, z: axis[2] * s }.canonicalize()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// 4-D Euclidean inner product.
    #[inline]
    pub fn dot(&self, other: &Quat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(&self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn neg(&self) -> Quat {
        self.scale(-1.0)
    }

    fn scale(&self, s: f64) -> Quat {
        Quat { w: self.w * s, x: self.x * s, y: self.y * s, z: self.z * s }
    }

    pub fn normalized(&self) -> Quat {
        self.scale(1.0 / self.norm())
    }

    /// Flips the sign so that `w >= 0`. For `w == 0` the first nonzero
    /// vector component is made positive so the choice is still unique.
    pub fn canonicalize(&self) -> Quat {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            self.neg()
        } else {
            *self
        }
    }

    /// Raw Hamilton product, no renormalization.
    #[inline]
    pub fn hamilton(&self, b: &Quat) -> Quat {
        let a = self;
        Quat {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    /// Hamilton product, renormalized and canonicalized.
    pub fn multiply(&self, b: &Quat) -> Quat {
        self.hamilton(b).normalized().canonicalize()
    }

    /// Rotates a 3-vector.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let p = Quat { w: 0.0, x: v[0], y: v[1], z: v[2] };
        let r = self.hamilton(&p).hamilton(&self.conjugate());
        [r.x, r.y, r.z]
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        2.0 * self.w.abs().min(1.0).acos()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|c| c.is_finite())
    }
}

impl Mul for Quat {
    type Output = Quat;

    fn mul(self, rhs: Quat) -> Quat {
        self.multiply(&rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    const Z: [f64; 3] = [0.0, 0.0, 1.0];
    const X: [f64; 3] = [1.0, 0.0, 0.0];

    fn close(a: Quat, b: Quat, tol: f64) -> bool {
        a.as_array().iter().zip(b.as_array()).all(|(p, q)| (p - q).abs() < tol)
    }

    #[test]
    fn identity_is_neutral() {
        let q = Quat::from_axis_angle([0.6, 0.0, 0.8], 1.1).unwrap();
        assert!(close(Quat::IDENTITY * q, q, 1e-15));
        assert!(close(q * Quat::IDENTITY, q, 1e-15));
    }

    #[test]
    fn same_axis_angles_add() {
        let half = Quat::from_axis_angle(Z, FRAC_PI_2).unwrap();
        let full = Quat::from_axis_angle(Z, PI).unwrap();
        assert!(close(half * half, full, 1e-12));
    }

    #[test]
    fn conjugate_is_inverse() {
        let q = Quat::from_axis_angle([0.0, 0.6, 0.8], 2.3).unwrap();
        assert!(close(q * q.conjugate(), Quat::IDENTITY, 1e-12));
    }

    #[test]
    fn axis_angle_examples() {
        assert_eq!(Quat::from_axis_angle(Z, 0.0).unwrap(), Quat::IDENTITY);
        assert!(close(Quat::from_axis_angle(Z, PI).unwrap(), Quat::from_raw(0.0, 0.0, 0.0, 1.0), 1e-15));
        let h = SQRT_2 / 2.0;
        assert!(close(Quat::from_axis_angle(X, FRAC_PI_2).unwrap(), Quat::from_raw(h, h, 0.0, 0.0), 1e-15));
    }

    #[test]
    fn rejects_non_unit_axis() {
        assert!(Quat::from_axis_angle([1.0, 1.0, 0.0], 0.3).is_err());
        assert!(Quat::from_axis_angle([1.0, 0.0, 0.0], f64::NAN).is_err());
        assert!(Quat::new(0.5, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn canonical_hemisphere() {
        let q = Quat::new(-0.6, 0.0, 0.8, 0.0).unwrap();
        assert!(q.w >= 0.0);
        assert!((q.y + 0.8).abs() < 1e-15);
    }

    #[test]
    fn rotate_vector() {
        let q = Quat::from_axis_angle(Z, FRAC_PI_2).unwrap();
        let v = q.rotate([1.0, 0.0, 0.0]);
        assert!((v[0]).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
    }
}
