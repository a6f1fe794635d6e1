//! Rigid-body poses with optional timestamps.

use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{CoreError, Result};

/// A rigid transform (unit quaternion + translation), optionally stamped.
///
/// The rotation maps body-frame vectors into the parent frame, i.e. for a
/// trajectory pose `p_world = R * p_body + t`. The quaternion is
/// renormalized on every construction so file inputs with rounding error
/// stay within 1e-9 of unit norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
    timestamp: Option<f64>,
}

impl Pose {
    /// Construct from quaternion components in (w, x, y, z) order.
    pub fn from_wxyz(
        w: f64,
        x: f64,
        y: f64,
        z: f64,
        translation: Vector3<f64>,
        timestamp: Option<f64>,
    ) -> Result<Self> {
        let q = Quaternion::new(w, x, y, z);
        if !q.coords.iter().all(|v| v.is_finite())
            || !translation.iter().all(|v| v.is_finite())
        {
            return Err(CoreError::InvalidInput("non-finite pose components".into()));
        }
        if q.norm() < 1e-12 {
            return Err(CoreError::InvalidInput("zero-norm quaternion".into()));
        }
        if let Some(t) = timestamp {
            if !t.is_finite() {
                return Err(CoreError::InvalidInput("non-finite timestamp".into()));
            }
        }
        Ok(Pose {
            rotation: UnitQuaternion::from_quaternion(q),
            translation,
            timestamp,
        })
    }

    pub fn from_parts(
        rotation: UnitQuaternion<f64>,
        translation: Vector3<f64>,
        timestamp: Option<f64>,
    ) -> Self {
        Pose {
            rotation: UnitQuaternion::new_normalize(rotation.into_inner()),
            translation,
            timestamp,
        }
    }

    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            timestamp: None,
        }
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn position(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }

    pub fn timestamp(&self) -> Option<f64> {
        self.timestamp
    }

    pub fn with_timestamp(mut self, t: f64) -> Self {
        self.timestamp = Some(t);
        self
    }

    /// Apply the transform: body frame -> parent frame.
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotate a direction vector (no translation).
    pub fn apply_rotation(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Map a parent-frame point into this pose's body frame: R^-1 (p - t).
    pub fn apply_inverse(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.rotation.inverse();
        Pose {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
            timestamp: self.timestamp,
        }
    }

    /// `self` then applied after `other`: (self ∘ other)(p) = self(other(p)).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            timestamp: self.timestamp,
        }
    }
}

/// Map world-frame points into the pose's own frame: p' = R^-1 (p - t).
///
/// With a camera pose (camera-in-world) this yields camera-frame points.
pub fn transform_points(points: &[Point3<f64>], pose: &Pose) -> Vec<Point3<f64>> {
    let rot_inv = pose.rotation().inverse();
    let t = pose.translation();
    points.iter().map(|p| rot_inv * (p - t)).collect()
}

/// Shortest-arc spherical linear interpolation between unit quaternions.
///
/// Negates one endpoint when the dot product is negative so the path never
/// exceeds 180 degrees, and falls back to normalized linear interpolation
/// when the endpoints are closer than ~1e-6 rad, where the sin division
/// is singular. The result is renormalized.
pub fn slerp(q1: &UnitQuaternion<f64>, q2: &UnitQuaternion<f64>, u: f64) -> UnitQuaternion<f64> {
    let a = q1.into_inner();
    let mut b = q2.into_inner();
    let mut dot = a.dot(&b);
    if dot < 0.0 {
        b = -b;
        dot = -dot;
    }
    // cos(theta/2) close to 1 <=> rotation angle below ~1e-6 rad.
    let q = if dot >= 1.0 - 1e-13 {
        a.lerp(&b, u)
    } else {
        let half = dot.clamp(-1.0, 1.0).acos();
        let sin_half = half.sin();
        a * ((1.0 - u) * half).sin() / sin_half + b * (u * half).sin() / sin_half
    };
    UnitQuaternion::from_quaternion(q)
}
