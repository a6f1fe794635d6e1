//! Pinhole camera model and frustum predicates.

use nalgebra::Point3;

use crate::error::{CoreError, Result};
use crate::geom::pose::Pose;

/// Points with camera-frame z at or below this are treated as behind the
/// camera; exact z = 0 is a pole of the projection.
pub const Z_MIN: f64 = 1e-3;

/// Pinhole intrinsics, image size, and the body-to-camera extrinsic.
#[derive(Debug, Clone, Copy)]
pub struct CameraRig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Maps sensor/body-frame points into the camera frame.
    pub extrinsic: Pose,
}

impl CameraRig {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        extrinsic: Pose,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(CoreError::InvalidInput(format!(
                "principal point ({cx}, {cy}) outside image {width}x{height}"
            )));
        }
        Ok(CameraRig {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            extrinsic,
        })
    }

    /// Camera pose in the world frame for a given body pose: the body pose
    /// composed with the inverse extrinsic.
    pub fn camera_pose(&self, body_pose: &Pose) -> Pose {
        let mut cam = body_pose.compose(&self.extrinsic.inverse());
        if let Some(t) = body_pose.timestamp() {
            cam = cam.with_timestamp(t);
        }
        cam
    }
}

/// Outcome of projecting a camera-frame point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// Continuous pixel coordinates and the camera-frame depth (z).
    Pixel { u: f64, v: f64, depth: f64 },
    /// z <= Z_MIN.
    Behind,
    /// Projects outside [0, width) x [0, height).
    OutOfBounds,
}

impl Projection {
    pub fn pixel(&self) -> Option<(f64, f64, f64)> {
        match *self {
            Projection::Pixel { u, v, depth } => Some((u, v, depth)),
            _ => None,
        }
    }
}

/// Project a camera-frame point through the pinhole model.
pub fn project_point(p_cam: &Point3<f64>, rig: &CameraRig) -> Projection {
    if p_cam.z <= Z_MIN {
        return Projection::Behind;
    }
    let u = rig.fx * p_cam.x / p_cam.z + rig.cx;
    let v = rig.fy * p_cam.y / p_cam.z + rig.cy;
    if u < 0.0 || u >= rig.width as f64 || v < 0.0 || v >= rig.height as f64 {
        return Projection::OutOfBounds;
    }
    Projection::Pixel {
        u,
        v,
        depth: p_cam.z,
    }
}

/// Back-project pixel coordinates and projective depth into the camera frame.
pub fn unproject(u: f64, v: f64, depth: f64, rig: &CameraRig) -> Point3<f64> {
    Point3::new(
        (u - rig.cx) / rig.fx * depth,
        (v - rig.cy) / rig.fy * depth,
        depth,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn test_rig() -> CameraRig {
        CameraRig::new(100.0, 100.0, 50.0, 50.0, 100, 100, Pose::identity()).unwrap()
    }

    #[test]
    fn on_axis_point_hits_principal_point() {
        let p = project_point(&Point3::new(0.0, 0.0, 5.0), &test_rig());
        assert_eq!(
            p,
            Projection::Pixel {
                u: 50.0,
                v: 50.0,
                depth: 5.0
            }
        );
    }

    #[test]
    fn behind_camera() {
        assert_eq!(
            project_point(&Point3::new(0.0, 0.0, -1.0), &test_rig()),
            Projection::Behind
        );
        assert_eq!(
            project_point(&Point3::new(0.0, 0.0, 0.0), &test_rig()),
            Projection::Behind
        );
    }

    #[test]
    fn out_of_bounds() {
        // u = 100 * 10/5 + 50 = 250.
        assert_eq!(
            project_point(&Point3::new(10.0, 0.0, 5.0), &test_rig()),
            Projection::OutOfBounds
        );
    }

    #[test]
    fn project_unproject_round_trip() {
        let rig = test_rig();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 1000 {
            let p = Point3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.01..50.0),
            );
            if let Projection::Pixel { u, v, depth } = project_point(&p, &rig) {
                let back = unproject(u, v, depth, &rig);
                assert!((back - p).norm() < 1e-6);
                checked += 1;
            }
        }
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraRig::new(0.0, 1.0, 5.0, 5.0, 10, 10, Pose::identity()).is_err());
        assert!(CameraRig::new(1.0, 1.0, 15.0, 5.0, 10, 10, Pose::identity()).is_err());
    }
}
