//! Camera rig JSON: intrinsics, image size, and the body-to-camera
//! extrinsic as `{translation: [x,y,z], quaternion_xyzw: [...]}`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::{CameraRig, Pose};

#[derive(Debug, Serialize, Deserialize)]
pub struct ExtrinsicJson {
    pub translation: [f64; 3],
    pub quaternion_xyzw: [f64; 4],
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CameraRigJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub extrinsic: ExtrinsicJson,
}

impl CameraRigJson {
    pub fn into_rig(self) -> Result<CameraRig> {
        let [x, y, z] = self.extrinsic.translation;
        let [qx, qy, qz, qw] = self.extrinsic.quaternion_xyzw;
        let extrinsic = Pose::from_wxyz(qw, qx, qy, qz, Vector3::new(x, y, z), None)?;
        CameraRig::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            extrinsic,
        )
    }

    pub fn from_rig(rig: &CameraRig) -> Self {
        let t = rig.extrinsic.translation();
        let q = rig.extrinsic.rotation().into_inner();
        CameraRigJson {
            fx: rig.fx,
            fy: rig.fy,
            cx: rig.cx,
            cy: rig.cy,
            width: rig.width,
            height: rig.height,
            extrinsic: ExtrinsicJson {
                translation: [t.x, t.y, t.z],
                quaternion_xyzw: [q.i, q.j, q.k, q.w],
            },
        }
    }
}

pub fn read_rig_json(path: &Path) -> Result<CameraRig> {
    let r = BufReader::new(File::open(path)?);
    let parsed: CameraRigJson = serde_json::from_reader(r).map_err(|e| CoreError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parsed.into_rig()
}

pub fn write_rig_json(path: &Path, rig: &CameraRig) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, &CameraRigJson::from_rig(rig))
        .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rig.json");
        let rig = CameraRig::new(
            500.0,
            510.0,
            320.0,
            240.0,
            640,
            480,
            Pose::from_wxyz(0.9, 0.1, 0.2, 0.3, Vector3::new(0.1, -0.2, 0.05), None).unwrap(),
        )
        .unwrap();
        write_rig_json(&path, &rig).unwrap();
        let back = read_rig_json(&path).unwrap();
        assert_eq!(back.width, 640);
        assert!((back.fx - 500.0).abs() < 1e-12);
        assert!(back.extrinsic.rotation().angle_to(&rig.extrinsic.rotation()) < 1e-12);
    }

    #[test]
    fn rejects_invalid_intrinsics() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rig.json");
        std::fs::write(
            &path,
            r#"{"fx": -1, "fy": 1, "cx": 1, "cy": 1, "width": 10, "height": 10,
                "extrinsic": {"translation": [0,0,0], "quaternion_xyzw": [0,0,0,1]}}"#,
        )
        .unwrap();
        assert!(read_rig_json(&path).is_err());
    }
}
