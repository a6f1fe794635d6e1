//! Sequence manifests: the JSON entry point tying a sequence's inputs
//! together. Relative paths resolve against the manifest's directory.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::{CameraRig, PointCloudMap, Trajectory};
use crate::io;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DeclaredStats {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub submap_count: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub sequence_label: String,
    pub trajectory_path: PathBuf,
    pub point_cloud_path: PathBuf,
    pub camera_rig_path: PathBuf,
    pub frame_timestamps_path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared_stats: Option<DeclaredStats>,
}

/// A manifest with every referenced file loaded.
#[derive(Debug)]
pub struct LoadedSequence {
    pub manifest: SequenceManifest,
    pub map: PointCloudMap,
    pub trajectory: Trajectory,
    pub rig: CameraRig,
    /// (timestamp seconds, optional pass-through reference such as an RGB
    /// path).
    pub frames: Vec<(f64, Option<String>)>,
}

impl SequenceManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(path).map_err(|e| CoreError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?);
        let mut manifest: SequenceManifest =
            serde_json::from_reader(r).map_err(|e| CoreError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        if let Some(base) = path.parent() {
            manifest.trajectory_path = resolve(base, &manifest.trajectory_path);
            manifest.point_cloud_path = resolve(base, &manifest.point_cloud_path);
            manifest.camera_rig_path = resolve(base, &manifest.camera_rig_path);
            manifest.frame_timestamps_path = resolve(base, &manifest.frame_timestamps_path);
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let w = std::io::BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(w, self)
            .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
        Ok(())
    }

    /// Load every referenced file, cross-checking declared stats (rounded
    /// figures are expected, so only mismatches beyond 2% warn).
    pub fn load(&self) -> Result<LoadedSequence> {
        let trajectory = io::read_trajectory_csv(&self.trajectory_path, "world")?;
        let map = io::read_ply(&self.point_cloud_path)?;
        let rig = io::read_rig_json(&self.camera_rig_path)?;
        let frames = io::read_frame_timestamps(&self.frame_timestamps_path)?;

        if let Some(stats) = &self.declared_stats {
            if let Some(declared) = stats.image_count {
                warn_mismatch("image_count", declared as f64, frames.len() as f64);
            }
            if let Some(declared_km) = stats.distance_km {
                let mut dist = 0.0;
                for w in trajectory.poses().windows(2) {
                    dist += (w[1].translation() - w[0].translation()).norm();
                }
                warn_mismatch("distance_km", declared_km, dist / 1000.0);
            }
        }
        Ok(LoadedSequence {
            manifest: self.clone(),
            map,
            trajectory,
            rig,
            frames,
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub(crate) fn warn_mismatch(name: &str, declared: f64, computed: f64) {
    let rel = (declared - computed).abs() / declared.abs().max(1.0);
    if rel > 0.02 {
        log::warn!(
            "declared {name} = {declared} differs from computed {computed:.3} ({:.1}%)",
            rel * 100.0
        );
    }
}
