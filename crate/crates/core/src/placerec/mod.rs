//! Place-recognition evaluation: cross-fold splits, pair mining, and
//! Recall@N over precomputed descriptors.

pub mod mining;
pub mod recall;
pub mod splits;

use nalgebra::{Point3, Vector3};

use crate::error::{CoreError, Result};
use crate::geom::Pose;

pub use mining::{mine_pairs, MinedPairs, PairMiningConfig};
pub use recall::{
    evaluate_cross_modal, evaluate_recall, DistanceMetric, EvalConfig, EvalMode, RecallCell,
    RecallReport,
};
pub use splits::{build_splits, Fold};

/// A set of global descriptors with poses and sequence labels.
#[derive(Debug, Clone)]
pub struct DescriptorSet {
    pub ids: Vec<u64>,
    /// Row-major N x dim descriptor matrix.
    pub vectors: Vec<f32>,
    pub dim: usize,
    pub poses: Vec<Pose>,
    pub sequence_labels: Vec<String>,
    pub timestamps: Vec<f64>,
}

impl DescriptorSet {
    pub fn new(
        ids: Vec<u64>,
        vectors: Vec<f32>,
        dim: usize,
        poses: Vec<Pose>,
        sequence_labels: Vec<String>,
        timestamps: Vec<f64>,
    ) -> Result<Self> {
        let n = ids.len();
        if dim == 0 && n > 0 {
            return Err(CoreError::InvalidInput("descriptor dim must be > 0".into()));
        }
        if vectors.len() != n * dim {
            return Err(CoreError::LengthMismatch(format!(
                "{} descriptor values for {n} records of dim {dim}",
                vectors.len()
            )));
        }
        if poses.len() != n || sequence_labels.len() != n || timestamps.len() != n {
            return Err(CoreError::LengthMismatch(format!(
                "ids {} poses {} labels {} timestamps {}",
                n,
                poses.len(),
                sequence_labels.len(),
                timestamps.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidInput("non-finite descriptor value".into()));
        }
        Ok(DescriptorSet {
            ids,
            vectors,
            dim,
            poses,
            sequence_labels,
            timestamps,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, i: usize) -> Point3<f64> {
        self.poses[i].position()
    }

    /// Sorted unique sequence labels present in the set.
    pub fn sequences(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.sequence_labels.clone();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Record indices belonging to one sequence, ascending.
    pub fn indices_of(&self, label: &str) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.sequence_labels[i] == label)
            .collect()
    }
}

/// Camera yaw: the optical axis (+z in the camera/body frame) projected
/// onto the world horizontal plane. Returns `None` when the axis points
/// straight up or down.
pub fn pose_yaw(pose: &Pose) -> Option<f64> {
    let axis: Vector3<f64> = pose.apply_rotation(&Vector3::z());
    let norm = (axis.x * axis.x + axis.y * axis.y).sqrt();
    if norm < 1e-9 {
        None
    } else {
        Some(axis.y.atan2(axis.x))
    }
}

/// Absolute heading difference in degrees, wrapped to [0, 180]. `None`
/// when either yaw is undefined.
pub fn heading_difference_deg(a: &Pose, b: &Pose) -> Option<f64> {
    let (ya, yb) = (pose_yaw(a)?, pose_yaw(b)?);
    let mut d = (ya - yb).abs() % (2.0 * std::f64::consts::PI);
    if d > std::f64::consts::PI {
        d = 2.0 * std::f64::consts::PI - d;
    }
    Some(d.to_degrees())
}

/// Environment name for a sequence label: the prefix before the dash
/// (V -> Venman, K -> Karawatha), or the prefix itself otherwise.
pub fn environment_of(label: &str) -> String {
    let prefix = label.split('-').next().unwrap_or(label);
    match prefix {
        "V" => "Venman".to_string(),
        "K" => "Karawatha".to_string(),
        other => other.to_string(),
    }
}
