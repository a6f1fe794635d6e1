//! Time-indexed pose sequences and pose interpolation.

use nalgebra::Vector3;

use crate::error::{CoreError, Result};
use crate::geom::pose::{slerp, Pose};

/// A time-ordered sequence of stamped poses in a named frame.
#[derive(Debug, Clone)]
pub struct Trajectory {
    poses: Vec<Pose>,
    frame_id: String,
}

impl Trajectory {
    /// Timestamps must be present on every pose and strictly increasing.
    pub fn new(poses: Vec<Pose>, frame_id: impl Into<String>) -> Result<Self> {
        if poses.is_empty() {
            return Err(CoreError::InvalidInput("empty trajectory".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, p) in poses.iter().enumerate() {
            let t = p.timestamp().ok_or_else(|| {
                CoreError::InvalidInput(format!("trajectory pose {i} has no timestamp"))
            })?;
            if t <= prev {
                return Err(CoreError::InvalidInput(format!(
                    "trajectory timestamps not strictly increasing at index {i}: {prev} -> {t}"
                )));
            }
            prev = t;
        }
        Ok(Trajectory {
            poses,
            frame_id: frame_id.into(),
        })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn t_first(&self) -> f64 {
        self.poses.first().unwrap().timestamp().unwrap()
    }

    pub fn t_last(&self) -> f64 {
        self.poses.last().unwrap().timestamp().unwrap()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_first() && t <= self.t_last()
    }
}

/// Interpolate the trajectory at time `t`.
///
/// Rotation follows the shortest-arc slerp between the bracketing poses and
/// translation interpolates linearly, with u = (t - t1) / (t2 - t1). A query
/// landing exactly on a stored pose returns it unchanged, so pose(t1) is
/// (q1, x1) bit-exactly.
pub fn interpolate_pose(trajectory: &Trajectory, t: f64) -> Result<Pose> {
    if !t.is_finite() {
        return Err(CoreError::InvalidInput(format!("non-finite query time {t}")));
    }
    let poses = trajectory.poses();
    let first = trajectory.t_first();
    let last = trajectory.t_last();
    if t < first || t > last {
        return Err(CoreError::OutOfRange {
            query: t,
            first,
            last,
        });
    }
    if poses.len() < 2 {
        return Err(CoreError::DegenerateBracket(format!(
            "trajectory has {} pose(s); interpolation needs at least 2",
            poses.len()
        )));
    }
    // Index of the first pose with timestamp >= t.
    let hi = poses.partition_point(|p| p.timestamp().unwrap() < t);
    if let Some(p) = poses.get(hi) {
        if p.timestamp().unwrap() == t {
            return Ok(*p);
        }
    }
    let p1 = &poses[hi - 1];
    let p2 = &poses[hi];
    let t1 = p1.timestamp().unwrap();
    let t2 = p2.timestamp().unwrap();
    if t2 == t1 {
        return Err(CoreError::DegenerateBracket(format!("t1 == t2 == {t1}")));
    }
    let u = (t - t1) / (t2 - t1);
    let rotation = slerp(&p1.rotation(), &p2.rotation(), u);
    let translation: Vector3<f64> = p1.translation() * (1.0 - u) + p2.translation() * u;
    Ok(Pose::from_parts(rotation, translation, Some(t)))
}
