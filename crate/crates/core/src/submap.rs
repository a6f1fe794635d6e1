//! Submap extraction: radius + time-window crops of the global map around
//! trajectory poses.

use nalgebra::Point3;

use crate::error::{CoreError, Result};
use crate::geom::{interpolate_pose, PointCloudMap, Pose, Trajectory};

/// Parameters for submap extraction.
///
/// `time_window` is the total window width, interpreted as +/- window/2
/// about the query time; `None` disables time filtering.
#[derive(Debug, Clone, Copy)]
pub struct SubmapSpec {
    pub radius: f64,
    pub time_window: Option<f64>,
    pub stride: f64,
}

impl Default for SubmapSpec {
    fn default() -> Self {
        SubmapSpec {
            radius: 30.0,
            time_window: Some(1.0),
            stride: 0.5,
        }
    }
}

impl SubmapSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "submap radius must be > 0, got {}",
                self.radius
            )));
        }
        if let Some(w) = self.time_window {
            if !(w >= 0.0) {
                return Err(CoreError::InvalidInput(format!(
                    "time window must be >= 0, got {w}"
                )));
            }
        }
        if !(self.stride > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "stride must be > 0, got {}",
                self.stride
            )));
        }
        Ok(())
    }
}

/// A local crop of the global map around a trajectory pose.
#[derive(Debug, Clone)]
pub struct Submap {
    pub center_pose: Pose,
    pub points: Vec<Point3<f64>>,
    /// Indices into the global map, ascending.
    pub source_indices: Vec<u32>,
}

/// Extract all points within `spec.radius` of the pose position and, when a
/// time window is configured, within +/- window/2 of the pose timestamp.
/// Both boundaries are inclusive.
pub fn extract_submap(map: &PointCloudMap, pose: &Pose, spec: &SubmapSpec) -> Result<Submap> {
    spec.validate()?;
    let candidates = map.points_within(&pose.position(), spec.radius);
    let source_indices = match spec.time_window {
        None => candidates,
        Some(window) => {
            let timestamps = map.timestamps().ok_or_else(|| {
                CoreError::MissingTimestamps(
                    "time filtering requested but the map has no per-point timestamps".into(),
                )
            })?;
            let center_t = pose.timestamp().ok_or_else(|| {
                CoreError::MissingTimestamps(
                    "time filtering requested but the center pose has no timestamp".into(),
                )
            })?;
            let half = window / 2.0;
            candidates
                .into_iter()
                .filter(|&i| (timestamps[i as usize] - center_t).abs() <= half)
                .collect()
        }
    };
    let points = source_indices
        .iter()
        .map(|&i| map.points()[i as usize])
        .collect();
    Ok(Submap {
        center_pose: *pose,
        points,
        source_indices,
    })
}

/// One submap per center time t_first, t_first + stride, ... <= t_last,
/// centered at the interpolated pose.
pub fn extract_submap_sequence(
    map: &PointCloudMap,
    trajectory: &Trajectory,
    spec: &SubmapSpec,
) -> Result<Vec<Submap>> {
    spec.validate()?;
    let mut out = Vec::new();
    for t in submap_center_times(trajectory, spec.stride) {
        let pose = interpolate_pose(trajectory, t)?;
        out.push(extract_submap(map, &pose, spec)?);
    }
    Ok(out)
}

/// Center times t_first + k * stride for k = 0..floor(span / stride),
/// with a small epsilon so an exact-multiple span includes its endpoint.
pub fn submap_center_times(trajectory: &Trajectory, stride: f64) -> Vec<f64> {
    let first = trajectory.t_first();
    let span = trajectory.t_last() - first;
    let steps = (span / stride + 1e-9).floor() as usize;
    (0..=steps).map(|k| first + k as f64 * stride).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn pose_at(x: [f64; 3], t: f64) -> Pose {
        Pose::from_parts(
            UnitQuaternion::identity(),
            nalgebra::Vector3::new(x[0], x[1], x[2]),
            Some(t),
        )
    }

    #[test]
    fn boundary_inclusion() {
        let map = PointCloudMap::new(
            vec![
                Point3::new(29.99, 0.0, 0.0),
                Point3::new(30.01, 0.0, 0.0),
                Point3::new(5.0, 0.0, 0.0),
            ],
            Some(vec![100.4, 100.0, 100.9]),
            None,
        )
        .unwrap();
        let spec = SubmapSpec::default();
        let sub = extract_submap(&map, &pose_at([0.0; 3], 100.0), &spec).unwrap();
        // 29.99m at +0.4s: inside both thresholds. 30.01m: outside radius.
        // 5m at +0.9s: outside the +/-0.5s window.
        assert_eq!(sub.source_indices, vec![0]);
    }

    #[test]
    fn missing_timestamps_is_an_error() {
        let map = PointCloudMap::new(vec![Point3::origin()], None, None).unwrap();
        let err = extract_submap(&map, &pose_at([0.0; 3], 0.0), &SubmapSpec::default());
        assert!(matches!(err, Err(CoreError::MissingTimestamps(_))));
        // Disabling the window makes the same call valid.
        let spec = SubmapSpec {
            time_window: None,
            ..SubmapSpec::default()
        };
        assert_eq!(
            extract_submap(&map, &pose_at([0.0; 3], 0.0), &spec)
                .unwrap()
                .source_indices,
            vec![0]
        );
    }

    #[test]
    fn matches_brute_force_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 100_000;
        let points: Vec<Point3<f64>> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(-50.0..50.0),
                )
            })
            .collect();
        let map = PointCloudMap::new(points.clone(), None, None).unwrap();
        let spec = SubmapSpec {
            radius: 30.0,
            time_window: None,
            stride: 0.5,
        };
        let center = pose_at([3.0, -4.0, 5.0], 0.0);
        let sub = extract_submap(&map, &center, &spec).unwrap();
        let r2 = spec.radius * spec.radius;
        let expect: Vec<u32> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| (*p - center.position()).norm_squared() <= r2)
            .map(|(i, _)| i as u32)
            .collect();
        assert_eq!(sub.source_indices, expect);
        // Determinism: same inputs, same output.
        let again = extract_submap(&map, &center, &spec).unwrap();
        assert_eq!(again.source_indices, sub.source_indices);
    }

    #[test]
    fn sequence_counts() {
        let map = PointCloudMap::new(vec![Point3::origin()], None, None).unwrap();
        let poses: Vec<Pose> = (0..=10).map(|i| pose_at([i as f64, 0.0, 0.0], i as f64)).collect();
        let traj = Trajectory::new(poses, "world").unwrap();
        let spec = SubmapSpec {
            radius: 30.0,
            time_window: None,
            stride: 0.5,
        };
        let subs = extract_submap_sequence(&map, &traj, &spec).unwrap();
        assert_eq!(subs.len(), 21);

        let spec = SubmapSpec {
            stride: 100.0,
            ..spec
        };
        let subs = extract_submap_sequence(&map, &traj, &spec).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].center_pose.timestamp(), Some(0.0));
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = SubmapSpec {
            stride: 0.0,
            ..SubmapSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = SubmapSpec {
            radius: -1.0,
            ..SubmapSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
