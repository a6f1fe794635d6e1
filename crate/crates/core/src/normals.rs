//! Per-point surface normal estimation from local neighborhoods.
//!
//! Normals are the smallest-eigenvalue eigenvector of the neighborhood
//! covariance (neighborhood-mean centered, the point itself included), then
//! sign-flipped toward the point's observation origin.

use nalgebra::{Matrix3, Point3, Vector3};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::geom::{PointCloudMap, Trajectory};

/// Neighborhoods whose two smallest covariance eigenvalues are this close
/// (ratio above the threshold) have no well-defined normal direction.
const ISOTROPY_RATIO: f64 = 0.9;

/// Parameters for normal estimation.
#[derive(Debug, Clone, Copy)]
pub struct NormalParams {
    pub neighborhood_radius: f64,
    /// Minimum neighbor count, excluding the point itself.
    pub min_neighbors: usize,
}

impl Default for NormalParams {
    fn default() -> Self {
        NormalParams {
            neighborhood_radius: 0.5,
            min_neighbors: 5,
        }
    }
}

/// Where the per-point observation position comes from when orienting.
#[derive(Debug, Clone, Copy)]
pub enum OrientationSource<'a> {
    /// Use the map's per-point observation origins.
    PerPointOrigins,
    /// Use the trajectory pose nearest in time to each point's timestamp.
    NearestTrajectoryPose(&'a Trajectory),
    /// Use a single fixed viewpoint for every point.
    Fixed(Point3<f64>),
    /// Leave normals with a canonical (data-derived) sign; callers flip
    /// them toward their own viewpoint with [`orient_normal`].
    Unoriented,
}

/// Per-point normal estimates over a map.
#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub normals: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
    pub neighbor_counts: Vec<u32>,
    /// True when an observation source fixed the normal signs.
    pub oriented: bool,
}

impl NormalEstimate {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }
}

/// Flip `normal` so it points toward the observation position: returns
/// `normal` when normal . (obs - p) >= 0, otherwise `-normal`. An exactly
/// perpendicular normal (dot = 0) is returned unchanged.
pub fn orient_normal(
    normal: &Vector3<f64>,
    p: &Point3<f64>,
    obs: &Point3<f64>,
) -> Vector3<f64> {
    if normal.dot(&(obs - p)) >= 0.0 {
        *normal
    } else {
        -normal
    }
}

/// Estimate a normal for every map point.
///
/// Points with fewer than `min_neighbors` neighbors in the radius, or with
/// an isotropic neighborhood, are marked invalid (never fatal).
pub fn estimate_normals(
    map: &PointCloudMap,
    params: &NormalParams,
    orientation: OrientationSource,
) -> Result<NormalEstimate> {
    if !(params.neighborhood_radius > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "neighborhood radius must be > 0, got {}",
            params.neighborhood_radius
        )));
    }
    match orientation {
        OrientationSource::PerPointOrigins => {
            if map.observation_origins().is_none() {
                return Err(CoreError::MissingTimestamps(
                    "per-point orientation requested but the map has no observation origins"
                        .into(),
                ));
            }
        }
        OrientationSource::NearestTrajectoryPose(_) => {
            if map.timestamps().is_none() {
                return Err(CoreError::MissingTimestamps(
                    "trajectory orientation requested but the map has no timestamps".into(),
                ));
            }
        }
        _ => {}
    }

    let points = map.points();
    let results: Vec<(Vector3<f64>, bool, u32)> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let neighbors = map.points_within(p, params.neighborhood_radius);
            // The query point itself is inside its own radius; exclude it
            // from the count but keep it in the covariance.
            let count = neighbors.len().saturating_sub(1);
            if count < params.min_neighbors {
                return (Vector3::zeros(), false, count as u32);
            }
            match covariance_normal(points, &neighbors) {
                Some(n) => {
                    let n = match observation_point(map, orientation, i) {
                        Some(obs) => orient_normal(&n, p, &obs),
                        None => n,
                    };
                    (n, true, count as u32)
                }
                None => (Vector3::zeros(), false, count as u32),
            }
        })
        .collect();

    let mut normals = Vec::with_capacity(results.len());
    let mut valid = Vec::with_capacity(results.len());
    let mut neighbor_counts = Vec::with_capacity(results.len());
    for (n, v, c) in results {
        normals.push(n);
        valid.push(v);
        neighbor_counts.push(c);
    }
    Ok(NormalEstimate {
        normals,
        valid,
        neighbor_counts,
        oriented: !matches!(orientation, OrientationSource::Unoriented),
    })
}

fn observation_point(
    map: &PointCloudMap,
    orientation: OrientationSource,
    i: usize,
) -> Option<Point3<f64>> {
    match orientation {
        OrientationSource::PerPointOrigins => Some(map.observation_origins().unwrap()[i]),
        OrientationSource::NearestTrajectoryPose(traj) => {
            let t = map.timestamps().unwrap()[i];
            Some(nearest_pose_position(traj, t))
        }
        OrientationSource::Fixed(p) => Some(p),
        OrientationSource::Unoriented => None,
    }
}

fn nearest_pose_position(traj: &Trajectory, t: f64) -> Point3<f64> {
    let poses = traj.poses();
    let hi = poses.partition_point(|p| p.timestamp().unwrap() < t);
    let candidate = |i: usize| poses[i].timestamp().unwrap();
    let best = if hi == 0 {
        0
    } else if hi >= poses.len() {
        poses.len() - 1
    } else if (candidate(hi) - t).abs() < (t - candidate(hi - 1)).abs() {
        hi
    } else {
        hi - 1
    };
    poses[best].position()
}

/// Smallest-eigenvalue eigenvector of the neighborhood covariance, with a
/// canonical sign (largest-magnitude component positive). Returns `None`
/// when the two smallest eigenvalues are too close for the direction to be
/// well defined.
fn covariance_normal(points: &[Point3<f64>], neighborhood: &[u32]) -> Option<Vector3<f64>> {
    let n = neighborhood.len() as f64;
    let mut mean = Vector3::zeros();
    for &i in neighborhood {
        mean += points[i as usize].coords;
    }
    mean /= n;
    let mut cov = Matrix3::zeros();
    for &i in neighborhood {
        let d = points[i as usize].coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = cov.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let (l_min, l_mid) = (eig.eigenvalues[idx[0]].max(0.0), eig.eigenvalues[idx[1]].max(0.0));
    if l_mid <= 0.0 || l_min / l_mid > ISOTROPY_RATIO {
        return None;
    }
    let mut normal: Vector3<f64> = eig.eigenvectors.column(idx[0]).into();
    let norm = normal.norm();
    if !(norm > 0.0) {
        return None;
    }
    normal /= norm;
    // Canonical sign so unoriented output is deterministic.
    let k = normal.iamax();
    if normal[k] < 0.0 {
        normal = -normal;
    }
    Some(normal)
}
