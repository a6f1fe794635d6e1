//! Accumulated point-cloud maps with spatial indexing.

use nalgebra::Point3;

use crate::error::{CoreError, Result};
use crate::spatial::KdTree;

/// A world-frame point-cloud map with optional per-point timestamps and
/// observation origins (the sensor position when each point was measured),
/// backed by an exact radius-query index.
#[derive(Debug, Clone)]
pub struct PointCloudMap {
    points: Vec<Point3<f64>>,
    timestamps: Option<Vec<f64>>,
    observation_origins: Option<Vec<Point3<f64>>>,
    index: KdTree,
}

impl PointCloudMap {
    pub fn new(
        points: Vec<Point3<f64>>,
        timestamps: Option<Vec<f64>>,
        observation_origins: Option<Vec<Point3<f64>>>,
    ) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(CoreError::InvalidInput(format!(
                    "non-finite point at index {i}"
                )));
            }
        }
        if let Some(ts) = &timestamps {
            if ts.len() != points.len() {
                return Err(CoreError::LengthMismatch(format!(
                    "{} timestamps for {} points",
                    ts.len(),
                    points.len()
                )));
            }
            if let Some(t) = ts.iter().find(|t| !t.is_finite()) {
                return Err(CoreError::InvalidInput(format!("non-finite timestamp {t}")));
            }
        }
        if let Some(origins) = &observation_origins {
            if origins.len() != points.len() {
                return Err(CoreError::LengthMismatch(format!(
                    "{} observation origins for {} points",
                    origins.len(),
                    points.len()
                )));
            }
            for (i, o) in origins.iter().enumerate() {
                if !(o.x.is_finite() && o.y.is_finite() && o.z.is_finite()) {
                    return Err(CoreError::InvalidInput(format!(
                        "non-finite observation origin at index {i}"
                    )));
                }
            }
        }
        let index = KdTree::build(&points);
        Ok(PointCloudMap {
            points,
            timestamps,
            observation_origins,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn observation_origins(&self) -> Option<&[Point3<f64>]> {
        self.observation_origins.as_deref()
    }

    pub fn index(&self) -> &KdTree {
        &self.index
    }

    /// Indices of points within `radius` of `center` (inclusive), ascending.
    pub fn points_within(&self, center: &Point3<f64>, radius: f64) -> Vec<u32> {
        self.index.radius_query(center, radius)
    }
}
