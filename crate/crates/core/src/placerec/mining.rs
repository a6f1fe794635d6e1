//! Training-pair mining with distance and bearing thresholds.

use crate::error::{CoreError, Result};

use super::{heading_difference_deg, DescriptorSet};

/// Positive/negative pair thresholds.
///
/// A pair is positive when within `positive_distance` meters and, if
/// `positive_bearing_deg` is set, within that heading difference; negative
/// when separated by more than `negative_distance`; pairs in between are
/// neither.
#[derive(Debug, Clone, Copy)]
pub struct PairMiningConfig {
    pub positive_distance: f64,
    pub positive_bearing_deg: Option<f64>,
    pub negative_distance: f64,
}

impl PairMiningConfig {
    /// Visual pairs: 5 m / 15 deg positives, > 50 m negatives.
    pub fn vpr() -> Self {
        PairMiningConfig {
            positive_distance: 5.0,
            positive_bearing_deg: Some(15.0),
            negative_distance: 50.0,
        }
    }

    /// Lidar pairs: 3 m positives, > 20 m negatives, no bearing condition.
    pub fn lpr() -> Self {
        PairMiningConfig {
            positive_distance: 3.0,
            positive_bearing_deg: None,
            negative_distance: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.positive_distance > 0.0 && self.positive_distance < self.negative_distance) {
            return Err(CoreError::InvalidInput(format!(
                "require 0 < positive_distance ({}) < negative_distance ({})",
                self.positive_distance, self.negative_distance
            )));
        }
        if let Some(b) = self.positive_bearing_deg {
            if !(b >= 0.0) {
                return Err(CoreError::InvalidInput(format!(
                    "bearing threshold must be >= 0, got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-record positive and negative index lists (self excluded).
#[derive(Debug, Clone)]
pub struct MinedPairs {
    pub positives: Vec<Vec<u32>>,
    pub negatives: Vec<Vec<u32>>,
}

/// Mine positive/negative pairs over the set's poses.
pub fn mine_pairs(set: &DescriptorSet, config: &PairMiningConfig) -> Result<MinedPairs> {
    config.validate()?;
    let n = set.len();
    let mut positives = vec![Vec::new(); n];
    let mut negatives = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = (set.position(i) - set.position(j)).norm();
            if dist <= config.positive_distance {
                let bearing_ok = match config.positive_bearing_deg {
                    None => true,
                    Some(limit) => heading_difference_deg(&set.poses[i], &set.poses[j])
                        .map(|d| d <= limit)
                        .unwrap_or(false),
                };
                if bearing_ok {
                    positives[i].push(j as u32);
                }
            } else if dist > config.negative_distance {
                negatives[i].push(j as u32);
            }
        }
    }
    Ok(MinedPairs {
        positives,
        negatives,
    })
}
