//! Recall@N retrieval evaluation over descriptor sets.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;

use crate::error::{CoreError, Result};

use super::{environment_of, DescriptorSet};

/// How query/database descriptor distance is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMetric {
    Euclidean,
    Cosine,
}

/// Intra-sequence (same traversal, with temporal exclusion) or
/// inter-sequence evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Intra,
    Inter,
}

/// Retrieval evaluation configuration.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// A retrieved record is correct when within this distance (meters).
    pub positive_threshold: f64,
    pub recall_ns: Vec<usize>,
    /// Intra mode only: database records with |t_query - t_db| strictly
    /// below this window (seconds) are excluded from retrieval.
    pub intra_exclusion_window: f64,
    pub mode: EvalMode,
    pub metric: DistanceMetric,
}

impl EvalConfig {
    pub fn vpr(mode: EvalMode) -> Self {
        EvalConfig {
            positive_threshold: 25.0,
            recall_ns: vec![1, 5],
            intra_exclusion_window: 600.0,
            mode,
            metric: DistanceMetric::Euclidean,
        }
    }

    pub fn lpr(mode: EvalMode) -> Self {
        EvalConfig {
            positive_threshold: 3.0,
            ..EvalConfig::vpr(mode)
        }
    }

    pub fn cmpr() -> Self {
        EvalConfig::vpr(EvalMode::Inter)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.positive_threshold > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "positive threshold must be > 0, got {}",
                self.positive_threshold
            )));
        }
        if self.recall_ns.is_empty() || self.recall_ns.iter().any(|&n| n == 0) {
            return Err(CoreError::InvalidInput(
                "recall Ns must be non-empty and positive".into(),
            ));
        }
        if !(self.intra_exclusion_window >= 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "exclusion window must be >= 0, got {}",
                self.intra_exclusion_window
            )));
        }
        Ok(())
    }
}

/// One (query sequence, database group) evaluation cell.
#[derive(Debug, Clone)]
pub struct RecallCell {
    pub query_sequence: String,
    pub database_group: String,
    /// Queries with at least one reachable ground-truth positive.
    pub query_count: usize,
    /// Query indices (into the query set) dropped for having no positive.
    pub excluded_queries: Vec<u32>,
    /// Recall@N percentages aligned with the config's recall_ns; `None`
    /// when no query had a positive.
    pub recall: Vec<Option<f64>>,
}

/// Full evaluation output: per-cell recalls plus environment and overall
/// averages (unweighted means over defined cells).
#[derive(Debug, Clone)]
pub struct RecallReport {
    pub recall_ns: Vec<usize>,
    pub cells: Vec<RecallCell>,
}

impl RecallReport {
    /// Mean recall per environment of the query sequence.
    pub fn per_environment(&self) -> BTreeMap<String, Vec<Option<f64>>> {
        let mut envs: BTreeMap<String, Vec<&RecallCell>> = BTreeMap::new();
        for cell in &self.cells {
            envs.entry(environment_of(&cell.query_sequence))
                .or_default()
                .push(cell);
        }
        envs.into_iter()
            .map(|(env, cells)| (env, mean_over_cells(&cells, self.recall_ns.len())))
            .collect()
    }

    pub fn average(&self) -> Vec<Option<f64>> {
        mean_over_cells(&self.cells.iter().collect::<Vec<_>>(), self.recall_ns.len())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let recall_obj = |values: &[Option<f64>]| {
            let mut m = serde_json::Map::new();
            for (n, v) in self.recall_ns.iter().zip(values) {
                m.insert(format!("r{n}"), json!(v));
            }
            serde_json::Value::Object(m)
        };
        json!({
            "recall_ns": self.recall_ns,
            "cells": self.cells.iter().map(|c| json!({
                "query_sequence": c.query_sequence,
                "database": c.database_group,
                "query_count": c.query_count,
                "excluded_queries": c.excluded_queries.len(),
                "recall": recall_obj(&c.recall),
            })).collect::<Vec<_>>(),
            "per_environment": self.per_environment().iter().map(|(env, v)| {
                (env.clone(), recall_obj(v))
            }).collect::<serde_json::Map<_, _>>(),
            "average": recall_obj(&self.average()),
        })
    }

    /// Flat CSV: one row per cell plus the aggregate rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query_sequence,database,query_count");
        for n in &self.recall_ns {
            out.push_str(&format!(",r{n}"));
        }
        out.push('\n');
        let fmt = |values: &[Option<f64>]| {
            values
                .iter()
                .map(|v| v.map(|x| format!("{x:.4}")).unwrap_or_default())
                .collect::<Vec<_>>()
                .join(",")
        };
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{}\n",
                c.query_sequence,
                c.database_group,
                c.query_count,
                fmt(&c.recall)
            ));
        }
        for (env, v) in self.per_environment() {
            out.push_str(&format!("{env},average,,{}\n", fmt(&v)));
        }
        out.push_str(&format!("average,average,,{}\n", fmt(&self.average())));
        out
    }
}

fn mean_over_cells(cells: &[&RecallCell], n_levels: usize) -> Vec<Option<f64>> {
    (0..n_levels)
        .map(|k| {
            let defined: Vec<f64> = cells.iter().filter_map(|c| c.recall[k]).collect();
            if defined.is_empty() {
                None
            } else {
                Some(defined.iter().sum::<f64>() / defined.len() as f64)
            }
        })
        .collect()
}

/// Evaluate Recall@N with per-sequence cells.
///
/// Intra mode pairs each sequence with itself and applies the temporal
/// exclusion window; inter mode evaluates every (query sequence, database
/// sequence) pair with distinct sequences. For every query, database
/// records are ranked by descriptor distance (ties broken by ascending
/// database index); a query counts as a hit at N when any of its top N
/// lies within the positive threshold. Queries with no reachable positive
/// are excluded from the denominator.
pub fn evaluate_recall(
    queries: &DescriptorSet,
    database: &DescriptorSet,
    config: &EvalConfig,
) -> Result<RecallReport> {
    config.validate()?;
    if database.is_empty() {
        return Err(CoreError::EmptyDatabase);
    }
    if !queries.is_empty() && queries.dim != database.dim {
        return Err(CoreError::DimensionMismatch(format!(
            "queries dim {} vs database dim {}",
            queries.dim, database.dim
        )));
    }

    let mut cells = Vec::new();
    let db_sequences = database.sequences();
    for q_seq in queries.sequences() {
        for db_seq in &db_sequences {
            let same = &q_seq == db_seq;
            let wanted = match config.mode {
                EvalMode::Intra => same,
                EvalMode::Inter => !same,
            };
            if !wanted {
                continue;
            }
            cells.push(evaluate_cell(
                queries,
                &queries.indices_of(&q_seq),
                database,
                &database.indices_of(db_seq),
                q_seq.clone(),
                db_seq.clone(),
                config,
            ));
        }
    }
    Ok(RecallReport {
        recall_ns: config.recall_ns.clone(),
        cells,
    })
}

/// Cross-modal evaluation: image queries per sequence against the submap
/// database of that sequence's whole environment.
pub fn evaluate_cross_modal(
    image_queries: &DescriptorSet,
    submap_database: &DescriptorSet,
    config: &EvalConfig,
) -> Result<RecallReport> {
    config.validate()?;
    if submap_database.is_empty() {
        return Err(CoreError::EmptyDatabase);
    }
    if !image_queries.is_empty() && image_queries.dim != submap_database.dim {
        return Err(CoreError::DimensionMismatch(format!(
            "queries dim {} vs database dim {}",
            image_queries.dim, submap_database.dim
        )));
    }
    let mut cells = Vec::new();
    for q_seq in image_queries.sequences() {
        let env = environment_of(&q_seq);
        let db_indices: Vec<usize> = (0..submap_database.len())
            .filter(|&i| environment_of(&submap_database.sequence_labels[i]) == env)
            .collect();
        if db_indices.is_empty() {
            continue;
        }
        cells.push(evaluate_cell(
            image_queries,
            &image_queries.indices_of(&q_seq),
            submap_database,
            &db_indices,
            q_seq.clone(),
            env,
            config,
        ));
    }
    Ok(RecallReport {
        recall_ns: config.recall_ns.clone(),
        cells,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_cell(
    queries: &DescriptorSet,
    query_indices: &[usize],
    database: &DescriptorSet,
    db_indices: &[usize],
    query_sequence: String,
    database_group: String,
    config: &EvalConfig,
) -> RecallCell {
    let max_n = *config.recall_ns.iter().max().unwrap();
    let exclusion = match config.mode {
        EvalMode::Intra => config.intra_exclusion_window,
        EvalMode::Inter => 0.0,
    };

    let per_query: Vec<Option<Vec<bool>>> = query_indices
        .par_iter()
        .map(|&qi| {
            let q_pos = queries.position(qi);
            let q_vec = queries.vector(qi);
            let q_time = queries.timestamps[qi];

            // Top-N by (distance, database index), smallest first.
            let mut top: Vec<(f64, usize)> = Vec::with_capacity(max_n + 1);
            let mut has_positive = false;
            let threshold2 = config.positive_threshold * config.positive_threshold;
            for &di in db_indices {
                if exclusion > 0.0 && (q_time - database.timestamps[di]).abs() < exclusion {
                    continue;
                }
                if (database.position(di) - q_pos).norm_squared() <= threshold2 {
                    has_positive = true;
                }
                let d = descriptor_distance(q_vec, database.vector(di), config.metric);
                let entry = (d, di);
                let pos = top.partition_point(|e| *e < entry);
                if pos < max_n {
                    top.insert(pos, entry);
                    top.truncate(max_n);
                }
            }
            if !has_positive {
                return None;
            }
            let hits: Vec<bool> = config
                .recall_ns
                .iter()
                .map(|&n| {
                    top.iter().take(n).any(|&(_, di)| {
                        (database.position(di) - q_pos).norm_squared() <= threshold2
                    })
                })
                .collect();
            Some(hits)
        })
        .collect();

    let mut excluded_queries = Vec::new();
    let mut hit_counts = vec![0usize; config.recall_ns.len()];
    let mut denominator = 0usize;
    for (k, hits) in per_query.iter().enumerate() {
        match hits {
            None => excluded_queries.push(query_indices[k] as u32),
            Some(h) => {
                denominator += 1;
                for (slot, &hit) in h.iter().enumerate() {
                    if hit {
                        hit_counts[slot] += 1;
                    }
                }
            }
        }
    }
    let recall = hit_counts
        .iter()
        .map(|&h| {
            if denominator == 0 {
                None
            } else {
                Some(100.0 * h as f64 / denominator as f64)
            }
        })
        .collect();
    RecallCell {
        query_sequence,
        database_group,
        query_count: denominator,
        excluded_queries,
        recall,
    }
}

pub fn descriptor_distance(a: &[f32], b: &[f32], metric: DistanceMetric) -> f64 {
    match metric {
        DistanceMetric::Euclidean => {
            let mut acc = 0.0f64;
            for (x, y) in a.iter().zip(b) {
                let d = *x as f64 - *y as f64;
                acc += d * d;
            }
            acc.sqrt()
        }
        DistanceMetric::Cosine => {
            let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
            for (x, y) in a.iter().zip(b) {
                dot += *x as f64 * *y as f64;
                na += *x as f64 * *x as f64;
                nb += *y as f64 * *y as f64;
            }
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na.sqrt() * nb.sqrt())
            }
        }
    }
}
