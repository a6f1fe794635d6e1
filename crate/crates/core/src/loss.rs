//! Batched cross-modal contrastive loss with analytic gradients.
//!
//! Per anchor i with positive candidate i, the loss is the negative log of
//! exp(s_ii) / (exp(s_ii) + sum over negatives j of exp(s_ij)), where
//! s_ij is the scaled dot product of anchor i and candidate j and the
//! negative sum skips the batch's non-negative set for i: samples whose
//! real-world position lies within `non_negative_distance` of anchor i.
//! Exempting those nearby samples keeps co-located pairs from being pushed
//! apart as false negatives.

use nalgebra::Point3;

use crate::error::{CoreError, Result};

/// A batch of cross-modal pairs: candidate i is anchor i's positive, and
/// both share position i.
#[derive(Debug, Clone)]
pub struct LossBatch {
    /// Row-major B x dim.
    pub anchor_vectors: Vec<f64>,
    /// Row-major B x dim.
    pub candidate_vectors: Vec<f64>,
    pub dim: usize,
    pub positions: Vec<Point3<f64>>,
    pub non_negative_distance: f64,
}

impl LossBatch {
    pub fn new(
        anchor_vectors: Vec<f64>,
        candidate_vectors: Vec<f64>,
        dim: usize,
        positions: Vec<Point3<f64>>,
    ) -> Result<Self> {
        let batch = LossBatch {
            anchor_vectors,
            candidate_vectors,
            dim,
            positions,
            non_negative_distance: 50.0,
        };
        batch.validate()?;
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.positions.len();
        if b < 2 {
            return Err(CoreError::EmptyBatch);
        }
        if self.anchor_vectors.len() != b * self.dim
            || self.candidate_vectors.len() != b * self.dim
        {
            return Err(CoreError::LengthMismatch(format!(
                "batch {b} x dim {} but {} anchor and {} candidate values",
                self.dim,
                self.anchor_vectors.len(),
                self.candidate_vectors.len()
            )));
        }
        if self
            .anchor_vectors
            .iter()
            .chain(&self.candidate_vectors)
            .any(|v| !v.is_finite())
        {
            return Err(CoreError::InvalidInput("non-finite batch vector".into()));
        }
        Ok(())
    }

    fn anchor(&self, i: usize) -> &[f64] {
        &self.anchor_vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn candidate(&self, i: usize) -> &[f64] {
        &self.candidate_vectors[i * self.dim..(i + 1) * self.dim]
    }
}

/// Loss value and exact gradients w.r.t. both vector sets (same layout as
/// the batch vectors).
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub grad_anchors: Vec<f64>,
    pub grad_candidates: Vec<f64>,
}

/// Evaluate the loss (mean over anchors) and its analytic gradients.
pub fn lip_loc_loss(batch: &LossBatch, temperature: f64) -> Result<LossOutput> {
    batch.validate()?;
    if !(temperature > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    let b = batch.len();
    let dim = batch.dim;

    // Non-negative sets: j is exempt from anchor i's negatives when the
    // pair positions are within the threshold (i itself trivially is).
    let threshold2 = batch.non_negative_distance * batch.non_negative_distance;
    let exempt = |i: usize, j: usize| {
        (batch.positions[i] - batch.positions[j]).norm_squared() <= threshold2
    };

    let dot = |a: &[f64], c: &[f64]| -> f64 { a.iter().zip(c).map(|(x, y)| x * y).sum() };

    let mut total = 0.0;
    let mut grad_anchors = vec![0.0; b * dim];
    let mut grad_candidates = vec![0.0; b * dim];
    let inv_bt = 1.0 / (b as f64 * temperature);

    for i in 0..b {
        let a_i = batch.anchor(i);
        let s_pos = dot(a_i, batch.candidate(i)) / temperature;
        let mut negatives: Vec<(usize, f64)> = Vec::new();
        let mut m = s_pos;
        for j in 0..b {
            if j == i || exempt(i, j) {
                continue;
            }
            let s = dot(a_i, batch.candidate(j)) / temperature;
            m = m.max(s);
            negatives.push((j, s));
        }
        // Stable log-sum-exp around the row maximum.
        let e_pos = (s_pos - m).exp();
        let mut denom = e_pos;
        for &(_, s) in &negatives {
            denom += (s - m).exp();
        }
        total += m + denom.ln() - s_pos;

        let p_pos = e_pos / denom;
        for k in 0..dim {
            grad_anchors[i * dim + k] += inv_bt * (p_pos - 1.0) * batch.candidate(i)[k];
            grad_candidates[i * dim + k] += inv_bt * (p_pos - 1.0) * a_i[k];
        }
        for &(j, s) in &negatives {
            let p = (s - m).exp() / denom;
            for k in 0..dim {
                grad_anchors[i * dim + k] += inv_bt * p * batch.candidate(j)[k];
                grad_candidates[j * dim + k] += inv_bt * p * a_i[k];
            }
        }
    }

    Ok(LossOutput {
        loss: total / b as f64,
        grad_anchors,
        grad_candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(b: usize, dim: usize, spread: f64, seed: u64) -> LossBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LossBatch::new(
            (0..b * dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            (0..b * dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            dim,
            (0..b)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-spread..spread),
                        rng.gen_range(-spread..spread),
                        0.0,
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn all_pairs_nearby_gives_zero_loss() {
        // Every pair within 50 m: no negatives anywhere.
        let batch = random_batch(6, 8, 10.0, 3);
        let out = lip_loc_loss(&batch, 1.0).unwrap();
        assert!(out.loss.abs() < 1e-12);
        assert!(out.grad_anchors.iter().all(|g| g.abs() < 1e-12));
        assert!(out.grad_candidates.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn uniform_similarities_give_log_k_plus_1() {
        // Identical candidate vectors make every similarity equal; spread
        // positions so all B-1 others are negatives.
        let b = 7;
        let dim = 4;
        let anchor: Vec<f64> = (0..dim).map(|k| 0.3 + 0.1 * k as f64).collect();
        let candidate: Vec<f64> = (0..dim).map(|k| -0.2 + 0.05 * k as f64).collect();
        let mut anchors = Vec::new();
        let mut candidates = Vec::new();
        for _ in 0..b {
            anchors.extend_from_slice(&anchor);
            candidates.extend_from_slice(&candidate);
        }
        let positions: Vec<Point3<f64>> = (0..b)
            .map(|i| Point3::new(1000.0 * i as f64, 0.0, 0.0))
            .collect();
        let batch = LossBatch::new(anchors, candidates, dim, positions).unwrap();
        let out = lip_loc_loss(&batch, 1.0).unwrap();
        let expect = (b as f64).ln(); // K + 1 = b
        assert!(
            (out.loss - expect).abs() < 1e-9,
            "loss {} vs log(K+1) {expect}",
            out.loss
        );
    }

    #[test]
    fn loss_is_non_negative() {
        for seed in 0..20 {
            let batch = random_batch(8, 8, 200.0, seed);
            let out = lip_loc_loss(&batch, 1.0).unwrap();
            assert!(out.loss >= 0.0);
        }
    }

    #[test]
    fn removing_a_negative_never_increases_loss() {
        for seed in 0..10 {
            let mut batch = random_batch(8, 8, 500.0, 40 + seed);
            let base = lip_loc_loss(&batch, 1.0).unwrap().loss;
            // Move sample 3 next to sample 0: it leaves 0's negative set
            // (and possibly others').
            batch.positions[3] = batch.positions[0];
            let moved = lip_loc_loss(&batch, 1.0).unwrap().loss;
            assert!(moved <= base + 1e-12, "{moved} > {base}");
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let h = 1e-5;
        for seed in 0..10 {
            let batch = random_batch(8, 16, 150.0, 90 + seed);
            let out = lip_loc_loss(&batch, 1.0).unwrap();
            let mut worst = 0.0f64;
            for param in 0..batch.anchor_vectors.len() * 2 {
                let (is_anchor, idx) = if param < batch.anchor_vectors.len() {
                    (true, param)
                } else {
                    (false, param - batch.anchor_vectors.len())
                };
                let mut plus = batch.clone();
                let mut minus = batch.clone();
                if is_anchor {
                    plus.anchor_vectors[idx] += h;
                    minus.anchor_vectors[idx] -= h;
                } else {
                    plus.candidate_vectors[idx] += h;
                    minus.candidate_vectors[idx] -= h;
                }
                let fd = (lip_loc_loss(&plus, 1.0).unwrap().loss
                    - lip_loc_loss(&minus, 1.0).unwrap().loss)
                    / (2.0 * h);
                let analytic = if is_anchor {
                    out.grad_anchors[idx]
                } else {
                    out.grad_candidates[idx]
                };
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1.0);
                worst = worst.max(rel);
            }
            assert!(worst < 1e-5, "worst relative gradient error {worst}");
        }
    }

    #[test]
    fn tiny_batches_are_rejected() {
        let bad = LossBatch {
            anchor_vectors: vec![1.0],
            candidate_vectors: vec![1.0],
            dim: 1,
            positions: vec![Point3::origin()],
            non_negative_distance: 50.0,
        };
        assert!(matches!(lip_loc_loss(&bad, 1.0), Err(CoreError::EmptyBatch)));
    }
}
