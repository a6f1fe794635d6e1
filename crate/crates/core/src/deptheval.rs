//! Depth-estimation metrics and depth-distribution statistics.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::render::DepthFrame;

/// Threshold-accuracy convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta1Convention {
    /// max(pred/gt, gt/pred) < 1.25, the form baseline depth benchmarks
    /// report.
    Ratio,
    /// |pred - gt| / gt <= 0.25, the literal "within 25%" reading.
    Literal,
}

/// Aggregated depth metrics over jointly valid pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthMetrics {
    pub delta1: f64,
    pub abs_rel: f64,
    pub rmse: f64,
    pub pixel_count: usize,
}

/// Pixel-pooled accumulator; merging is associative so frames can be
/// reduced in any order.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsAccumulator {
    count: usize,
    delta1_hits: usize,
    abs_rel_sum: f64,
    sq_err_sum: f64,
}

impl MetricsAccumulator {
    pub fn add_frame(
        &mut self,
        pred: &DepthFrame,
        gt: &DepthFrame,
        convention: Delta1Convention,
    ) -> Result<()> {
        if pred.width != gt.width || pred.height != gt.height {
            return Err(CoreError::ShapeMismatch(format!(
                "pred {}x{} vs gt {}x{}",
                pred.width, pred.height, gt.width, gt.height
            )));
        }
        for i in 0..pred.depth.len() {
            if !(pred.valid[i] && gt.valid[i]) {
                continue;
            }
            let p = pred.depth[i] as f64;
            let g = gt.depth[i] as f64;
            debug_assert!(g > 0.0 && p > 0.0);
            let hit = match convention {
                Delta1Convention::Ratio => (p / g).max(g / p) < 1.25,
                Delta1Convention::Literal => (p - g).abs() / g <= 0.25,
            };
            if hit {
                self.delta1_hits += 1;
            }
            self.abs_rel_sum += (p - g).abs() / g;
            self.sq_err_sum += (p - g) * (p - g);
            self.count += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.count += other.count;
        self.delta1_hits += other.delta1_hits;
        self.abs_rel_sum += other.abs_rel_sum;
        self.sq_err_sum += other.sq_err_sum;
    }

    pub fn pixel_count(&self) -> usize {
        self.count
    }

    pub fn finalize(&self) -> Result<DepthMetrics> {
        if self.count == 0 {
            return Err(CoreError::NoValidPixels);
        }
        let n = self.count as f64;
        Ok(DepthMetrics {
            delta1: self.delta1_hits as f64 / n,
            abs_rel: self.abs_rel_sum / n,
            rmse: (self.sq_err_sum / n).sqrt(),
            pixel_count: self.count,
        })
    }
}

/// Metrics for a single prediction/ground-truth pair.
pub fn depth_metrics(
    pred: &DepthFrame,
    gt: &DepthFrame,
    convention: Delta1Convention,
) -> Result<DepthMetrics> {
    let mut acc = MetricsAccumulator::default();
    acc.add_frame(pred, gt, convention)?;
    acc.finalize()
}

/// Subsampled (normalized u, normalized v, depth) triples from valid
/// pixels.
#[derive(Debug, Clone)]
pub struct DepthDistribution {
    pub samples: Vec<(f64, f64, f64)>,
    pub subsample_rate: f64,
}

/// p5/p25/p50/p75/p95 for one axis.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AxisQuantiles {
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionQuantiles {
    pub width: AxisQuantiles,
    pub height: AxisQuantiles,
    pub depth: AxisQuantiles,
    pub sample_count: usize,
}

/// Streaming collector: feed frames in a fixed order for a given seed and
/// the output is reproducible.
#[derive(Debug)]
pub struct DistributionCollector {
    rng: ChaCha8Rng,
    rate: f64,
    samples: Vec<(f64, f64, f64)>,
}

impl DistributionCollector {
    pub fn new(subsample_rate: f64, seed: u64) -> Result<Self> {
        if !(subsample_rate > 0.0 && subsample_rate <= 1.0) {
            return Err(CoreError::InvalidInput(format!(
                "subsample rate must be in (0, 1], got {subsample_rate}"
            )));
        }
        Ok(DistributionCollector {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rate: subsample_rate,
            samples: Vec::new(),
        })
    }

    /// Bernoulli(rate) draw per valid pixel; pixel centers map to
    /// normalized coordinates ((col + 0.5) / width, (row + 0.5) / height).
    pub fn add_frame(&mut self, frame: &DepthFrame) {
        for row in 0..frame.height {
            for col in 0..frame.width {
                let i = (row * frame.width + col) as usize;
                if !frame.valid[i] {
                    continue;
                }
                if self.rate < 1.0 && self.rng.gen::<f64>() >= self.rate {
                    continue;
                }
                self.samples.push((
                    (col as f64 + 0.5) / frame.width as f64,
                    (row as f64 + 0.5) / frame.height as f64,
                    frame.depth[i] as f64,
                ));
            }
        }
    }

    pub fn finish(self) -> DepthDistribution {
        DepthDistribution {
            samples: self.samples,
            subsample_rate: self.rate,
        }
    }
}

/// One-shot helper over a frame slice.
pub fn depth_distribution_stats(
    frames: &[DepthFrame],
    subsample_rate: f64,
    seed: u64,
) -> Result<(DepthDistribution, Option<DistributionQuantiles>)> {
    let mut collector = DistributionCollector::new(subsample_rate, seed)?;
    for f in frames {
        collector.add_frame(f);
    }
    let dist = collector.finish();
    let quantiles = dist.quantiles();
    Ok((dist, quantiles))
}

impl DepthDistribution {
    pub fn quantiles(&self) -> Option<DistributionQuantiles> {
        if self.samples.is_empty() {
            return None;
        }
        let axis = |f: fn(&(f64, f64, f64)) -> f64| {
            let mut values: Vec<f64> = self.samples.iter().map(f).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            AxisQuantiles {
                p5: quantile(&values, 0.05),
                p25: quantile(&values, 0.25),
                p50: quantile(&values, 0.50),
                p75: quantile(&values, 0.75),
                p95: quantile(&values, 0.95),
            }
        };
        Some(DistributionQuantiles {
            width: axis(|s| s.0),
            height: axis(|s| s.1),
            depth: axis(|s| s.2),
            sample_count: self.samples.len(),
        })
    }

    /// CSV rows `axis,value` for plotting (width, height, depth axes).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,value\n");
        for (u, v, d) in &self.samples {
            out.push_str(&format!("width,{u}\nheight,{v}\ndepth,{d}\n"));
        }
        out
    }
}

/// Linear-interpolation quantile over sorted values.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with(depths: &[f32]) -> DepthFrame {
        let mut f = DepthFrame::empty(depths.len() as u32, 1);
        for (i, &d) in depths.iter().enumerate() {
            if d > 0.0 {
                f.depth[i] = d;
                f.valid[i] = true;
            }
        }
        f
    }

    #[test]
    fn identical_frames_are_perfect() {
        let f = frame_with(&[1.0, 2.5, 0.0, 10.0]);
        let m = depth_metrics(&f, &f, Delta1Convention::Ratio).unwrap();
        assert_eq!(m.delta1, 1.0);
        assert_eq!(m.abs_rel, 0.0);
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.pixel_count, 3);
    }

    #[test]
    fn hand_computed_single_pixel_cases() {
        // gt 4, pred 2: ratio 2 -> delta1 0; abs_rel 0.5; rmse 2.
        let m = depth_metrics(
            &frame_with(&[2.0]),
            &frame_with(&[4.0]),
            Delta1Convention::Ratio,
        )
        .unwrap();
        assert_eq!(m.delta1, 0.0);
        assert_eq!(m.abs_rel, 0.5);
        assert_eq!(m.rmse, 2.0);

        // gt 4, pred 5: max ratio exactly 1.25, strict < -> delta1 0;
        // abs_rel 0.25; rmse 1.
        let m = depth_metrics(
            &frame_with(&[5.0]),
            &frame_with(&[4.0]),
            Delta1Convention::Ratio,
        )
        .unwrap();
        assert_eq!(m.delta1, 0.0);
        assert_eq!(m.abs_rel, 0.25);
        assert_eq!(m.rmse, 1.0);

        // Literal convention: |5-4|/4 = 0.25 <= 0.25 -> hit.
        let m = depth_metrics(
            &frame_with(&[5.0]),
            &frame_with(&[4.0]),
            Delta1Convention::Literal,
        )
        .unwrap();
        assert_eq!(m.delta1, 1.0);
    }

    #[test]
    fn delta1_is_symmetric_but_abs_rel_is_not() {
        let a = frame_with(&[2.0, 3.0, 8.0]);
        let b = frame_with(&[2.2, 4.5, 7.0]);
        let ab = depth_metrics(&a, &b, Delta1Convention::Ratio).unwrap();
        let ba = depth_metrics(&b, &a, Delta1Convention::Ratio).unwrap();
        assert_eq!(ab.delta1, ba.delta1);
        assert!(ab.abs_rel != ba.abs_rel, "abs_rel must normalize by gt");
        // abs_rel normalizes by the second (ground truth) argument; the
        // expectation mirrors the frame's f32 storage.
        let d = |p: f32, g: f32| ((p as f64) - (g as f64)).abs() / (g as f64);
        let expect = (d(2.0, 2.2) + d(3.0, 4.5) + d(8.0, 7.0)) / 3.0;
        assert!((ab.abs_rel - expect).abs() < 1e-12);
    }

    #[test]
    fn shape_and_validity_errors() {
        let a = frame_with(&[1.0]);
        let b = frame_with(&[1.0, 2.0]);
        assert!(matches!(
            depth_metrics(&a, &b, Delta1Convention::Ratio),
            Err(CoreError::ShapeMismatch(_))
        ));
        let empty = frame_with(&[0.0]);
        assert!(matches!(
            depth_metrics(&empty, &empty, Delta1Convention::Ratio),
            Err(CoreError::NoValidPixels)
        ));
    }

    #[test]
    fn pixel_center_convention() {
        let mut f = DepthFrame::empty(100, 100);
        let i = f.pixel_index(49, 49);
        f.depth[i] = 7.0;
        f.valid[i] = true;
        let (dist, q) = depth_distribution_stats(&[f], 1.0, 0).unwrap();
        assert_eq!(dist.samples.len(), 1);
        let (u, v, d) = dist.samples[0];
        assert_eq!((u, v, d), (0.495, 0.495, 7.0));
        assert_eq!(q.unwrap().sample_count, 1);
    }

    #[test]
    fn uniform_depth_quantiles() {
        // Uniform on [1, 10]: p50 = 5.5, p25 = 3.25, p95 = 9.55.
        let mut frames = Vec::new();
        let per_frame = 100 * 100;
        let total_needed = 100_000;
        let mut k = 0usize;
        while k < total_needed {
            let mut f = DepthFrame::empty(100, 100);
            for i in 0..per_frame {
                // Low-discrepancy fill of [1, 10].
                let x = ((k * per_frame + i) as f64 * 0.6180339887498949) % 1.0;
                f.depth[i] = (1.0 + 9.0 * x) as f32;
                f.valid[i] = true;
            }
            frames.push(f);
            k += 1;
            if frames.len() * per_frame >= total_needed {
                break;
            }
        }
        let (_, q) = depth_distribution_stats(&frames, 1.0, 7).unwrap();
        let q = q.unwrap();
        assert!((q.depth.p50 - 5.5).abs() < 0.1);
        assert!((q.depth.p25 - 3.25).abs() < 0.1);
        assert!((q.depth.p75 - 7.75).abs() < 0.1);
        assert!((q.depth.p95 - 9.55).abs() < 0.1);
        assert!((q.depth.p5 - 1.45).abs() < 0.1);
    }

    #[test]
    fn subsample_count_within_binomial_bounds() {
        let mut f = DepthFrame::empty(1000, 1000);
        for i in 0..f.depth.len() {
            f.depth[i] = 5.0;
            f.valid[i] = true;
        }
        let rate = 0.01;
        let n = 1_000_000.0;
        let (dist, _) = depth_distribution_stats(&[f], rate, 12345).unwrap();
        let mean = n * rate;
        let sigma = (n * rate * (1.0 - rate)).sqrt();
        let count = dist.samples.len() as f64;
        assert!(
            (count - mean).abs() <= 3.0 * sigma,
            "count {count} outside {mean} +/- 3 x {sigma}"
        );
    }

    #[test]
    fn seeded_determinism() {
        let mut f = DepthFrame::empty(200, 200);
        for i in 0..f.depth.len() {
            f.depth[i] = (1 + i % 30) as f32;
            f.valid[i] = i % 3 != 0;
        }
        let (a, _) = depth_distribution_stats(&[f.clone()], 0.1, 99).unwrap();
        let (b, _) = depth_distribution_stats(&[f], 0.1, 99).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn empty_input_is_empty_distribution() {
        let (dist, q) = depth_distribution_stats(&[], 0.01, 0).unwrap();
        assert!(dist.samples.is_empty());
        assert!(q.is_none());
    }
}
