//! Point visibility from a camera pose: frustum cull, backface cull, then
//! spherical-reflection + convex-hull occlusion removal.

pub mod hull;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::{CoreError, Result};
use crate::geom::{project_point, CameraRig, PointCloudMap, Pose, Projection};
use crate::normals::NormalEstimate;
use crate::spatial::KdTree;
use hull::{convex_hull, HullError};

/// Occlusion-removal configuration.
///
/// `gamma` is the exponent of the inversion kernel d^gamma applied to
/// camera-relative distances (must be < 0); `crop_radius` bounds the
/// per-frame working set around the camera.
#[derive(Debug, Clone, Copy)]
pub struct GhprConfig {
    pub gamma: f64,
    pub crop_radius: f64,
}

impl Default for GhprConfig {
    fn default() -> Self {
        GhprConfig {
            gamma: -0.01,
            crop_radius: 60.0,
        }
    }
}

impl GhprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma < 0.0) {
            return Err(CoreError::InvalidGamma(self.gamma));
        }
        if !(self.crop_radius > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "crop radius must be > 0, got {}",
                self.crop_radius
            )));
        }
        Ok(())
    }
}

/// Candidate survivors per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageCounts {
    pub candidates: usize,
    pub after_frustum: usize,
    pub after_backface: usize,
    pub after_ghpr: usize,
}

impl StageCounts {
    pub fn accumulate(&mut self, other: &StageCounts) {
        self.candidates += other.candidates;
        self.after_frustum += other.after_frustum;
        self.after_backface += other.after_backface;
        self.after_ghpr += other.after_ghpr;
    }
}

/// Map-point indices that survived every cull, with per-stage counts.
#[derive(Debug, Clone, Default)]
pub struct VisibleSet {
    /// Strictly increasing indices into the map's point array.
    pub indices: Vec<u32>,
    pub stage_counts: StageCounts,
}

/// Stage at which a point was dropped (for the debug dump).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropStage {
    None,
    Crop,
    Frustum,
    Backface,
    Ghpr,
}

impl DropStage {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropStage::None => "none",
            DropStage::Crop => "crop",
            DropStage::Frustum => "frustum",
            DropStage::Backface => "backface",
            DropStage::Ghpr => "ghpr",
        }
    }
}

/// Spherically reflect a camera-relative point: p / ||p|| * ||p||^gamma,
/// with the origin mapping to itself.
pub fn spherical_reflect(p: &Vector3<f64>, gamma: f64) -> Result<Vector3<f64>> {
    if !(gamma < 0.0) {
        return Err(CoreError::InvalidGamma(gamma));
    }
    let d = p.norm();
    if d == 0.0 {
        return Ok(Vector3::zeros());
    }
    Ok(p / d * d.powf(gamma))
}

/// Keep candidates whose normal faces the camera. Points with no valid
/// normal are kept: dropping them would punch holes in sparse structure,
/// and occlusion removal still handles truly hidden ones.
pub fn backface_cull(
    points: &[Point3<f64>],
    normals: &[Vector3<f64>],
    valid: &[bool],
    camera_position: &Point3<f64>,
) -> Result<Vec<u32>> {
    if points.len() != normals.len() || points.len() != valid.len() {
        return Err(CoreError::LengthMismatch(format!(
            "{} points, {} normals, {} validity flags",
            points.len(),
            normals.len(),
            valid.len()
        )));
    }
    Ok((0..points.len() as u32)
        .filter(|&i| {
            let i = i as usize;
            !valid[i] || normals[i].dot(&(camera_position - points[i])) > 0.0
        })
        .collect())
}

/// Occlusion removal over camera-relative candidates.
///
/// Reflects the candidates, takes the convex hull of the reflected set plus
/// the camera origin, and returns the candidates whose reflection lies on
/// the hull: either as a hull vertex, or within 1e-9 x scene scale of a
/// facet plane incident to its nearest hull vertex (this rescues reflected
/// points that coincide within floating-point resolution). Degenerate
/// configurations (< 4 candidates, coplanar cloud) keep every candidate,
/// since occlusion is undefined there.
pub fn ghpr_visible(points_rel: &[Vector3<f64>], config: &GhprConfig) -> Result<Vec<u32>> {
    config.validate()?;
    let n = points_rel.len();
    if n < 4 {
        return Ok((0..n as u32).collect());
    }

    let mut reflected = Vec::with_capacity(n + 1);
    let mut scale = 0.0f64;
    for p in points_rel {
        let r = spherical_reflect(p, config.gamma)?;
        scale = scale.max(r.norm());
        reflected.push(Point3::from(r));
    }
    let tol = 1e-9 * scale;

    // Merge reflections that quantize to the same tolerance cell so
    // coincident points share hull-vertex status.
    let mut cell_of: HashMap<(i64, i64, i64), u32> = HashMap::new();
    let mut hull_input: Vec<Point3<f64>> = Vec::with_capacity(n + 1);
    let mut rep_of: Vec<u32> = Vec::with_capacity(n);
    for r in &reflected {
        let key = quantize(r, tol);
        match cell_of.get(&key) {
            Some(&rep) => rep_of.push(rep),
            None => {
                let rep = hull_input.len() as u32;
                cell_of.insert(key, rep);
                hull_input.push(*r);
                rep_of.push(rep);
            }
        }
    }
    // The camera origin anchors the hull; without it the reflected shell's
    // open back side sprouts spurious vertices.
    hull_input.push(Point3::origin());

    let hull = match convex_hull(&hull_input) {
        Ok(h) => h,
        Err(HullError::TooFewPoints) | Err(HullError::Degenerate) => {
            return Ok((0..n as u32).collect());
        }
        Err(HullError::Numerical) => {
            return Ok((0..n as u32).collect());
        }
    };

    // Nearest-vertex lookup for the near-facet membership test.
    let vertex_ids = hull.vertex_ids();
    let vertex_positions: Vec<Point3<f64>> = vertex_ids
        .iter()
        .map(|&v| hull_input[v as usize])
        .collect();
    let vertex_tree = KdTree::build(&vertex_positions);

    let mut out = Vec::new();
    for (i, r) in reflected.iter().enumerate() {
        let rep = rep_of[i];
        if hull.is_vertex(rep) {
            out.push(i as u32);
            continue;
        }
        if tol > 0.0 {
            // Within tolerance of a facet plane incident to the nearest
            // hull vertex counts as on the hull.
            let nearest = vertex_tree.radius_query(r, 2.0 * tol);
            let on_facet = nearest.iter().any(|&vi| {
                let v = vertex_ids[vi as usize];
                hull.faces_of_vertex(v).iter().any(|&f| {
                    hull.faces()[f as usize].signed_distance(r).abs() <= tol
                })
            });
            if on_facet {
                out.push(i as u32);
            }
        }
    }
    Ok(out)
}

fn quantize(p: &Point3<f64>, tol: f64) -> (i64, i64, i64) {
    if tol <= 0.0 {
        return (0, 0, 0);
    }
    (
        (p.x / tol).round() as i64,
        (p.y / tol).round() as i64,
        (p.z / tol).round() as i64,
    )
}

/// Full per-frame visibility: crop, frustum cull, backface cull, occlusion
/// removal. Returned indices refer to the map's point array.
pub fn visible_points(
    map: &PointCloudMap,
    normals: &NormalEstimate,
    camera_pose: &Pose,
    rig: &CameraRig,
    config: &GhprConfig,
) -> Result<VisibleSet> {
    config.validate()?;
    if normals.len() != map.len() {
        return Err(CoreError::LengthMismatch(format!(
            "{} normals for {} map points",
            normals.len(),
            map.len()
        )));
    }
    let cam_pos = camera_pose.position();

    let candidates = map.points_within(&cam_pos, config.crop_radius);
    let mut counts = StageCounts {
        candidates: candidates.len(),
        ..StageCounts::default()
    };

    let pts = map.points();
    let in_frustum: Vec<u32> = candidates
        .into_iter()
        .filter(|&i| {
            let p_cam = camera_pose.apply_inverse(&pts[i as usize]);
            matches!(project_point(&p_cam, rig), Projection::Pixel { .. })
        })
        .collect();
    counts.after_frustum = in_frustum.len();

    let front: Vec<u32> = in_frustum
        .into_iter()
        .filter(|&i| {
            let i = i as usize;
            if !normals.valid[i] {
                return true;
            }
            let dot = normals.normals[i].dot(&(cam_pos - pts[i]));
            if normals.oriented {
                dot > 0.0
            } else {
                // Unoriented normals carry no side information; only an
                // exactly-perpendicular normal can fail.
                dot != 0.0
            }
        })
        .collect();
    counts.after_backface = front.len();

    let rel: Vec<Vector3<f64>> = front
        .iter()
        .map(|&i| pts[i as usize] - cam_pos)
        .collect();
    let kept = ghpr_visible(&rel, config)?;
    let mut indices: Vec<u32> = kept.into_iter().map(|k| front[k as usize]).collect();
    indices.sort_unstable();
    counts.after_ghpr = indices.len();

    Ok(VisibleSet {
        indices,
        stage_counts: counts,
    })
}

/// Per-map-point drop stages for one frame (debug dump support).
pub fn visibility_stages(
    map: &PointCloudMap,
    normals: &NormalEstimate,
    camera_pose: &Pose,
    rig: &CameraRig,
    config: &GhprConfig,
) -> Result<Vec<DropStage>> {
    let mut stages = vec![DropStage::Crop; map.len()];
    let cam_pos = camera_pose.position();
    let pts = map.points();

    let candidates = map.points_within(&cam_pos, config.crop_radius);
    for &i in &candidates {
        stages[i as usize] = DropStage::Frustum;
    }
    let in_frustum: Vec<u32> = candidates
        .into_iter()
        .filter(|&i| {
            let p_cam = camera_pose.apply_inverse(&pts[i as usize]);
            matches!(project_point(&p_cam, rig), Projection::Pixel { .. })
        })
        .collect();
    for &i in &in_frustum {
        stages[i as usize] = DropStage::Backface;
    }
    let front: Vec<u32> = in_frustum
        .into_iter()
        .filter(|&i| {
            let idx = i as usize;
            if !normals.valid[idx] {
                return true;
            }
            let dot = normals.normals[idx].dot(&(cam_pos - pts[idx]));
            if normals.oriented {
                dot > 0.0
            } else {
                dot != 0.0
            }
        })
        .collect();
    for &i in &front {
        stages[i as usize] = DropStage::Ghpr;
    }
    let rel: Vec<Vector3<f64>> = front
        .iter()
        .map(|&i| pts[i as usize] - cam_pos)
        .collect();
    for k in ghpr_visible(&rel, config)? {
        stages[front[k as usize] as usize] = DropStage::None;
    }
    Ok(stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normals::{estimate_normals, NormalParams, OrientationSource};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reflect_unit_distance_is_fixed() {
        let p = Vector3::new(0.6, 0.8, 0.0);
        for gamma in [-0.01, -0.5, -1.0, -3.0] {
            let r = spherical_reflect(&p, gamma).unwrap();
            assert!((r.norm() - 1.0).abs() < 1e-12);
            assert!(r.cross(&p).norm() < 1e-12);
        }
    }

    #[test]
    fn reflect_examples() {
        let r = spherical_reflect(&Vector3::new(2.0, 0.0, 0.0), -1.0).unwrap();
        assert!((r - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        let r = spherical_reflect(&Vector3::zeros(), -1.0).unwrap();
        assert_eq!(r, Vector3::zeros());
        assert!(matches!(
            spherical_reflect(&Vector3::x(), 0.0),
            Err(CoreError::InvalidGamma(_))
        ));
        assert!(matches!(
            spherical_reflect(&Vector3::x(), 0.5),
            Err(CoreError::InvalidGamma(_))
        ));
    }

    #[test]
    fn reflect_preserves_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let p = Vector3::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
            );
            if p.norm() < 1e-6 {
                continue;
            }
            let r = spherical_reflect(&p, -0.7).unwrap();
            assert!(r.cross(&p).norm() / (p.norm() * r.norm()) < 1e-9);
            assert!(r.dot(&p) > 0.0);
        }
    }

    #[test]
    fn reflect_double_inversion_restores_distance() {
        // d^(-1 * -1) = d: applying the gamma = -1 kernel twice restores
        // the original distance.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let p = Vector3::new(rng.gen_range(0.1..40.0), rng.gen(), rng.gen());
            let once = spherical_reflect(&p, -1.0).unwrap();
            let twice = spherical_reflect(&once, -1.0).unwrap();
            assert!((twice.norm() - p.norm()).abs() < 1e-9 * p.norm().max(1.0));
        }
    }

    #[test]
    fn backface_plane_from_both_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let points: Vec<Point3<f64>> = (0..300)
            .map(|_| Point3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0))
            .collect();
        let normals = vec![Vector3::z(); points.len()];
        let valid = vec![true; points.len()];
        let kept = backface_cull(&points, &normals, &valid, &Point3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!(kept.len(), points.len());
        let kept = backface_cull(&points, &normals, &valid, &Point3::new(0.0, 0.0, -5.0)).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn backface_matches_linear_scan_on_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut points = Vec::new();
        let mut normals = Vec::new();
        let mut valid = Vec::new();
        for _ in 0..2000 {
            let dir = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            points.push(Point3::from(dir * 5.0));
            normals.push(dir);
            valid.push(rng.gen_bool(0.9));
        }
        let cam = Point3::new(20.0, 3.0, -1.0);
        let kept = backface_cull(&points, &normals, &valid, &cam).unwrap();
        let expect: Vec<u32> = (0..points.len() as u32)
            .filter(|&i| {
                let i = i as usize;
                !valid[i] || normals[i].dot(&(cam - points[i])) > 0.0
            })
            .collect();
        assert_eq!(kept, expect);
    }

    #[test]
    fn backface_length_mismatch() {
        let err = backface_cull(
            &[Point3::origin()],
            &[Vector3::z(), Vector3::z()],
            &[true],
            &Point3::origin(),
        );
        assert!(matches!(err, Err(CoreError::LengthMismatch(_))));
    }

    #[test]
    fn single_candidate_is_visible() {
        let kept = ghpr_visible(&[Vector3::new(0.0, 0.0, 5.0)], &GhprConfig::default()).unwrap();
        assert_eq!(kept, vec![0]);
        let kept = ghpr_visible(&[], &GhprConfig::default()).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn wall_hides_points_behind_it() {
        // Dense wall at z = 5 spanning the view, 100 points at z = 8 placed
        // behind it along camera rays.
        let mut candidates = Vec::new();
        let spacing = 0.05;
        let half = 3.0;
        let steps = (2.0 * half / spacing) as i32 + 1;
        for ix in 0..steps {
            for iy in 0..steps {
                candidates.push(Vector3::new(
                    -half + ix as f64 * spacing,
                    -half + iy as f64 * spacing,
                    5.0,
                ));
            }
        }
        let wall_count = candidates.len();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..100 {
            let x = rng.gen_range(-half * 0.8..half * 0.8);
            let y = rng.gen_range(-half * 0.8..half * 0.8);
            let dir = Vector3::new(x, y, 5.0).normalize();
            candidates.push(dir * (8.0 / dir.z));
        }
        let kept = ghpr_visible(&candidates, &GhprConfig::default()).unwrap();
        let wall_kept = kept.iter().filter(|&&i| (i as usize) < wall_count).count();
        let behind_kept = kept.len() - wall_kept;
        assert!(
            wall_kept as f64 >= 0.99 * wall_count as f64,
            "wall kept {wall_kept}/{wall_count}"
        );
        assert!(behind_kept <= 1, "behind-wall kept {behind_kept}/100");
    }

    #[test]
    fn sphere_visibility_matches_tangency_oracle() {
        let n = 10_000;
        let r = 5.0;
        let center = Point3::new(0.0, 0.0, 25.0);
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut candidates = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            let dir = Vector3::new(rho * th.cos(), rho * th.sin(), z);
            let p = center + dir * r;
            candidates.push(p.coords);
            // Visible iff (p - cam) . (p - center) < 0 with cam at origin.
            truth.push(p.coords.dot(&(p - center)) < 0.0);
        }
        let kept = ghpr_visible(&candidates, &GhprConfig::default()).unwrap();
        let mut kept_flags = vec![false; n];
        for &i in &kept {
            kept_flags[i as usize] = true;
        }
        let tp = (0..n).filter(|&i| kept_flags[i] && truth[i]).count() as f64;
        let fp = (0..n).filter(|&i| kept_flags[i] && !truth[i]).count() as f64;
        let fnn = (0..n).filter(|&i| !kept_flags[i] && truth[i]).count() as f64;
        let precision = tp / (tp + fp);
        let recall = tp / (tp + fnn);
        assert!(
            precision >= 0.95 && recall >= 0.95,
            "precision {precision:.4} recall {recall:.4}"
        );
    }

    #[test]
    fn nearer_point_on_shared_ray_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..20 {
            let mut candidates: Vec<Vector3<f64>> = (0..100)
                .map(|_| {
                    let dir = Vector3::new(
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                        1.0,
                    )
                    .normalize();
                    dir * rng.gen_range(2.0..40.0)
                })
                .collect();
            let dir = Vector3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 1.0)
                .normalize();
            let near_idx = candidates.len() as u32;
            candidates.push(dir * 5.0);
            let far_idx = candidates.len() as u32;
            candidates.push(dir * 9.0);

            let kept = ghpr_visible(&candidates, &GhprConfig::default()).unwrap();
            let near_in = kept.contains(&near_idx);
            let far_in = kept.contains(&far_idx);
            if near_in != far_in {
                assert!(near_in, "only the farther point of a shared ray was kept");
            }
        }
    }

    #[test]
    fn full_pipeline_counts_and_determinism() {
        // Empty map.
        let empty = PointCloudMap::new(vec![], None, None).unwrap();
        let est = estimate_normals(
            &empty,
            &NormalParams::default(),
            OrientationSource::Unoriented,
        )
        .unwrap();
        let rig = CameraRig::new(100.0, 100.0, 50.0, 50.0, 100, 100, Pose::identity()).unwrap();
        let vis = visible_points(&empty, &est, &Pose::identity(), &rig, &GhprConfig::default())
            .unwrap();
        assert_eq!(vis.stage_counts, StageCounts::default());
        assert!(vis.indices.is_empty());

        // Single on-axis point with a camera-facing normal.
        let map = PointCloudMap::new(vec![Point3::new(0.0, 0.0, 5.0)], None, None).unwrap();
        let normals = NormalEstimate {
            normals: vec![Vector3::new(0.0, 0.0, -1.0)],
            valid: vec![true],
            neighbor_counts: vec![0],
            oriented: true,
        };
        let vis = visible_points(&map, &normals, &Pose::identity(), &rig, &GhprConfig::default())
            .unwrap();
        assert_eq!(
            vis.stage_counts,
            StageCounts {
                candidates: 1,
                after_frustum: 1,
                after_backface: 1,
                after_ghpr: 1
            }
        );
        assert_eq!(vis.indices, vec![0]);

        // Determinism on a random scene.
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let pts: Vec<Point3<f64>> = (0..3000)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(1.0..40.0),
                )
            })
            .collect();
        let map = PointCloudMap::new(pts, None, None).unwrap();
        let est = estimate_normals(
            &map,
            &NormalParams::default(),
            OrientationSource::Fixed(Point3::origin()),
        )
        .unwrap();
        let a = visible_points(&map, &est, &Pose::identity(), &rig, &GhprConfig::default())
            .unwrap();
        let b = visible_points(&map, &est, &Pose::identity(), &rig, &GhprConfig::default())
            .unwrap();
        assert_eq!(a.indices, b.indices);
        assert_eq!(a.stage_counts, b.stage_counts);
        assert!(a.stage_counts.after_frustum >= a.stage_counts.after_backface);
        assert!(a.stage_counts.after_backface >= a.stage_counts.after_ghpr);
        let sorted = a.indices.windows(2).all(|w| w[0] < w[1]);
        assert!(sorted);
    }
}
