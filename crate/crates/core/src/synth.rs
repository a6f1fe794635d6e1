//! Deterministic synthetic scenes with analytic ground truth, plus an
//! independent surfel ray-casting visibility oracle. These make every
//! geometric claim in the pipeline testable without real capture data.

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::geom::{project_point, CameraRig, PointCloudMap, Pose, Projection, Trajectory};
use crate::spatial::KdTree;

/// A generated scene: points with analytic normals, per-point observation
/// origins, optional timestamps, and the generator's nominal point spacing
/// (the default surfel radius for the oracle).
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub points: Vec<Point3<f64>>,
    pub true_normals: Vec<Vector3<f64>>,
    pub origins: Vec<Point3<f64>>,
    pub timestamps: Option<Vec<f64>>,
    pub nominal_spacing: f64,
    /// Per-point surfel radius for the ray-casting oracle (the local
    /// sampling spacing of the surface each point belongs to).
    pub surfel_radii: Vec<f64>,
}

impl SyntheticScene {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_map(&self) -> Result<PointCloudMap> {
        PointCloudMap::new(
            self.points.clone(),
            self.timestamps.clone(),
            Some(self.origins.clone()),
        )
    }

    fn push(&mut self, p: Point3<f64>, n: Vector3<f64>) {
        let spacing = self.nominal_spacing;
        self.push_with_radius(p, n, spacing);
    }

    fn push_with_radius(&mut self, p: Point3<f64>, n: Vector3<f64>, radius: f64) {
        // Observers sit off the surface along the true normal, so
        // orientation fixes match the analytic sign.
        self.origins.push(p + n * 2.0);
        self.points.push(p);
        self.true_normals.push(n);
        self.surfel_radii.push(radius);
    }
}

fn empty_scene(spacing: f64) -> SyntheticScene {
    SyntheticScene {
        points: Vec::new(),
        true_normals: Vec::new(),
        origins: Vec::new(),
        timestamps: None,
        nominal_spacing: spacing,
        surfel_radii: Vec::new(),
    }
}

/// Axis-aligned plane grid on z = 0 centered at the origin: extent is the
/// total side length, so extent 10 at spacing 0.1 yields a 101 x 101 grid.
pub fn gen_plane(extent: f64, spacing: f64) -> SyntheticScene {
    let mut scene = empty_scene(spacing);
    let steps = (extent / spacing).round() as i64;
    let half = extent / 2.0;
    for iy in 0..=steps {
        for ix in 0..=steps {
            let p = Point3::new(-half + ix as f64 * spacing, -half + iy as f64 * spacing, 0.0);
            scene.push(p, Vector3::z());
        }
    }
    scene
}

/// Fibonacci-lattice sphere with outward normals.
pub fn gen_sphere(center: Point3<f64>, radius: f64, count: usize) -> SyntheticScene {
    let spacing = (4.0 * std::f64::consts::PI * radius * radius / count.max(1) as f64).sqrt();
    let mut scene = empty_scene(spacing);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..count {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
        let rho = (1.0 - z * z).sqrt();
        let th = golden * i as f64;
        let dir = Vector3::new(rho * th.cos(), rho * th.sin(), z);
        scene.push(center + dir * radius, dir);
    }
    scene
}

/// A wall grid facing the origin at z = `wall_z`, plus `behind_count`
/// points at z = `behind_z` placed behind the wall along rays from the
/// origin. With a camera at the origin looking down +z, the wall is
/// visible and every behind point is occluded.
pub fn gen_wall_occluder(
    half_extent: f64,
    spacing: f64,
    wall_z: f64,
    behind_z: f64,
    behind_count: usize,
    seed: u64,
) -> (SyntheticScene, Vec<bool>) {
    let mut scene = empty_scene(spacing);
    let steps = (2.0 * half_extent / spacing).round() as i64;
    for iy in 0..=steps {
        for ix in 0..=steps {
            let p = Point3::new(
                -half_extent + ix as f64 * spacing,
                -half_extent + iy as f64 * spacing,
                wall_z,
            );
            scene.push(p, -Vector3::z());
        }
    }
    let wall_count = scene.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..behind_count {
        let x = rng.gen_range(-half_extent * 0.8..half_extent * 0.8);
        let y = rng.gen_range(-half_extent * 0.8..half_extent * 0.8);
        let dir = Vector3::new(x, y, wall_z).normalize();
        let p = Point3::origin() + dir * (behind_z / dir.z);
        scene.push(p, -Vector3::z());
    }
    let truth: Vec<bool> = (0..scene.len()).map(|i| i < wall_count).collect();
    (scene, truth)
}

/// Parameters for the forest generator.
#[derive(Debug, Clone, Copy)]
pub struct ForestSpec {
    /// Total side length of the square ground patch, meters.
    pub extent: f64,
    pub ground_spacing: f64,
    pub trunk_count: usize,
    pub trunk_radius_min: f64,
    pub trunk_radius_max: f64,
    pub trunk_height: f64,
    pub trunk_spacing: f64,
    /// Timestamps sweep with x across this many seconds.
    pub sweep_duration: f64,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec {
            extent: 60.0,
            ground_spacing: 0.15,
            trunk_count: 50,
            trunk_radius_min: 0.25,
            trunk_radius_max: 0.45,
            trunk_height: 10.0,
            trunk_spacing: 0.05,
            sweep_duration: 60.0,
        }
    }
}

/// Ground plane at z = 0 plus vertical point-sampled cylinders standing in
/// for trunks. Points carry timestamps that sweep with x so time-window
/// filtering is exercisable on synthetic data.
pub fn gen_forest(spec: &ForestSpec, seed: u64) -> SyntheticScene {
    let mut scene = empty_scene(spec.ground_spacing);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = spec.extent / 2.0;

    let steps = (spec.extent / spec.ground_spacing).round() as i64;
    for iy in 0..=steps {
        for ix in 0..=steps {
            let p = Point3::new(
                -half + ix as f64 * spec.ground_spacing,
                -half + iy as f64 * spec.ground_spacing,
                0.0,
            );
            scene.push(p, Vector3::z());
        }
    }

    for _ in 0..spec.trunk_count {
        let cx = rng.gen_range(-half * 0.9..half * 0.9);
        let cy = rng.gen_range(-half * 0.9..half * 0.9);
        let r = rng.gen_range(spec.trunk_radius_min..spec.trunk_radius_max);
        let around = ((2.0 * std::f64::consts::PI * r) / spec.trunk_spacing).ceil() as usize;
        let up = (spec.trunk_height / spec.trunk_spacing).ceil() as usize;
        for iz in 0..up {
            let z = iz as f64 * spec.trunk_spacing;
            for ia in 0..around {
                let th = 2.0 * std::f64::consts::PI * ia as f64 / around as f64;
                let n = Vector3::new(th.cos(), th.sin(), 0.0);
                scene.push_with_radius(
                    Point3::new(cx + r * th.cos(), cy + r * th.sin(), z),
                    n,
                    spec.trunk_spacing,
                );
            }
        }
    }

    let timestamps = scene
        .points
        .iter()
        .map(|p| (p.x + half) / spec.extent * spec.sweep_duration)
        .collect();
    scene.timestamps = Some(timestamps);
    scene
}

/// A straight constant-height trajectory across the scene along +x,
/// looking forward (optical axis +z mapped to world +x, image v axis
/// pointing down at the ground).
pub fn straight_trajectory(
    x_start: f64,
    x_end: f64,
    y: f64,
    z: f64,
    t_start: f64,
    t_end: f64,
    pose_count: usize,
) -> Result<Trajectory> {
    // Camera frame: +z forward (world +x), +x right (world -y), +y down
    // (world -z).
    let rot = UnitQuaternion::from_basis_unchecked(&[
        -Vector3::y(), // camera x in world
        -Vector3::z(), // camera y in world
        Vector3::x(),  // camera z in world
    ]);
    let poses: Vec<Pose> = (0..pose_count)
        .map(|i| {
            let u = i as f64 / (pose_count - 1) as f64;
            Pose::from_parts(
                rot,
                Vector3::new(x_start + (x_end - x_start) * u, y, z),
                Some(t_start + (t_end - t_start) * u),
            )
        })
        .collect();
    Trajectory::new(poses, "world")
}

/// Ray-casting oracle configuration.
///
/// `surfel_radius = None` uses each blocker's own radius from the scene
/// (its local surface spacing). `strict_slack` implements "strictly
/// nearer": a blocker must intersect the ray more than this many meters in
/// front of the target. Discretely sampled curved surfaces put neighbor
/// tangent disks a curvature-bounded sliver (~r_s^2 / 2R) in front of
/// their own surface points, so scenes with curvature pick a slack above
/// that sliver and far below any true occlusion gap.
#[derive(Debug, Clone, Copy)]
pub struct OracleParams {
    pub surfel_radius: Option<f64>,
    pub strict_slack: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            surfel_radius: None,
            strict_slack: 1e-6,
        }
    }
}

/// Surfel ray-casting visibility: a point is visible iff it passes frustum
/// culling and no other point's surfel disk (oriented by its true normal)
/// intersects the camera ray strictly nearer.
pub fn oracle_visibility(
    scene: &SyntheticScene,
    camera_pose: &Pose,
    rig: &CameraRig,
    params: &OracleParams,
) -> Vec<bool> {
    let tree = KdTree::build(&scene.points);
    let cam = camera_pose.position();
    let max_radius = match params.surfel_radius {
        Some(r) => r,
        None => scene.surfel_radii.iter().cloned().fold(0.0, f64::max),
    };
    (0..scene.len())
        .into_par_iter()
        .map(|i| {
            if !in_frustum(&scene.points[i], camera_pose, rig) {
                return false;
            }
            let blockers = tree.segment_query(&cam, &scene.points[i], max_radius);
            !blockers.iter().any(|&j| {
                j as usize != i
                    && surfel_blocks(
                        &cam,
                        &scene.points[i],
                        &scene.points[j as usize],
                        &scene.true_normals[j as usize],
                        params
                            .surfel_radius
                            .unwrap_or(scene.surfel_radii[j as usize]),
                        params.strict_slack,
                    )
            })
        })
        .collect()
}

/// Reference implementation: identical predicate, exhaustive O(N^2) scan.
pub fn oracle_visibility_brute(
    scene: &SyntheticScene,
    camera_pose: &Pose,
    rig: &CameraRig,
    params: &OracleParams,
) -> Vec<bool> {
    let cam = camera_pose.position();
    (0..scene.len())
        .map(|i| {
            if !in_frustum(&scene.points[i], camera_pose, rig) {
                return false;
            }
            !(0..scene.len()).any(|j| {
                j != i
                    && surfel_blocks(
                        &cam,
                        &scene.points[i],
                        &scene.points[j],
                        &scene.true_normals[j],
                        params.surfel_radius.unwrap_or(scene.surfel_radii[j]),
                        params.strict_slack,
                    )
            })
        })
        .collect()
}

fn in_frustum(p: &Point3<f64>, camera_pose: &Pose, rig: &CameraRig) -> bool {
    let p_cam = camera_pose.apply_inverse(p);
    matches!(project_point(&p_cam, rig), Projection::Pixel { .. })
}

/// Does the disk at `q` (normal `n_q`) intersect the ray cam -> p more
/// than `slack` meters nearer than p?
fn surfel_blocks(
    cam: &Point3<f64>,
    p: &Point3<f64>,
    q: &Point3<f64>,
    n_q: &Vector3<f64>,
    radius: f64,
    slack: f64,
) -> bool {
    let to_p = p - cam;
    let t_p = to_p.norm();
    if t_p == 0.0 {
        return false;
    }
    let dir = to_p / t_p;
    let denom = dir.dot(n_q);
    if denom.abs() < 1e-12 {
        return false;
    }
    let t = (q - cam).dot(n_q) / denom;
    if t <= slack || t >= t_p - slack {
        return false;
    }
    let hit = cam + dir * t;
    (hit - q).norm_squared() <= radius * radius
}
