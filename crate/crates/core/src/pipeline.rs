//! Per-sequence orchestration: annotate frames, write submaps, and export
//! synthetic sequences that exercise the whole stack.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::{interpolate_pose, CameraRig, PointCloudMap, Pose, Trajectory};
use crate::manifest::warn_mismatch;
use crate::normals::{estimate_normals, NormalParams, OrientationSource};
use crate::render::{encode_depth, encode_normal, render_frame};
use crate::submap::{extract_submap_sequence, SubmapSpec};
use crate::synth::SyntheticScene;
use crate::visibility::{visibility_stages, visible_points, GhprConfig, StageCounts};
use crate::{io, submap};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseJson {
    pub translation: [f64; 3],
    pub quaternion_xyzw: [f64; 4],
}

impl PoseJson {
    pub fn from_pose(pose: &Pose) -> Self {
        let t = pose.translation();
        let q = pose.rotation().into_inner();
        PoseJson {
            translation: [t.x, t.y, t.z],
            quaternion_xyzw: [q.i, q.j, q.k, q.w],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameIndexEntry {
    pub timestamp: f64,
    pub timestamp_ns: i64,
    pub depth: String,
    pub normal: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rgb: Option<String>,
    pub pose: PoseJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedFrame {
    pub timestamp: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageCountsJson {
    pub candidates: usize,
    pub after_frustum: usize,
    pub after_backface: usize,
    pub after_ghpr: usize,
}

impl From<StageCounts> for StageCountsJson {
    fn from(c: StageCounts) -> Self {
        StageCountsJson {
            candidates: c.candidates,
            after_frustum: c.after_frustum,
            after_backface: c.after_backface,
            after_ghpr: c.after_ghpr,
        }
    }
}

/// `frames.json`: the per-sequence annotation index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameIndex {
    pub sequence: String,
    pub frames: Vec<FrameIndexEntry>,
    pub skipped: Vec<SkippedFrame>,
    pub stage_counts: StageCountsJson,
}

/// Annotation configuration knobs.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnnotateOptions {
    pub ghpr: GhprConfigOpt,
    pub normals: NormalParamsOpt,
    pub debug_dump: bool,
}

/// Thin wrappers keeping the option structs `Copy + Default`.
#[derive(Debug, Clone, Copy)]
pub struct GhprConfigOpt(pub GhprConfig);
impl Default for GhprConfigOpt {
    fn default() -> Self {
        GhprConfigOpt(GhprConfig::default())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NormalParamsOpt(pub NormalParams);
impl Default for NormalParamsOpt {
    fn default() -> Self {
        NormalParamsOpt(NormalParams::default())
    }
}

#[derive(Debug)]
pub struct AnnotateSummary {
    pub frames_written: usize,
    pub frames_skipped: usize,
    pub stage_counts: StageCounts,
    pub index_path: PathBuf,
    pub output_dir: PathBuf,
}

pub fn timestamp_ns(t: f64) -> i64 {
    (t * 1e9).round() as i64
}

/// Choose the normal-orientation source for a map: per-point origins when
/// present, else the time-nearest trajectory pose, else leave normals
/// unoriented (each frame then orients toward its own camera).
pub fn orientation_for<'a>(
    map: &PointCloudMap,
    trajectory: &'a Trajectory,
) -> OrientationSource<'a> {
    if map.observation_origins().is_some() {
        OrientationSource::PerPointOrigins
    } else if map.timestamps().is_some() {
        OrientationSource::NearestTrajectoryPose(trajectory)
    } else {
        OrientationSource::Unoriented
    }
}

/// Annotate every frame timestamp: estimate normals once, then per frame
/// interpolate the pose, run visibility, rasterize, and write
/// `depth/<ns>.png` + `normal/<ns>.png` under `out_dir/<sequence>`.
/// Frames whose timestamp falls outside the trajectory are skipped with a
/// log entry; IO errors abort.
pub fn annotate_sequence(
    map: &PointCloudMap,
    trajectory: &Trajectory,
    rig: &CameraRig,
    frames: &[(f64, Option<String>)],
    sequence_label: &str,
    out_dir: &Path,
    options: &AnnotateOptions,
) -> Result<AnnotateSummary> {
    options.ghpr.0.validate()?;
    let seq_dir = out_dir.join(sequence_label);
    let depth_dir = seq_dir.join("depth");
    let normal_dir = seq_dir.join("normal");
    fs::create_dir_all(&depth_dir)?;
    fs::create_dir_all(&normal_dir)?;
    let debug_dir = seq_dir.join("debug");
    if options.debug_dump {
        fs::create_dir_all(&debug_dir)?;
    }

    log::info!(
        "estimating normals for {} points (radius {} m)",
        map.len(),
        options.normals.0.neighborhood_radius
    );
    let normals = estimate_normals(map, &options.normals.0, orientation_for(map, trajectory))?;

    enum FrameOutcome {
        Written(Box<FrameIndexEntry>, StageCounts),
        Skipped(SkippedFrame),
    }

    let results: Vec<Result<FrameOutcome>> = frames
        .par_iter()
        .map(|(t, rgb)| {
            let body_pose = match interpolate_pose(trajectory, *t) {
                Ok(p) => p,
                Err(e @ CoreError::OutOfRange { .. }) => {
                    log::warn!("frame {t}: {e}; skipped");
                    return Ok(FrameOutcome::Skipped(SkippedFrame {
                        timestamp: *t,
                        reason: e.to_string(),
                    }));
                }
                Err(e) => return Err(e),
            };
            let camera_pose = rig.camera_pose(&body_pose);
            let vis = visible_points(map, &normals, &camera_pose, rig, &options.ghpr.0)?;
            let (depth_frame, normal_frame) =
                render_frame(map, &normals, &camera_pose, rig, &vis);

            let ns = timestamp_ns(*t);
            let depth_rel = format!("depth/{ns}.png");
            let normal_rel = format!("normal/{ns}.png");
            let depth_bytes = match encode_depth(&depth_frame) {
                Ok(b) => b,
                Err(e @ CoreError::RangeError(_)) => {
                    log::warn!("frame {t}: {e}; skipped");
                    return Ok(FrameOutcome::Skipped(SkippedFrame {
                        timestamp: *t,
                        reason: e.to_string(),
                    }));
                }
                Err(e) => return Err(e),
            };
            fs::write(seq_dir.join(&depth_rel), depth_bytes)?;
            fs::write(seq_dir.join(&normal_rel), encode_normal(&normal_frame)?)?;

            if options.debug_dump {
                let stages =
                    visibility_stages(map, &normals, &camera_pose, rig, &options.ghpr.0)?;
                let mut csv = String::from("index,stage_dropped\n");
                for (i, s) in stages.iter().enumerate() {
                    csv.push_str(&format!("{i},{}\n", s.as_str()));
                }
                fs::write(debug_dir.join(format!("{ns}.csv")), csv)?;
            }

            Ok(FrameOutcome::Written(
                Box::new(FrameIndexEntry {
                    timestamp: *t,
                    timestamp_ns: ns,
                    depth: depth_rel,
                    normal: normal_rel,
                    rgb: rgb.clone(),
                    pose: PoseJson::from_pose(&camera_pose),
                }),
                vis.stage_counts,
            ))
        })
        .collect();

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut totals = StageCounts::default();
    for r in results {
        match r? {
            FrameOutcome::Written(entry, counts) => {
                totals.accumulate(&counts);
                entries.push(*entry);
            }
            FrameOutcome::Skipped(s) => skipped.push(s),
        }
    }
    entries.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).unwrap());
    skipped.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).unwrap());

    let index = FrameIndex {
        sequence: sequence_label.to_string(),
        frames: entries,
        skipped,
        stage_counts: totals.into(),
    };
    let index_path = seq_dir.join("frames.json");
    let mut f = fs::File::create(&index_path)?;
    serde_json::to_writer_pretty(&mut f, &index)
        .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    f.write_all(b"\n")?;

    Ok(AnnotateSummary {
        frames_written: index.frames.len(),
        frames_skipped: index.skipped.len(),
        stage_counts: totals,
        index_path,
        output_dir: seq_dir,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmapIndexEntry {
    pub timestamp: f64,
    pub timestamp_ns: i64,
    pub file: String,
    pub point_count: usize,
    pub center_pose: PoseJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmapIndex {
    pub sequence: String,
    pub radius: f64,
    pub time_window: Option<f64>,
    pub stride: f64,
    pub submaps: Vec<SubmapIndexEntry>,
}

/// Extract and write the submap sequence as binary PLY files named
/// `submap_<sequence>_<center_timestamp_ns>.ply`, plus an index JSON.
pub fn write_submap_sequence(
    map: &PointCloudMap,
    trajectory: &Trajectory,
    spec: &SubmapSpec,
    sequence_label: &str,
    out_dir: &Path,
    declared_count: Option<u64>,
) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let submaps = extract_submap_sequence(map, trajectory, spec)?;
    if let Some(declared) = declared_count {
        warn_mismatch("submap_count", declared as f64, submaps.len() as f64);
    }
    let mut entries = Vec::with_capacity(submaps.len());
    for sub in &submaps {
        let t = sub.center_pose.timestamp().unwrap();
        let ns = timestamp_ns(t);
        let file = format!("submap_{sequence_label}_{ns}.ply");
        io::write_ply(&out_dir.join(&file), &sub.points, None, None)?;
        entries.push(SubmapIndexEntry {
            timestamp: t,
            timestamp_ns: ns,
            file,
            point_count: sub.points.len(),
            center_pose: PoseJson::from_pose(&sub.center_pose),
        });
    }
    let index = SubmapIndex {
        sequence: sequence_label.to_string(),
        radius: spec.radius,
        time_window: spec.time_window,
        stride: spec.stride,
        submaps: entries,
    };
    let index_path = out_dir.join(format!("submaps_{sequence_label}.json"));
    let f = fs::File::create(&index_path)?;
    serde_json::to_writer_pretty(f, &index)
        .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    Ok(index_path)
}

/// Export a synthetic scene as a full on-disk sequence (map PLY,
/// trajectory CSV, rig JSON, frame timestamps, manifest) so the CLI runs
/// end-to-end without real data.
pub fn export_synthetic_sequence(
    scene: &SyntheticScene,
    trajectory: &Trajectory,
    rig: &CameraRig,
    frame_rate_hz: f64,
    sequence_label: &str,
    dir: &Path,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let map_path = dir.join("map.ply");
    io::write_ply(
        &map_path,
        &scene.points,
        scene.timestamps.as_deref(),
        Some(&scene.origins),
    )?;
    let traj_path = dir.join("trajectory.csv");
    io::write_trajectory_csv(&traj_path, trajectory)?;
    let rig_path = dir.join("rig.json");
    io::write_rig_json(&rig_path, rig)?;

    let frames_path = dir.join("frames.txt");
    let mut f = fs::File::create(&frames_path)?;
    let dt = 1.0 / frame_rate_hz;
    let mut t = trajectory.t_first();
    while t <= trajectory.t_last() + 1e-9 {
        writeln!(f, "{t}")?;
        t += dt;
    }

    let manifest = crate::manifest::SequenceManifest {
        sequence_label: sequence_label.to_string(),
        trajectory_path: "trajectory.csv".into(),
        point_cloud_path: "map.ply".into(),
        camera_rig_path: "rig.json".into(),
        frame_timestamps_path: "frames.txt".into(),
        declared_stats: None,
    };
    let manifest_path = dir.join("manifest.json");
    manifest.write(&manifest_path)?;
    Ok(manifest_path)
}

/// Euclidean trajectory length in meters.
pub fn trajectory_length(trajectory: &Trajectory) -> f64 {
    trajectory
        .poses()
        .windows(2)
        .map(|w| (w[1].translation() - w[0].translation()).norm())
        .sum()
}

/// Convenience used by tests and the synth command: camera position of a
/// frame after extrinsic composition.
pub fn camera_position_at(
    trajectory: &Trajectory,
    rig: &CameraRig,
    t: f64,
) -> Result<Point3<f64>> {
    let body = interpolate_pose(trajectory, t)?;
    Ok(rig.camera_pose(&body).position())
}

/// Re-export for CLI use.
pub use submap::submap_center_times;
