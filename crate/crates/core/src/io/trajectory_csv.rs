//! Trajectory CSV: header `timestamp,x,y,z,qx,qy,qz,qw`, one pose per line,
//! quaternion in (x, y, z, w) file order, world frame, seconds.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{CoreError, Result};
use crate::geom::{Pose, Trajectory};

pub const TRAJECTORY_HEADER: &str = "timestamp,x,y,z,qx,qy,qz,qw";

pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for pose in trajectory.poses() {
        let t = pose.timestamp().unwrap();
        let x = pose.translation();
        let q = pose.rotation().into_inner();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            t, x.x, x.y, x.z, q.i, q.j, q.k, q.w
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path, frame_id: &str) -> Result<Trajectory> {
    let parse_err = |line: usize, message: String| CoreError::Parse {
        path: path.display().to_string(),
        message: format!("line {line}: {message}"),
    };
    let r = BufReader::new(File::open(path)?);
    let mut poses = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if lineno == 0 {
            if trimmed != TRAJECTORY_HEADER {
                return Err(parse_err(
                    1,
                    format!("expected header `{TRAJECTORY_HEADER}`, got `{trimmed}`"),
                ));
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 8 {
            return Err(parse_err(
                lineno + 1,
                format!("expected 8 fields, got {}", fields.len()),
            ));
        }
        let mut vals = [0.0f64; 8];
        for (k, f) in fields.iter().enumerate() {
            vals[k] = f
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno + 1, format!("bad number `{f}`: {e}")))?;
        }
        let [t, x, y, z, qx, qy, qz, qw] = vals;
        poses.push(Pose::from_wxyz(
            qw,
            qx,
            qy,
            qz,
            Vector3::new(x, y, z),
            Some(t),
        )?);
    }
    Trajectory::new(poses, frame_id)
}

/// Frame timestamp list: one float64 seconds per line, optionally followed
/// by a comma and a reference path (e.g. the RGB image for that frame)
/// which is passed through to the frame index.
pub fn read_frame_timestamps(path: &Path) -> Result<Vec<(f64, Option<String>)>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (t_str, reference) = match trimmed.split_once(',') {
            Some((t, rest)) => (t.trim(), Some(rest.trim().to_string())),
            None => (trimmed, None),
        };
        let t: f64 = t_str.parse().map_err(|e| CoreError::Parse {
            path: path.display().to_string(),
            message: format!("line {}: bad timestamp `{t_str}`: {e}", lineno + 1),
        })?;
        out.push((t, reference));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use tempfile::tempdir;

    #[test]
    fn round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = Trajectory::new(
            vec![
                Pose::from_parts(
                    UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
                    Vector3::new(1.0, 2.0, 3.0),
                    Some(100.0),
                ),
                Pose::from_parts(
                    UnitQuaternion::from_euler_angles(-0.2, 0.1, 0.4),
                    Vector3::new(4.0, 5.0, 6.0),
                    Some(101.0),
                ),
            ],
            "world",
        )
        .unwrap();
        write_trajectory_csv(&path, &traj).unwrap();
        let back = read_trajectory_csv(&path, "world").unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.poses().iter().zip(traj.poses()) {
            assert_eq!(a.timestamp(), b.timestamp());
            assert!((a.translation() - b.translation()).norm() < 1e-15);
            assert!(a.rotation().angle_to(&b.rotation()) < 1e-12);
        }
    }

    #[test]
    fn header_is_mandatory() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        std::fs::write(&path, "1,0,0,0,0,0,0,1\n").unwrap();
        assert!(matches!(
            read_trajectory_csv(&path, "world"),
            Err(CoreError::Parse { .. })
        ));
    }

    #[test]
    fn frame_timestamps_with_references() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("frames.txt");
        std::fs::write(&path, "# comment\n10.0\n10.5, rgb/000.png\n").unwrap();
        let frames = read_frame_timestamps(&path).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0], (10.0, None));
        assert_eq!(frames[1], (10.5, Some("rgb/000.png".into())));
    }
}
