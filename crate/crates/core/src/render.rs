//! Rasterization of visible points into depth and surface-normal images,
//! and their 16-bit PNG encodings.
//!
//! Depth images store round(depth_m * 256) in a single 16-bit channel with
//! 0 marking invalid pixels, the convention used by accumulated-lidar depth
//! benchmarks. Normal images store round((n_k + 1) / 2 * 65535) per channel
//! in a 16-bit RGB image; pixels invalid in depth are all-zero.

use std::io::Cursor;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};
use nalgebra::Vector3;
#[cfg(test)]
use nalgebra::Point3;

use crate::error::{CoreError, Result};
use crate::geom::{project_point, CameraRig, PointCloudMap, Pose, Projection};
use crate::normals::{orient_normal, NormalEstimate};
use crate::visibility::VisibleSet;

/// Semi-dense metric depth image with validity mask.
#[derive(Debug, Clone)]
pub struct DepthFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major camera-frame z in meters; 0 where invalid.
    pub depth: Vec<f32>,
    pub valid: Vec<bool>,
    pub timestamp: f64,
    /// Camera-in-world pose; absent on frames decoded from image bytes.
    pub pose: Option<Pose>,
}

impl DepthFrame {
    pub fn empty(width: u32, height: u32) -> Self {
        let n = (width * height) as usize;
        DepthFrame {
            width,
            height,
            depth: vec![0.0; n],
            valid: vec![false; n],
            timestamp: 0.0,
            pose: None,
        }
    }

    pub fn pixel_index(&self, col: u32, row: u32) -> usize {
        (row * self.width + col) as usize
    }
}

/// Per-pixel unit surface normals in the camera frame; the validity mask is
/// identical to the paired depth frame's.
#[derive(Debug, Clone)]
pub struct NormalFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major camera-frame normals; zeros where invalid.
    pub normal: Vec<[f32; 3]>,
    pub valid: Vec<bool>,
}

/// Rasterize the visible points: each point lands in the pixel under the
/// floor of its continuous projection, nearest depth wins, and the winning
/// point's oriented normal (rotated into the camera frame) fills the normal
/// image. Points with no valid normal contribute their view direction
/// (unit vector toward the camera) so every valid pixel carries a unit
/// normal.
pub fn render_frame(
    map: &PointCloudMap,
    normals: &NormalEstimate,
    camera_pose: &Pose,
    rig: &CameraRig,
    vis: &VisibleSet,
) -> (DepthFrame, NormalFrame) {
    let n = (rig.width * rig.height) as usize;
    let mut depth = vec![0.0f32; n];
    let mut valid = vec![false; n];
    let mut normal = vec![[0.0f32; 3]; n];
    let cam_pos = camera_pose.position();
    let rot_inv = camera_pose.rotation().inverse();

    for &idx in &vis.indices {
        let p_world = map.points()[idx as usize];
        let p_cam = camera_pose.apply_inverse(&p_world);
        let (u, v, z) = match project_point(&p_cam, rig) {
            Projection::Pixel { u, v, depth } => (u, v, depth),
            _ => continue,
        };
        let col = u.floor() as u32;
        let row = v.floor() as u32;
        let pix = (row * rig.width + col) as usize;
        let z = z as f32;
        if valid[pix] && depth[pix] <= z {
            continue;
        }
        let n_world = if normals.valid[idx as usize] {
            let nw = normals.normals[idx as usize];
            if normals.oriented {
                nw
            } else {
                orient_normal(&nw, &p_world, &cam_pos)
            }
        } else {
            (cam_pos - p_world).normalize()
        };
        let n_cam: Vector3<f64> = rot_inv * n_world;
        depth[pix] = z;
        valid[pix] = true;
        normal[pix] = [n_cam.x as f32, n_cam.y as f32, n_cam.z as f32];
    }

    (
        DepthFrame {
            width: rig.width,
            height: rig.height,
            depth,
            valid: valid.clone(),
            timestamp: camera_pose.timestamp().unwrap_or(0.0),
            pose: Some(*camera_pose),
        },
        NormalFrame {
            width: rig.width,
            height: rig.height,
            normal,
            valid,
        },
    )
}

/// Encode a depth frame as 16-bit grayscale PNG bytes.
///
/// Valid depths must lie in (0, 256) m. A valid depth that would quantize
/// to 0 (below ~2 mm) is stored as 1 so the validity mask survives the
/// round trip.
pub fn encode_depth(frame: &DepthFrame) -> Result<Vec<u8>> {
    let mut buf: Vec<u16> = Vec::with_capacity(frame.depth.len());
    for (i, (&d, &v)) in frame.depth.iter().zip(&frame.valid).enumerate() {
        if !v {
            buf.push(0);
            continue;
        }
        let d = d as f64;
        if !(d > 0.0 && d < 256.0) {
            return Err(CoreError::RangeError(d));
        }
        let q = (d * 256.0).round() as u32;
        if q > u16::MAX as u32 {
            return Err(CoreError::RangeError(d));
        }
        let _ = i;
        buf.push(q.max(1) as u16);
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(frame.width, frame.height, buf)
            .ok_or_else(|| CoreError::Image("depth buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    DynamicImage::ImageLuma16(img)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| CoreError::Image(e.to_string()))?;
    Ok(out.into_inner())
}

/// Decode 16-bit grayscale PNG bytes into a depth frame. Timestamp and pose
/// are not part of the image payload (the frame index carries them).
pub fn decode_depth(bytes: &[u8]) -> Result<DepthFrame> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| CoreError::Image(e.to_string()))?;
    let img = match img {
        DynamicImage::ImageLuma16(img) => img,
        other => {
            return Err(CoreError::Image(format!(
                "expected 16-bit grayscale depth image, got {:?}",
                other.color()
            )))
        }
    };
    let (width, height) = img.dimensions();
    let mut depth = Vec::with_capacity((width * height) as usize);
    let mut valid = Vec::with_capacity((width * height) as usize);
    for &Luma([q]) in img.pixels() {
        depth.push(q as f32 / 256.0);
        valid.push(q != 0);
    }
    Ok(DepthFrame {
        width,
        height,
        depth,
        valid,
        timestamp: 0.0,
        pose: None,
    })
}

/// Encode a normal frame as 16-bit RGB PNG bytes.
pub fn encode_normal(frame: &NormalFrame) -> Result<Vec<u8>> {
    let mut buf: Vec<u16> = Vec::with_capacity(frame.normal.len() * 3);
    for (n, &v) in frame.normal.iter().zip(&frame.valid) {
        if !v {
            buf.extend_from_slice(&[0, 0, 0]);
            continue;
        }
        for k in 0..3 {
            let c = ((n[k] as f64 + 1.0) / 2.0 * 65535.0).round();
            buf.push(c.clamp(0.0, 65535.0) as u16);
        }
    }
    let img: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(frame.width, frame.height, buf)
            .ok_or_else(|| CoreError::Image("normal buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    DynamicImage::ImageRgb16(img)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| CoreError::Image(e.to_string()))?;
    Ok(out.into_inner())
}

/// Decode 16-bit RGB PNG bytes into a normal frame.
pub fn decode_normal(bytes: &[u8]) -> Result<NormalFrame> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| CoreError::Image(e.to_string()))?;
    let img = match img {
        DynamicImage::ImageRgb16(img) => img,
        other => {
            return Err(CoreError::Image(format!(
                "expected 16-bit RGB normal image, got {:?}",
                other.color()
            )))
        }
    };
    let (width, height) = img.dimensions();
    let mut normal = Vec::with_capacity((width * height) as usize);
    let mut valid = Vec::with_capacity((width * height) as usize);
    for &Rgb([r, g, b]) in img.pixels() {
        if r == 0 && g == 0 && b == 0 {
            normal.push([0.0; 3]);
            valid.push(false);
        } else {
            normal.push([
                (r as f64 / 65535.0 * 2.0 - 1.0) as f32,
                (g as f64 / 65535.0 * 2.0 - 1.0) as f32,
                (b as f64 / 65535.0 * 2.0 - 1.0) as f32,
            ]);
            valid.push(true);
        }
    }
    Ok(NormalFrame {
        width,
        height,
        normal,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::visibility::StageCounts;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rig_100() -> CameraRig {
        CameraRig::new(100.0, 100.0, 50.0, 50.0, 100, 100, Pose::identity()).unwrap()
    }

    fn oriented_normals(normals: Vec<Vector3<f64>>) -> NormalEstimate {
        let n = normals.len();
        NormalEstimate {
            normals,
            valid: vec![true; n],
            neighbor_counts: vec![0; n],
            oriented: true,
        }
    }

    fn vis_all(n: usize) -> VisibleSet {
        VisibleSet {
            indices: (0..n as u32).collect(),
            stage_counts: StageCounts::default(),
        }
    }

    #[test]
    fn single_point_lands_on_principal_pixel() {
        let map = PointCloudMap::new(vec![Point3::new(0.0, 0.0, 5.0)], None, None).unwrap();
        let normals = oriented_normals(vec![Vector3::new(0.0, 0.0, -1.0)]);
        let (d, n) = render_frame(&map, &normals, &Pose::identity(), &rig_100(), &vis_all(1));
        let pix = d.pixel_index(50, 50);
        assert!(d.valid[pix]);
        assert_eq!(d.depth[pix], 5.0);
        assert_eq!(d.valid.iter().filter(|&&v| v).count(), 1);
        assert_eq!(n.valid, d.valid);
        assert_eq!(n.normal[pix], [0.0, 0.0, -1.0]);
    }

    #[test]
    fn z_buffer_keeps_nearest() {
        let map = PointCloudMap::new(
            vec![Point3::new(0.0, 0.0, 7.0), Point3::new(0.0, 0.0, 5.0)],
            None,
            None,
        )
        .unwrap();
        let normals = oriented_normals(vec![
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 0.0, -1.0),
        ]);
        let (d, n) = render_frame(&map, &normals, &Pose::identity(), &rig_100(), &vis_all(2));
        let pix = d.pixel_index(50, 50);
        assert_eq!(d.depth[pix], 5.0);
        assert_eq!(n.normal[pix], [0.0, 0.0, -1.0]);
    }

    #[test]
    fn tilted_plane_depth_matches_ray_cast() {
        // Plane n . x = c with a tilt so depth varies across the image.
        let plane_n = Vector3::new(0.3, -0.2, 1.0).normalize();
        let plane_c = 6.0;
        let mut pts = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..200_00 {
            let x = rng.gen_range(-4.0..4.0);
            let y = rng.gen_range(-4.0..4.0);
            let z = (plane_c - plane_n.x * x - plane_n.y * y) / plane_n.z;
            pts.push(Point3::new(x, y, z));
        }
        let n = pts.len();
        let map = PointCloudMap::new(pts, None, None).unwrap();
        let normals = oriented_normals(vec![-plane_n; n]);
        let rig = rig_100();
        let (d, _) = render_frame(&map, &normals, &Pose::identity(), &rig, &vis_all(n));
        let mut checked = 0;
        for row in 0..rig.height {
            for col in 0..rig.width {
                let pix = d.pixel_index(col, row);
                if !d.valid[pix] {
                    continue;
                }
                let dir = Vector3::new(
                    (col as f64 + 0.5 - rig.cx) / rig.fx,
                    (row as f64 + 0.5 - rig.cy) / rig.fy,
                    1.0,
                );
                let expect = plane_c / plane_n.dot(&dir);
                let got = d.depth[pix] as f64;
                assert!(
                    (got - expect).abs() / expect < 0.02,
                    "pixel ({col},{row}): got {got}, expect {expect}"
                );
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn z_buffer_is_minimal_by_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let rig = CameraRig::new(20.0, 20.0, 10.0, 10.0, 20, 20, Pose::identity()).unwrap();
        for _ in 0..5 {
            let pts: Vec<Point3<f64>> = (0..500)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(1.0..20.0),
                    )
                })
                .collect();
            let n = pts.len();
            let map = PointCloudMap::new(pts.clone(), None, None).unwrap();
            let normals = oriented_normals(vec![Vector3::new(0.0, 0.0, -1.0); n]);
            let (d, _) = render_frame(&map, &normals, &Pose::identity(), &rig, &vis_all(n));
            // Brute force: min z per pixel over all points mapping there.
            let mut expect = vec![f32::INFINITY; (rig.width * rig.height) as usize];
            for p in &pts {
                if let Projection::Pixel { u, v, depth } = project_point(p, &rig) {
                    let pix = (v.floor() as u32 * rig.width + u.floor() as u32) as usize;
                    expect[pix] = expect[pix].min(depth as f32);
                }
            }
            for pix in 0..expect.len() {
                if expect[pix].is_finite() {
                    assert!(d.valid[pix]);
                    assert_eq!(d.depth[pix], expect[pix]);
                } else {
                    assert!(!d.valid[pix]);
                }
            }
        }
    }

    #[test]
    fn depth_encoding_examples() {
        let mut f = DepthFrame::empty(4, 1);
        f.depth[0] = 5.0;
        f.valid[0] = true;
        let bytes = encode_depth(&f).unwrap();
        let img = image::load_from_memory(&bytes).unwrap();
        let img = img.as_luma16().unwrap();
        assert_eq!(img.get_pixel(0, 0).0[0], 1280); // 5 * 256
        assert_eq!(img.get_pixel(1, 0).0[0], 0);
        let back = decode_depth(&bytes).unwrap();
        assert!(back.valid[0] && !back.valid[1]);
        assert_eq!(back.depth[0], 5.0);
    }

    #[test]
    fn depth_round_trip_error_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let mut f = DepthFrame::empty(64, 64);
        for i in 0..f.depth.len() {
            if rng.gen_bool(0.7) {
                f.depth[i] = rng.gen_range(0.01..255.9);
                f.valid[i] = true;
            }
        }
        let bytes = encode_depth(&f).unwrap();
        let back = decode_depth(&bytes).unwrap();
        assert_eq!(back.valid, f.valid);
        for i in 0..f.depth.len() {
            if f.valid[i] {
                assert!((back.depth[i] - f.depth[i]).abs() <= 1.0 / 512.0);
            }
        }
    }

    #[test]
    fn depth_range_errors() {
        let mut f = DepthFrame::empty(1, 1);
        f.depth[0] = 256.0;
        f.valid[0] = true;
        assert!(matches!(encode_depth(&f), Err(CoreError::RangeError(_))));
        f.depth[0] = 0.0;
        assert!(matches!(encode_depth(&f), Err(CoreError::RangeError(_))));
    }

    #[test]
    fn normal_round_trip_stays_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut f = NormalFrame {
            width: 32,
            height: 32,
            normal: vec![[0.0; 3]; 1024],
            valid: vec![false; 1024],
        };
        for i in 0..1024 {
            if rng.gen_bool(0.6) {
                let v = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .normalize();
                f.normal[i] = [v.x as f32, v.y as f32, v.z as f32];
                f.valid[i] = true;
            }
        }
        let bytes = encode_normal(&f).unwrap();
        let back = decode_normal(&bytes).unwrap();
        assert_eq!(back.valid, f.valid);
        for i in 0..1024 {
            if f.valid[i] {
                let n = Vector3::new(
                    back.normal[i][0] as f64,
                    back.normal[i][1] as f64,
                    back.normal[i][2] as f64,
                );
                assert!((n.norm() - 1.0).abs() < 1e-3);
                for k in 0..3 {
                    assert!((back.normal[i][k] - f.normal[i][k]).abs() < 5e-5);
                }
            }
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let mut f = DepthFrame::empty(32, 32);
        for i in 0..f.depth.len() {
            if rng.gen_bool(0.5) {
                f.depth[i] = rng.gen_range(0.1..100.0);
                f.valid[i] = true;
            }
        }
        assert_eq!(encode_depth(&f).unwrap(), encode_depth(&f).unwrap());
    }
}
