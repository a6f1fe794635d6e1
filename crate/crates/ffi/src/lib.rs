//! C ABI for the annotation pipeline: opaque handles over the core types,
//! status codes for every fallible call, and a thread-local error message.
//!
//! The generated header lands in `include/wildannot.h`. Every `*_load_*`
//! function allocates a handle that must be released with the matching
//! `*_free`; all other outputs are plain C structs filled through out
//! pointers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use wildannot_core::deptheval::{depth_metrics, Delta1Convention};
use wildannot_core::error::CoreError;
use wildannot_core::geom::{interpolate_pose, CameraRig, PointCloudMap, Trajectory};
use wildannot_core::io;
use wildannot_core::normals::NormalParams;
use wildannot_core::pipeline::{annotate_sequence, AnnotateOptions, GhprConfigOpt, NormalParamsOpt};
use wildannot_core::render::decode_depth;
use wildannot_core::visibility::GhprConfig;

/// Result of every fallible API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaStatus {
    WaOk = 0,
    WaNullPointer = 1,
    WaInvalidArgument = 2,
    WaParseError = 3,
    WaIoError = 4,
    WaOutOfRange = 5,
    WaRuntimeError = 6,
}

/// Opaque point-cloud map handle.
pub struct WaMap(PointCloudMap);
/// Opaque trajectory handle.
pub struct WaTrajectory(Trajectory);
/// Opaque camera-rig handle.
pub struct WaRig(CameraRig);

/// A pose sample: translation plus quaternion in (x, y, z, w) order.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WaPose {
    pub translation: [f64; 3],
    pub quaternion_xyzw: [f64; 4],
    pub timestamp: f64,
}

/// Annotation tuning; `wa_annotate_params_default` fills the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WaAnnotateParams {
    pub gamma: f64,
    pub crop_radius: f64,
    pub normal_radius: f64,
    pub min_neighbors: u32,
}

/// Aggregate annotation outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WaAnnotateStats {
    pub frames_written: u64,
    pub frames_skipped: u64,
    pub candidates: u64,
    pub after_frustum: u64,
    pub after_backface: u64,
    pub visible: u64,
}

/// Depth metrics over jointly valid pixels.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WaDepthMetrics {
    pub delta1: f64,
    pub abs_rel: f64,
    pub rmse: f64,
    pub pixel_count: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(e: &CoreError) -> WaStatus {
    let status = match e {
        CoreError::Io(_) => WaStatus::WaIoError,
        CoreError::Parse { .. } => WaStatus::WaParseError,
        CoreError::OutOfRange { .. } => WaStatus::WaOutOfRange,
        CoreError::InvalidInput(_)
        | CoreError::InvalidGamma(_)
        | CoreError::LengthMismatch(_)
        | CoreError::DimensionMismatch(_)
        | CoreError::ShapeMismatch(_) => WaStatus::WaInvalidArgument,
        _ => WaStatus::WaRuntimeError,
    };
    let msg = CString::new(e.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
    status
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::default());
}

/// Message for the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// ABI version; bumped on breaking layout changes.
#[no_mangle]
pub extern "C" fn wa_abi_version() -> u32 {
    1
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Option<&'a Path> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok().map(Path::new)
}

/// Load a point-cloud map from a PLY file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wa_map_load_ply(path: *const c_char, out: *mut *mut WaMap) -> WaStatus {
    if out.is_null() {
        return WaStatus::WaNullPointer;
    }
    let Some(path) = path_arg(path) else {
        return WaStatus::WaNullPointer;
    };
    match io::read_ply(path) {
        Ok(map) => {
            clear_error();
            *out = Box::into_raw(Box::new(WaMap(map)));
            WaStatus::WaOk
        }
        Err(e) => set_error(&e),
    }
}

/// # Safety
/// `map` must come from `wa_map_load_ply` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wa_map_free(map: *mut WaMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a live handle (or null, which reports zero).
#[no_mangle]
pub unsafe extern "C" fn wa_map_point_count(map: *const WaMap) -> usize {
    map.as_ref().map(|m| m.0.len()).unwrap_or(0)
}

/// Load a trajectory CSV (`timestamp,x,y,z,qx,qy,qz,qw`).
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wa_trajectory_load_csv(
    path: *const c_char,
    out: *mut *mut WaTrajectory,
) -> WaStatus {
    if out.is_null() {
        return WaStatus::WaNullPointer;
    }
    let Some(path) = path_arg(path) else {
        return WaStatus::WaNullPointer;
    };
    match io::read_trajectory_csv(path, "world") {
        Ok(t) => {
            clear_error();
            *out = Box::into_raw(Box::new(WaTrajectory(t)));
            WaStatus::WaOk
        }
        Err(e) => set_error(&e),
    }
}

/// # Safety
/// `trajectory` must come from `wa_trajectory_load_csv`.
#[no_mangle]
pub unsafe extern "C" fn wa_trajectory_free(trajectory: *mut WaTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// First and last pose timestamps.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wa_trajectory_span(
    trajectory: *const WaTrajectory,
    t_first: *mut f64,
    t_last: *mut f64,
) -> WaStatus {
    let Some(t) = trajectory.as_ref() else {
        return WaStatus::WaNullPointer;
    };
    if t_first.is_null() || t_last.is_null() {
        return WaStatus::WaNullPointer;
    }
    *t_first = t.0.t_first();
    *t_last = t.0.t_last();
    WaStatus::WaOk
}

/// Interpolate the trajectory at time `t` (slerp rotation, linear
/// translation).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wa_trajectory_interpolate(
    trajectory: *const WaTrajectory,
    t: f64,
    out: *mut WaPose,
) -> WaStatus {
    let Some(traj) = trajectory.as_ref() else {
        return WaStatus::WaNullPointer;
    };
    if out.is_null() {
        return WaStatus::WaNullPointer;
    }
    match interpolate_pose(&traj.0, t) {
        Ok(pose) => {
            clear_error();
            let x = pose.translation();
            let q = pose.rotation().into_inner();
            *out = WaPose {
                translation: [x.x, x.y, x.z],
                quaternion_xyzw: [q.i, q.j, q.k, q.w],
                timestamp: pose.timestamp().unwrap_or(t),
            };
            WaStatus::WaOk
        }
        Err(e) => set_error(&e),
    }
}

/// Load a camera rig JSON.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wa_rig_load_json(path: *const c_char, out: *mut *mut WaRig) -> WaStatus {
    if out.is_null() {
        return WaStatus::WaNullPointer;
    }
    let Some(path) = path_arg(path) else {
        return WaStatus::WaNullPointer;
    };
    match io::read_rig_json(path) {
        Ok(rig) => {
            clear_error();
            *out = Box::into_raw(Box::new(WaRig(rig)));
            WaStatus::WaOk
        }
        Err(e) => set_error(&e),
    }
}

/// # Safety
/// `rig` must come from `wa_rig_load_json`.
#[no_mangle]
pub unsafe extern "C" fn wa_rig_free(rig: *mut WaRig) {
    if !rig.is_null() {
        drop(Box::from_raw(rig));
    }
}

/// Defaults for [`WaAnnotateParams`].
#[no_mangle]
pub extern "C" fn wa_annotate_params_default() -> WaAnnotateParams {
    let ghpr = GhprConfig::default();
    let normals = NormalParams::default();
    WaAnnotateParams {
        gamma: ghpr.gamma,
        crop_radius: ghpr.crop_radius,
        normal_radius: normals.neighborhood_radius,
        min_neighbors: normals.min_neighbors as u32,
    }
}

/// Annotate a frame sequence: writes `depth/<ns>.png`, `normal/<ns>.png`
/// and `frames.json` under `out_dir/<sequence_label>`.
///
/// # Safety
/// Handles must be live; `timestamps` must point to `count` doubles;
/// strings must be NUL-terminated UTF-8. `params` and `stats` may be null.
#[no_mangle]
pub unsafe extern "C" fn wa_annotate_sequence(
    map: *const WaMap,
    trajectory: *const WaTrajectory,
    rig: *const WaRig,
    timestamps: *const f64,
    count: usize,
    sequence_label: *const c_char,
    out_dir: *const c_char,
    params: *const WaAnnotateParams,
    stats: *mut WaAnnotateStats,
) -> WaStatus {
    let (Some(map), Some(traj), Some(rig)) = (map.as_ref(), trajectory.as_ref(), rig.as_ref())
    else {
        return WaStatus::WaNullPointer;
    };
    if timestamps.is_null() && count > 0 {
        return WaStatus::WaNullPointer;
    }
    let label = if sequence_label.is_null() {
        None
    } else {
        CStr::from_ptr(sequence_label).to_str().ok()
    };
    let (Some(label), Some(out_dir)) = (label, path_arg(out_dir)) else {
        return WaStatus::WaNullPointer;
    };
    let frames: Vec<(f64, Option<String>)> = if count == 0 {
        Vec::new()
    } else {
        std::slice::from_raw_parts(timestamps, count)
            .iter()
            .map(|&t| (t, None))
            .collect()
    };
    let p = if params.is_null() {
        wa_annotate_params_default()
    } else {
        *params
    };
    let options = AnnotateOptions {
        ghpr: GhprConfigOpt(GhprConfig {
            gamma: p.gamma,
            crop_radius: p.crop_radius,
        }),
        normals: NormalParamsOpt(NormalParams {
            neighborhood_radius: p.normal_radius,
            min_neighbors: p.min_neighbors as usize,
        }),
        debug_dump: false,
    };
    match annotate_sequence(&map.0, &traj.0, &rig.0, &frames, label, out_dir, &options) {
        Ok(summary) => {
            clear_error();
            if !stats.is_null() {
                let c = summary.stage_counts;
                *stats = WaAnnotateStats {
                    frames_written: summary.frames_written as u64,
                    frames_skipped: summary.frames_skipped as u64,
                    candidates: c.candidates as u64,
                    after_frustum: c.after_frustum as u64,
                    after_backface: c.after_backface as u64,
                    visible: c.after_ghpr as u64,
                };
            }
            WaStatus::WaOk
        }
        Err(e) => set_error(&e),
    }
}

/// Depth metrics between two 16-bit depth PNGs (prediction vs ground
/// truth). `literal_delta1 != 0` scores |pred-gt|/gt <= 0.25 instead of
/// the max-ratio form.
///
/// # Safety
/// Paths must be NUL-terminated UTF-8 strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wa_depth_metrics_from_files(
    pred_png: *const c_char,
    gt_png: *const c_char,
    literal_delta1: i32,
    out: *mut WaDepthMetrics,
) -> WaStatus {
    if out.is_null() {
        return WaStatus::WaNullPointer;
    }
    let (Some(pred), Some(gt)) = (path_arg(pred_png), path_arg(gt_png)) else {
        return WaStatus::WaNullPointer;
    };
    let convention = if literal_delta1 != 0 {
        Delta1Convention::Literal
    } else {
        Delta1Convention::Ratio
    };
    let run = || -> Result<WaDepthMetrics, CoreError> {
        let pred = decode_depth(&std::fs::read(pred)?)?;
        let gt = decode_depth(&std::fs::read(gt)?)?;
        let m = depth_metrics(&pred, &gt, convention)?;
        Ok(WaDepthMetrics {
            delta1: m.delta1,
            abs_rel: m.abs_rel,
            rmse: m.rmse,
            pixel_count: m.pixel_count as u64,
        })
    };
    match run() {
        Ok(m) => {
            clear_error();
            *out = m;
            WaStatus::WaOk
        }
        Err(e) => set_error(&e),
    }
}
