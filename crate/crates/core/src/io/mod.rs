//! File formats: PLY clouds, trajectory CSV, rig JSON, descriptor files,
//! cached normals.

pub mod descriptors;
pub mod normals_cache;
pub mod ply;
pub mod rig_json;
pub mod trajectory_csv;

pub use descriptors::{
    read_descriptors, write_descriptors, write_sidecar, DescriptorSidecar, IdRange,
};
pub use normals_cache::{read_normals_cache, write_normals_cache};
pub use ply::{read_ply, write_map_ply, write_ply};
pub use rig_json::{read_rig_json, write_rig_json, CameraRigJson};
pub use trajectory_csv::{
    read_frame_timestamps, read_trajectory_csv, write_trajectory_csv, TRAJECTORY_HEADER,
};
