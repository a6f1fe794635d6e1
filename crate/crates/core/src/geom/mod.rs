//! Foundational geometry: poses, trajectories, camera models, point clouds.

pub mod camera;
pub mod cloud;
pub mod pose;
pub mod trajectory;

pub use camera::{project_point, unproject, CameraRig, Projection, Z_MIN};
pub use cloud::PointCloudMap;
pub use pose::{slerp, transform_points, Pose};
pub use trajectory::{interpolate_pose, Trajectory};
