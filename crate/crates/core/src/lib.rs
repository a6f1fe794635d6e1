//! Semi-dense depth and surface-normal annotation from accumulated lidar
//! maps, plus place-recognition and depth-estimation evaluation harnesses.

pub mod deptheval;
pub mod error;
pub mod geom;
pub mod io;
pub mod loss;
pub mod manifest;
pub mod normals;
pub mod pipeline;
pub mod placerec;
pub mod render;
pub mod spatial;
pub mod submap;
pub mod synth;
pub mod visibility;

pub use error::{CoreError, Result};
