//! Synthetic depth sensing: point clouds, a pinhole depth camera with
//! occlusion-correct ray casting, visibility ratios, and model-to-cloud
//! correspondences.

mod camera;
mod cloud;
mod index;

pub use camera::{placements, ray_hull, render_cloud, visibility, visibility_mask, CameraModel, Placement};
pub use cloud::PointCloud;
pub use index::{correspondences, CloudIndex};
