//! Camera model, volumetric maps and point clouds.

mod camera;
mod frame;
mod grid;
mod image;
pub mod io;
pub mod ply;
mod pointcloud;
mod tsdf;
mod voxel;

pub use camera::{CameraIntrinsics, Pixel, Pose};
pub use frame::Frame;
pub use grid::{inflation_radius, InstanceVoxelGrid, VoxelSet};
pub use image::{ColorImage, DepthImage, Mask};
pub use pointcloud::PointCloud;
pub use tsdf::{GlobalTsdf, IntegrationStats, TsdfVoxel, BLOCK_SIDE, DEFAULT_TRUNCATION_VOXELS};
pub use voxel::{traverse_segment, VoxelIndex};
