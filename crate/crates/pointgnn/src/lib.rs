//! Point-cloud 3D object detection with a fixed-radius graph neural network.
//!
//! The pipeline has three stages: graph construction over a voxel-downsampled
//! point cloud, an iterative GNN with an auto-registration offset, and a
//! non-maximum suppression that merges overlapping boxes by component-wise
//! median and rescores them with an occlusion-weighted IoU sum.

pub mod boxes;
pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod nn;
pub mod pointcloud;
pub mod postprocess;
pub mod training;

pub use error::{Error, Result};
