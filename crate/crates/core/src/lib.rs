//! Latent-label data engine for semi-supervised LiDAR panoptic segmentation.
//!
//! The crate covers the deterministic parts of a LiDAR + camera training
//! pipeline: SemanticKITTI-style file I/O and frame splits, cylindrical
//! voxelization, Cylinder-Mix augmentation, BEV max pooling and fusion,
//! LiDAR-to-camera projection with instance boxes, instance heatmap encoding,
//! center/offset panoptic decoding, and the evaluation metrics and loss.

pub mod bev;
pub mod camera;
pub mod cloud;
pub mod config;
pub mod decode;
pub mod error;
pub mod grid;
pub mod heatmap;
pub mod io;
pub mod linear;
pub mod loss;
pub mod metrics;
pub mod mix;
pub mod split;
pub mod tensor;

pub use cloud::{Label, Point, PointCloud, Provenance};
pub use error::{Error, Result};
pub use grid::{CylinderGridSpec, GridDims, VoxelIndex};
pub use tensor::Tensor;
