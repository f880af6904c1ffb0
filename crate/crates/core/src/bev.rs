//! Per-voxel max pooling into dense BEV grids and LiDAR/camera grid fusion.

use crate::camera::PixelMapping;
use crate::error::{Error, Result};
use crate::grid::{GridDims, VoxelIndex};
use crate::linear::PointwiseLinear;
use crate::tensor::Tensor;

/// Dense `G_x x G_y x G_z x C` grid, row-major with channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    dims: GridDims,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureGrid {
    pub fn filled(dims: GridDims, channels: usize, fill: f32) -> Self {
        Self {
            dims,
            channels,
            data: vec![fill; dims.volume() * channels],
        }
    }

    pub fn from_data(dims: GridDims, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != dims.volume() * channels {
            return Err(Error::shape(format!(
                "grid {:?} x {channels} channels needs {} values, got {}",
                dims.as_array(),
                dims.volume() * channels,
                data.len()
            )));
        }
        Ok(Self {
            dims,
            channels,
            data,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn cell(&self, v: VoxelIndex) -> &[f32] {
        let o = self.dims.linear(v) * self.channels;
        &self.data[o..o + self.channels]
    }

    /// 4-D `G_x x G_y x G_z x C` tensor.
    pub fn to_tensor(&self) -> Tensor {
        let [x, y, z] = self.dims.as_array();
        Tensor::new(vec![x, y, z, self.channels], self.data.clone()).expect("consistent dims")
    }

    /// 3-D `G_x x G_y x (G_z * C)` tensor with height folded into channels.
    /// Channel `k * C + c` holds height slice `k`, feature `c`.
    pub fn to_height_folded_tensor(&self) -> Tensor {
        let [x, y, z] = self.dims.as_array();
        Tensor::new(vec![x, y, z * self.channels], self.data.clone()).expect("consistent dims")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let d = t.expect_rank(4, "feature grid")?;
        Self::from_data(GridDims::new(d[0], d[1], d[2]), d[3], t.data().to_vec())
    }
}

/// Elementwise maximum of the feature rows assigned to each voxel. Empty voxels
/// hold 0.
pub fn bev_max_pool(
    features: &[f32],
    channels: usize,
    indices: &[VoxelIndex],
    dims: GridDims,
) -> Result<FeatureGrid> {
    bev_max_pool_with_fill(features, channels, indices, dims, 0.0)
}

pub fn bev_max_pool_with_fill(
    features: &[f32],
    channels: usize,
    indices: &[VoxelIndex],
    dims: GridDims,
    fill: f32,
) -> Result<FeatureGrid> {
    if features.len() != indices.len() * channels {
        return Err(Error::shape(format!(
            "{} feature values for {} points x {channels} channels",
            features.len(),
            indices.len()
        )));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::shape("features must be finite"));
    }
    let mut data = vec![f32::NEG_INFINITY; dims.volume() * channels];
    let mut occupied = vec![false; dims.volume()];
    for (row, &v) in indices.iter().enumerate() {
        if !dims.contains(v) {
            return Err(Error::InvalidIndex(v.x, v.y, v.z));
        }
        let cell = dims.linear(v);
        occupied[cell] = true;
        let src = &features[row * channels..(row + 1) * channels];
        let dst = &mut data[cell * channels..(cell + 1) * channels];
        for (d, &s) in dst.iter_mut().zip(src) {
            if s > *d {
                *d = s;
            }
        }
    }
    for (cell, _) in occupied.iter().enumerate().filter(|(_, &o)| !o) {
        data[cell * channels..(cell + 1) * channels].fill(fill);
    }
    FeatureGrid::from_data(dims, channels, data)
}

/// Camera BEV features: each matched pixel's feature vector is pooled into the
/// voxel of its matched point.
///
/// `image_features` is `H x W x C`; `point_voxels` holds the voxel of every
/// point referenced by the mapping.
pub fn camera_bev_pool(
    image_features: &Tensor,
    mapping: &PixelMapping,
    point_voxels: &[VoxelIndex],
    dims: GridDims,
) -> Result<FeatureGrid> {
    let d = image_features.expect_rank(3, "image features")?;
    let (h, w, c) = (d[0], d[1], d[2]);
    let (mh, mw) = mapping.image_size;
    if (h, w) != (mh, mw) {
        return Err(Error::shape(format!(
            "image features are {h}x{w}, mapping was built for {mh}x{mw}"
        )));
    }
    let mut rows = Vec::with_capacity(mapping.pairs.len() * c);
    let mut voxels = Vec::with_capacity(mapping.pairs.len());
    for pair in &mapping.pairs {
        let v = *point_voxels.get(pair.point as usize).ok_or_else(|| {
            Error::shape(format!(
                "mapping references point {} beyond voxel list",
                pair.point
            ))
        })?;
        let o = (pair.h as usize * w + pair.w as usize) * c;
        rows.extend_from_slice(&image_features.data()[o..o + c]);
        voxels.push(v);
    }
    bev_max_pool(&rows, c, &voxels, dims)
}

/// Channel concatenation of the LiDAR and camera grids followed by a per-cell
/// linear map.
pub fn fuse_bev(
    lidar: &FeatureGrid,
    camera: &FeatureGrid,
    linear: &PointwiseLinear,
) -> Result<FeatureGrid> {
    if lidar.dims != camera.dims {
        return Err(Error::shape(format!(
            "grid dims differ: {:?} vs {:?}",
            lidar.dims.as_array(),
            camera.dims.as_array()
        )));
    }
    let (c1, c2) = (lidar.channels, camera.channels);
    if linear.in_dim() != c1 + c2 {
        return Err(Error::shape(format!(
            "linear map takes {} inputs, concatenation has {}",
            linear.in_dim(),
            c1 + c2
        )));
    }
    let out_dim = linear.out_dim();
    let cells = lidar.dims.volume();
    let mut data = Vec::with_capacity(cells * out_dim);
    let mut concat = vec![0f32; c1 + c2];
    let mut acc = vec![0f64; out_dim];
    for cell in 0..cells {
        concat[..c1].copy_from_slice(&lidar.data[cell * c1..(cell + 1) * c1]);
        concat[c1..].copy_from_slice(&camera.data[cell * c2..(cell + 1) * c2]);
        acc.fill(0.0);
        linear.accumulate(&concat, &mut acc);
        linear.add_bias(&mut acc);
        data.extend(acc.iter().map(|&v| v as f32));
    }
    FeatureGrid::from_data(lidar.dims, out_dim, data)
}
