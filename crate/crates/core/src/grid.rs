//! Cylindrical voxel partition over (rho, phi, z).

use std::f64::consts::PI;

use crate::cloud::Point;
use crate::error::{Error, Result};

/// Bin counts along (rho, phi, z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridDims {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl GridDims {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }

    pub fn volume(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }

    pub fn contains(&self, v: VoxelIndex) -> bool {
        v.x < self.x && v.y < self.y && v.z < self.z
    }

    /// Row-major offset of `v` (x slowest, z fastest).
    pub fn linear(&self, v: VoxelIndex) -> usize {
        (v.x * self.y + v.y) * self.z + v.z
    }
}

impl Default for GridDims {
    fn default() -> Self {
        Self::new(480, 360, 32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VoxelIndex {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl VoxelIndex {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderGridSpec {
    pub rho_min: f64,
    pub rho_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub dims: GridDims,
}

impl Default for CylinderGridSpec {
    fn default() -> Self {
        Self {
            rho_min: 3.0,
            rho_max: 50.0,
            phi_min: -PI,
            phi_max: PI,
            z_min: -3.0,
            z_max: 1.5,
            dims: GridDims::default(),
        }
    }
}

impl CylinderGridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho_min < self.rho_max
            && self.phi_min < self.phi_max
            && self.z_min < self.z_max
            && self.dims.x >= 1
            && self.dims.y >= 1
            && self.dims.z >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad cylinder grid: {self:?}"
            )))
        }
    }

    /// Continuous (rho, phi, z) of a point.
    pub fn cylindrical(p: &Point) -> (f64, f64, f64) {
        let (x, y) = (p.x as f64, p.y as f64);
        (x.hypot(y), y.atan2(x), p.z as f64)
    }

    pub fn in_bounds(&self, p: &Point) -> bool {
        let (rho, phi, z) = Self::cylindrical(p);
        (self.rho_min..=self.rho_max).contains(&rho)
            && (self.phi_min..=self.phi_max).contains(&phi)
            && (self.z_min..=self.z_max).contains(&z)
    }

    /// Voxel of a finite point; out-of-range coordinates clamp to the edge bins.
    pub fn index_of(&self, p: &Point) -> VoxelIndex {
        let (rho, phi, z) = Self::cylindrical(p);
        VoxelIndex {
            x: bin(rho, self.rho_min, self.rho_max, self.dims.x),
            y: bin(phi, self.phi_min, self.phi_max, self.dims.y),
            z: bin(z, self.z_min, self.z_max, self.dims.z),
        }
    }
}

fn bin(value: f64, lo: f64, hi: f64, n: usize) -> usize {
    let t = ((value - lo) / (hi - lo) * n as f64).floor();
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(n - 1)
    }
}

/// One voxel index per point, aligned with input order.
pub fn voxelize(points: &[Point], spec: &CylinderGridSpec) -> Result<Vec<VoxelIndex>> {
    spec.validate()?;
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::InvalidPoint { index });
            }
            Ok(spec.index_of(p))
        })
        .collect()
}

/// Like [`voxelize`], but points outside the bounds map to `None`.
pub fn voxelize_in_bounds(
    points: &[Point],
    spec: &CylinderGridSpec,
) -> Result<Vec<Option<VoxelIndex>>> {
    let indices = voxelize(points, spec)?;
    Ok(points
        .iter()
        .zip(indices)
        .map(|(p, v)| spec.in_bounds(p).then_some(v))
        .collect())
}
