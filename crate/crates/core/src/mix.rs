//! Cylinder-Mix: checkerboard exchange of cylinder-voxel regions between two
//! labeled scans.
//!
//! The grid is cut into `R_x x R_y x R_z` regions. A point's region parity
//! decides which of the two mixed clouds it lands in, so every region of a
//! mixed cloud is surrounded by regions taken from the other source scan.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::{PointCloud, Provenance};
use crate::error::{Error, Result};
use crate::grid::{voxelize, CylinderGridSpec, GridDims, VoxelIndex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixSpec {
    pub regions: GridDims,
    pub p_cylmix: f64,
    pub seed: u64,
}

impl Default for MixSpec {
    fn default() -> Self {
        Self {
            regions: GridDims::new(4, 4, 2),
            p_cylmix: 0.25,
            seed: 0,
        }
    }
}

impl MixSpec {
    pub fn validate(&self, grid: GridDims) -> Result<()> {
        let r = self.regions.as_array();
        let g = grid.as_array();
        if r.iter().zip(g).any(|(&rk, gk)| rk < 1 || rk > gk) {
            return Err(Error::InvalidParameter(format!(
                "region size {r:?} must satisfy 1 <= R_k <= G_k for grid {g:?}"
            )));
        }
        if !(0.0..=1.0).contains(&self.p_cylmix) {
            return Err(Error::InvalidParameter(format!(
                "p_cylmix {} outside [0, 1]",
                self.p_cylmix
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegionIndex {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

/// `r_k = floor(v_k * R_k / G_k)` in integer arithmetic.
pub fn region_index(v: VoxelIndex, grid: GridDims, regions: GridDims) -> RegionIndex {
    let r = |vk: usize, gk: usize, rk: usize| ((vk as u64 * rk as u64) / gk as u64) as usize;
    RegionIndex {
        x: r(v.x, grid.x, regions.x),
        y: r(v.y, grid.y, regions.y),
        z: r(v.z, grid.z, regions.z),
    }
}

/// Whether a point in region `r` goes to the first mixed cloud:
/// `!(even(r_x) ^ even(r_y)) ^ even(r_z)`, i.e. true iff `r_x + r_y + r_z` is odd.
pub fn mix_membership(r: RegionIndex) -> bool {
    let even = |k: usize| k.is_multiple_of(2);
    !(even(r.x) ^ even(r.y)) ^ even(r.z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixOutput {
    pub first: PointCloud,
    pub second: PointCloud,
    /// False when the probability gate left the inputs untouched.
    pub applied: bool,
}

pub const SOURCE_A: u32 = 0;
pub const SOURCE_B: u32 = 1;

/// Seeds a ChaCha8 stream from `mix.seed` and runs [`cylinder_mix_with_rng`].
pub fn cylinder_mix(
    a: PointCloud,
    b: PointCloud,
    grid: &CylinderGridSpec,
    mix: &MixSpec,
) -> Result<MixOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix.seed);
    cylinder_mix_with_rng(a, b, grid, mix, &mut rng)
}

/// Mixes two labeled clouds. Inputs without provenance are tagged with
/// [`SOURCE_A`] / [`SOURCE_B`] first. The gate is drawn once per call; when it
/// fails the tagged inputs are returned as-is.
///
/// When applied, `first = a[J] ++ b[J]` and `second = a[!J] ++ b[!J]`, each
/// half keeping source order.
pub fn cylinder_mix_with_rng<R: Rng + ?Sized>(
    a: PointCloud,
    b: PointCloud,
    grid: &CylinderGridSpec,
    mix: &MixSpec,
    rng: &mut R,
) -> Result<MixOutput> {
    if a.labels().is_none() || b.labels().is_none() {
        return Err(Error::UnlabeledInput);
    }
    grid.validate()?;
    mix.validate(grid.dims)?;

    let a = ensure_provenance(a, SOURCE_A);
    let b = ensure_provenance(b, SOURCE_B);

    if !rng.gen_bool(mix.p_cylmix) {
        return Ok(MixOutput {
            first: a,
            second: b,
            applied: false,
        });
    }

    let member = |cloud: &PointCloud| -> Result<Vec<bool>> {
        Ok(voxelize(cloud.points(), grid)?
            .into_iter()
            .map(|v| mix_membership(region_index(v, grid.dims, mix.regions)))
            .collect())
    };
    let ja = member(&a)?;
    let jb = member(&b)?;

    let first = gather(&a, &ja, &b, &jb, true);
    let second = gather(&a, &ja, &b, &jb, false);
    Ok(MixOutput {
        first,
        second,
        applied: true,
    })
}

fn ensure_provenance(cloud: PointCloud, frame: u32) -> PointCloud {
    if cloud.provenance().is_some() {
        cloud
    } else {
        cloud.tag_source(frame)
    }
}

fn gather(a: &PointCloud, ja: &[bool], b: &PointCloud, jb: &[bool], want: bool) -> PointCloud {
    let cap = ja.iter().chain(jb).filter(|&&j| j == want).count();
    let mut points = Vec::with_capacity(cap);
    let mut labels = Vec::with_capacity(cap);
    let mut provenance: Vec<Provenance> = Vec::with_capacity(cap);
    for (cloud, mask) in [(a, ja), (b, jb)] {
        let (pts, lbl, prov) = (
            cloud.points(),
            cloud.labels().expect("checked labeled"),
            cloud.provenance().expect("provenance attached"),
        );
        for i in (0..pts.len()).filter(|&i| mask[i] == want) {
            points.push(pts[i]);
            labels.push(lbl[i]);
            provenance.push(prov[i]);
        }
    }
    PointCloud::from_raw_parts(points, Some(labels), Some(provenance))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub pairs: Vec<(String, String)>,
    pub leftover: Option<String>,
}

/// Seeded shuffle of the labeled frames, then consecutive pairs.
pub fn pair_scans<S: AsRef<str>>(frames: &[S], seed: u64) -> Result<Pairing> {
    if frames.len() < 2 {
        return Err(Error::NotEnoughFrames(frames.len()));
    }
    let mut order: Vec<String> = frames.iter().map(|f| f.as_ref().to_string()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let leftover = if order.len() % 2 == 1 {
        order.pop()
    } else {
        None
    };
    let pairs = order
        .chunks_exact(2)
        .map(|c| (c[0].clone(), c[1].clone()))
        .collect();
    Ok(Pairing { pairs, leftover })
}
