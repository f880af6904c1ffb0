//! Center/offset instance grouping on a 2-D (BEV) grid.

use std::collections::{BTreeMap, HashSet};

use crate::cloud::Label;
use crate::error::{Error, Result};
use crate::grid::VoxelIndex;
use crate::heatmap::Heatmap;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeSpec {
    pub center_threshold: f64,
    pub nms_kernel: usize,
    pub top_k: usize,
}

impl Default for DecodeSpec {
    fn default() -> Self {
        Self {
            center_threshold: 0.1,
            nms_kernel: 5,
            top_k: 100,
        }
    }
}

impl DecodeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nms_kernel % 2 == 1
            && self.top_k >= 1
            && (0.0..=1.0).contains(&self.center_threshold)
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad decode spec: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center {
    pub h: usize,
    pub w: usize,
    pub score: f64,
}

/// Cells that are strict maxima of their `nms_kernel` window and at least the
/// threshold, highest score first (ties by row, then column), at most `top_k`.
pub fn find_centers(heatmap: &Heatmap, spec: &DecodeSpec) -> Result<Vec<Center>> {
    spec.validate()?;
    let (height, width) = heatmap.dims();
    let r = spec.nms_kernel / 2;
    let mut centers = Vec::new();
    for h in 0..height {
        for w in 0..width {
            let score = heatmap.get(h, w);
            if score < spec.center_threshold {
                continue;
            }
            let strict_max = (h.saturating_sub(r)..=(h + r).min(height - 1)).all(|m| {
                (w.saturating_sub(r)..=(w + r).min(width - 1))
                    .all(|n| (m, n) == (h, w) || heatmap.get(m, n) < score)
            });
            if strict_max {
                centers.push(Center { h, w, score });
            }
        }
    }
    centers.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then((a.h, a.w).cmp(&(b.h, b.w)))
    });
    centers.truncate(spec.top_k);
    Ok(centers)
}

/// Per-cell semantic class and instance id (0 = no instance).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanopticMap {
    height: usize,
    width: usize,
    sem: Vec<u32>,
    inst: Vec<u32>,
}

impl PanopticMap {
    pub fn new(height: usize, width: usize, sem: Vec<u32>, inst: Vec<u32>) -> Result<Self> {
        if sem.len() != height * width || inst.len() != height * width {
            return Err(Error::shape(format!(
                "{height}x{width} panoptic map needs {} cells, got sem {} inst {}",
                height * width,
                sem.len(),
                inst.len()
            )));
        }
        Ok(Self {
            height,
            width,
            sem,
            inst,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn sem(&self) -> &[u32] {
        &self.sem
    }

    pub fn inst(&self) -> &[u32] {
        &self.inst
    }

    pub fn labels(&self) -> Vec<Label> {
        self.sem
            .iter()
            .zip(&self.inst)
            .map(|(&s, &i)| Label::new(s, i))
            .collect()
    }

    /// Labels for points given their voxel indices; a point inherits the label
    /// of cell `(v.x, v.y)`.
    pub fn labels_for_voxels(&self, voxels: &[VoxelIndex]) -> Result<Vec<Label>> {
        voxels
            .iter()
            .map(|v| {
                if v.x >= self.height || v.y >= self.width {
                    return Err(Error::InvalidIndex(v.x, v.y, v.z));
                }
                let c = v.x * self.width + v.y;
                Ok(Label::new(self.sem[c], self.inst[c]))
            })
            .collect()
    }

    /// `2 x H x W` tensor: semantic plane then instance plane.
    pub fn to_tensor(&self) -> Tensor {
        let data = self
            .sem
            .iter()
            .chain(&self.inst)
            .map(|&v| v as f32)
            .collect();
        Tensor::new(vec![2, self.height, self.width], data).expect("consistent dims")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let d = t.expect_rank(3, "panoptic map")?;
        if d[0] != 2 {
            return Err(Error::shape(format!(
                "panoptic map needs 2 planes, got {}",
                d[0]
            )));
        }
        let n = d[1] * d[2];
        let to_u32 = |s: &[f32]| s.iter().map(|&v| v as u32).collect();
        Self::new(d[1], d[2], to_u32(&t.data()[..n]), to_u32(&t.data()[n..]))
    }
}

/// Inputs for [`assign_instances`], all `H x W` row-major.
#[derive(Debug, Clone, Copy)]
pub struct DecodeInputs<'a> {
    pub dims: (usize, usize),
    pub sem: &'a [u32],
    /// `H x W x 2`, channel 0 = row offset, channel 1 = column offset.
    pub offsets: &'a [f32],
    pub fore_mask: &'a [f32],
}

/// Each foreground thing cell is shifted by its offset and joins the nearest
/// center. Instance ids are `1..=K` in center order; equidistant centers
/// resolve to the earlier (higher-scoring) one.
pub fn assign_instances(
    inputs: &DecodeInputs<'_>,
    centers: &[Center],
    thing_classes: &[u32],
) -> Result<PanopticMap> {
    let (height, width) = inputs.dims;
    let n = height * width;
    if inputs.sem.len() != n || inputs.fore_mask.len() != n || inputs.offsets.len() != 2 * n {
        return Err(Error::shape(format!(
            "decode inputs disagree with {height}x{width}: sem {}, offsets {}, fore mask {}",
            inputs.sem.len(),
            inputs.offsets.len(),
            inputs.fore_mask.len()
        )));
    }
    let things: HashSet<u32> = thing_classes.iter().copied().collect();
    let mut inst = vec![0u32; n];
    if !centers.is_empty() {
        for (cell, id) in inst.iter_mut().enumerate() {
            if inputs.fore_mask[cell] < 0.5 || !things.contains(&inputs.sem[cell]) {
                continue;
            }
            let th = (cell / width) as f64 + inputs.offsets[2 * cell] as f64;
            let tw = (cell % width) as f64 + inputs.offsets[2 * cell + 1] as f64;
            let mut best = (f64::INFINITY, 0usize);
            for (k, c) in centers.iter().enumerate() {
                let d2 = (c.h as f64 - th).powi(2) + (c.w as f64 - tw).powi(2);
                if d2 < best.0 {
                    best = (d2, k);
                }
            }
            *id = best.1 as u32 + 1;
        }
    }
    PanopticMap::new(height, width, inputs.sem.to_vec(), inst)
}

/// Relabels every instance's cells with the instance's majority class
/// (ties to the smaller class id).
pub fn majority_semantic(map: &PanopticMap) -> PanopticMap {
    let mut votes: BTreeMap<u32, BTreeMap<u32, usize>> = BTreeMap::new();
    for (&s, &i) in map.sem.iter().zip(&map.inst) {
        if i > 0 {
            *votes.entry(i).or_default().entry(s).or_default() += 1;
        }
    }
    let winner: BTreeMap<u32, u32> = votes
        .into_iter()
        .map(|(i, counts)| {
            // BTreeMap iterates classes ascending; keep the first maximum
            let (class, _) =
                counts.into_iter().fold(
                    (u32::MAX, 0usize),
                    |best, (c, k)| if k > best.1 { (c, k) } else { best },
                );
            (i, class)
        })
        .collect();
    let sem = map
        .sem
        .iter()
        .zip(&map.inst)
        .map(|(&s, &i)| if i > 0 { winner[&i] } else { s })
        .collect();
    PanopticMap { sem, ..map.clone() }
}
