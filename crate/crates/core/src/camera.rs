//! LiDAR-to-camera pinhole projection and projected instance boxes.
//!
//! Pixels are addressed as `(h, w)` = (row, column) everywhere in the crate.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use nalgebra::{Matrix3x4, Matrix4, Vector4};

use crate::cloud::{Label, Point};
use crate::error::{Error, Result};
use crate::io::Calibration;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub intrinsic: Matrix3x4<f64>,
    pub extrinsic: Matrix4<f64>,
    /// (H, W) in pixels.
    pub image_size: (usize, usize),
    pub view_id: u8,
}

impl CameraModel {
    pub fn new(
        intrinsic: Matrix3x4<f64>,
        extrinsic: Matrix4<f64>,
        image_size: (usize, usize),
        view_id: u8,
    ) -> Result<Self> {
        let bottom = extrinsic.row(3);
        if bottom[0] != 0.0 || bottom[1] != 0.0 || bottom[2] != 0.0 || bottom[3] != 1.0 {
            return Err(Error::InvalidParameter(
                "extrinsic bottom row must be [0, 0, 0, 1]".into(),
            ));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(Error::InvalidParameter(format!(
                "image size {image_size:?} must be at least 1x1"
            )));
        }
        Ok(Self {
            intrinsic,
            extrinsic,
            image_size,
            view_id,
        })
    }

    pub fn from_calibration(
        calib: &Calibration,
        image_size: (usize, usize),
        view_id: u8,
    ) -> Result<Self> {
        Self::new(calib.projection, calib.extrinsic, image_size, view_id)
    }

    /// Simple pinhole with identity extrinsic: `fx = fy = focal`, principal point `(cu, cv)`.
    pub fn pinhole(focal: f64, cu: f64, cv: f64, image_size: (usize, usize)) -> Self {
        #[rustfmt::skip]
        let intrinsic = Matrix3x4::new(
            focal, 0.0, cu, 0.0,
            0.0, focal, cv, 0.0,
            0.0, 0.0, 1.0, 0.0,
        );
        Self {
            intrinsic,
            extrinsic: Matrix4::identity(),
            image_size,
            view_id: 0,
        }
    }

    /// Continuous image coordinates `(u, v)` (column, row) and depth, before
    /// rounding and image-bound filtering. `None` when the point is not in front
    /// of the camera.
    pub fn project_continuous(&self, p: &Point) -> Option<(f64, f64, f64)> {
        let cam = self.extrinsic * Vector4::new(p.x as f64, p.y as f64, p.z as f64, 1.0);
        if cam.z <= 0.0 {
            return None;
        }
        let img = self.intrinsic * cam;
        let depth = img.z;
        if depth <= 0.0 || !depth.is_finite() {
            return None;
        }
        Some((img.x / depth, img.y / depth, depth))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMatch {
    pub point: u32,
    pub h: u32,
    pub w: u32,
    pub depth: f32,
    pub view_id: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelMapping {
    pub image_size: (usize, usize),
    pub pairs: Vec<PixelMatch>,
}

impl PixelMapping {
    /// `(1 + M) x 5` tensor: a size row `(-1, H, W, 0, 0)` followed by one
    /// `(point, h, w, depth, view)` row per match.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity((self.pairs.len() + 1) * 5);
        data.extend_from_slice(&[
            -1.0,
            self.image_size.0 as f32,
            self.image_size.1 as f32,
            0.0,
            0.0,
        ]);
        for p in &self.pairs {
            data.extend_from_slice(&[
                p.point as f32,
                p.h as f32,
                p.w as f32,
                p.depth,
                p.view_id as f32,
            ]);
        }
        Tensor::new(vec![self.pairs.len() + 1, 5], data).expect("consistent dims")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let d = t.expect_rank(2, "pixel mapping")?;
        if d[1] != 5 || d[0] == 0 || t.data()[0] != -1.0 {
            return Err(Error::shape(format!(
                "pixel mapping must be (1+M) x 5 with a size row, got {d:?}"
            )));
        }
        let rows: Vec<&[f32]> = t.data().chunks_exact(5).collect();
        let image_size = (rows[0][1] as usize, rows[0][2] as usize);
        let pairs = rows[1..]
            .iter()
            .map(|r| PixelMatch {
                point: r[0] as u32,
                h: r[1] as u32,
                w: r[2] as u32,
                depth: r[3],
                view_id: r[4] as u8,
            })
            .collect();
        Ok(Self { image_size, pairs })
    }
}

/// Projects points into the image. Points behind the camera or outside the
/// image are dropped; pixel coordinates are rounded half away from zero.
pub fn project_points(points: &[Point], cam: &CameraModel) -> PixelMapping {
    let (height, width) = cam.image_size;
    let pairs = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let (u, v, depth) = cam.project_continuous(p)?;
            let (h, w) = (v.round(), u.round());
            if h < 0.0 || w < 0.0 || h >= height as f64 || w >= width as f64 {
                return None;
            }
            Some(PixelMatch {
                point: i as u32,
                h: h as u32,
                w: w as u32,
                depth: depth as f32,
                view_id: cam.view_id,
            })
        })
        .collect();
    PixelMapping {
        image_size: cam.image_size,
        pairs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceBox {
    pub inst_id: u32,
    pub view_id: u8,
    pub h_min: u32,
    pub w_min: u32,
    pub h_max: u32,
    pub w_max: u32,
    pub score: f64,
    pub support: usize,
}

impl InstanceBox {
    pub fn height(&self) -> u32 {
        self.h_max - self.h_min
    }

    pub fn width(&self) -> u32 {
        self.w_max - self.w_min
    }

    pub fn fits(&self, (height, width): (usize, usize)) -> bool {
        self.h_min <= self.h_max
            && self.w_min <= self.w_max
            && (self.h_max as usize) < height
            && (self.w_max as usize) < width
    }
}

/// Min/max pixel box of every thing-class instance with at least `min_support`
/// projected pixels, per view. Sorted by (view, instance id).
pub fn instance_boxes(
    mapping: &PixelMapping,
    labels: &[Label],
    thing_classes: &[u32],
    min_support: usize,
) -> Result<Vec<InstanceBox>> {
    let things: HashSet<u32> = thing_classes.iter().copied().collect();
    let mut boxes: BTreeMap<(u8, u32), InstanceBox> = BTreeMap::new();
    for m in &mapping.pairs {
        let label = labels.get(m.point as usize).ok_or_else(|| {
            Error::shape(format!(
                "mapping references point {} but only {} labels",
                m.point,
                labels.len()
            ))
        })?;
        if label.inst == 0 || !things.contains(&label.sem) {
            continue;
        }
        boxes
            .entry((m.view_id, label.inst))
            .and_modify(|b| {
                b.h_min = b.h_min.min(m.h);
                b.h_max = b.h_max.max(m.h);
                b.w_min = b.w_min.min(m.w);
                b.w_max = b.w_max.max(m.w);
                b.support += 1;
            })
            .or_insert(InstanceBox {
                inst_id: label.inst,
                view_id: m.view_id,
                h_min: m.h,
                w_min: m.w,
                h_max: m.h,
                w_max: m.w,
                score: 1.0,
                support: 1,
            });
    }
    Ok(boxes
        .into_values()
        .filter(|b| b.support >= min_support.max(1))
        .collect())
}

const BOX_HEADER: &str = "inst_id\tview\th_min\tw_min\th_max\tw_max\tscore\tsupport";

pub fn boxes_to_tsv(boxes: &[InstanceBox]) -> String {
    let mut out = format!("{BOX_HEADER}\n");
    for b in boxes {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            b.inst_id, b.view_id, b.h_min, b.w_min, b.h_max, b.w_max, b.score, b.support
        );
    }
    out
}

/// Parses box TSV; a header row and `#` comments are skipped. Detector boxes
/// use the same columns.
pub fn boxes_from_tsv(text: &str) -> Result<Vec<InstanceBox>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#') && !l.starts_with("inst_id"))
        .map(|(n, line)| {
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 8 {
                return Err(Error::Parse(format!(
                    "box line {}: expected 8 columns, got {}",
                    n + 1,
                    cols.len()
                )));
            }
            let bad = |c: &str| Error::Parse(format!("box line {}: bad value `{c}`", n + 1));
            let u = |i: usize| cols[i].parse::<u32>().map_err(|_| bad(cols[i]));
            let b = InstanceBox {
                inst_id: u(0)?,
                view_id: cols[1].parse().map_err(|_| bad(cols[1]))?,
                h_min: u(2)?,
                w_min: u(3)?,
                h_max: u(4)?,
                w_max: u(5)?,
                score: cols[6].parse().map_err(|_| bad(cols[6]))?,
                support: cols[7].parse().map_err(|_| bad(cols[7]))?,
            };
            if b.h_min > b.h_max || b.w_min > b.w_max || !(0.0..=1.0).contains(&b.score) {
                return Err(Error::Parse(format!(
                    "box line {}: inconsistent box",
                    n + 1
                )));
            }
            Ok(b)
        })
        .collect()
}
