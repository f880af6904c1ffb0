//! Instance position/scale heatmaps from boxes or masks, and their fusion
//! with image features.
//!
//! A single anchor `q` with radius `R` contributes `exp(-2 d^2 / R^2)` for
//! pixels within distance `R` and nothing beyond. A box is rendered from its
//! four corners (radius `r_corner`) and its center (radius proportional to
//! the shorter box side); overlapping contributions combine by maximum.

use crate::camera::InstanceBox;
use crate::error::{Error, Result};
use crate::linear::PointwiseLinear;
use crate::tensor::Tensor;

/// Output width of both fusion heads.
pub const FUSION_CHANNELS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape(format!(
                "{height}x{width} heatmap needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(
                "heatmap values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, h: usize, w: usize) -> f64 {
        self.values[h * self.width + w]
    }

    /// Pointwise maximum with `other` in place.
    pub fn max_assign(&mut self, other: &Heatmap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "heatmap dims {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = a.max(b);
        }
        Ok(())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.height, self.width],
            self.values.iter().map(|&v| v as f32).collect(),
        )
        .expect("consistent dims")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let d = t.expect_rank(2, "heatmap")?;
        Self::from_values(d[0], d[1], t.data().iter().map(|&v| v as f64).collect())
    }

    /// 8-bit grayscale bytes, `round(value * 255)`, row-major.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    fn check_anchor(&self, h: f64, w: f64) -> Result<()> {
        let inside = h.is_finite()
            && w.is_finite()
            && h >= 0.0
            && w >= 0.0
            && h <= (self.height as f64 - 1.0)
            && w <= (self.width as f64 - 1.0);
        if inside {
            Ok(())
        } else {
            Err(Error::InvalidAnchor {
                h,
                w,
                height: self.height,
                width: self.width,
            })
        }
    }

    /// Max-splats one Gaussian anchor; only the bounding square of the disk is visited.
    fn splat(&mut self, h: f64, w: f64, radius: f64) {
        let r2 = radius * radius;
        let lo = |c: f64| (c - radius).ceil().max(0.0) as usize;
        let hi = |c: f64, n: usize| ((c + radius).floor() as usize).min(n - 1);
        for m in lo(h)..=hi(h, self.height) {
            let dh = h - m as f64;
            for n in lo(w)..=hi(w, self.width) {
                let dw = w - n as f64;
                let d2 = dh * dh + dw * dw;
                if d2 <= r2 {
                    let v = (-2.0 * d2 / r2).exp();
                    let cell = &mut self.values[m * self.width + n];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapSpec {
    pub r_corner: f64,
    pub p_center: f64,
    pub r_center_floor: f64,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        Self {
            r_corner: 5.0,
            p_center: 0.25,
            r_center_floor: 1.0,
        }
    }
}

impl HeatmapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.r_corner > 0.0
            && self.p_center > 0.0
            && self.p_center <= 1.0
            && self.r_center_floor > 0.0
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad heatmap spec: {self:?}"
            )))
        }
    }

    /// `max(r_center_floor, p_center * min(box height, box width))`, extents in pixels.
    pub fn center_radius(&self, b: &InstanceBox) -> f64 {
        let side = b.height().min(b.width()) as f64;
        (self.p_center * side).max(self.r_center_floor)
    }
}

/// Single-anchor heatmap at `(h, w)` with radius `radius`.
pub fn point_heatmap(h: f64, w: f64, radius: f64, dims: (usize, usize)) -> Result<Heatmap> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radius {radius} must be > 0"
        )));
    }
    let mut map = Heatmap::zeros(dims.0, dims.1);
    map.check_anchor(h, w)?;
    map.splat(h, w, radius);
    Ok(map)
}

/// Anchors of a box: four corners then the center, each with its radius.
pub fn box_anchors(b: &InstanceBox, spec: &HeatmapSpec) -> [(f64, f64, f64); 5] {
    let (h0, h1) = (b.h_min as f64, b.h_max as f64);
    let (w0, w1) = (b.w_min as f64, b.w_max as f64);
    let rc = spec.r_corner;
    [
        (h0, w0, rc),
        (h0, w1, rc),
        (h1, w0, rc),
        (h1, w1, rc),
        ((h0 + h1) / 2.0, (w0 + w1) / 2.0, spec.center_radius(b)),
    ]
}

pub fn box_heatmap(b: &InstanceBox, spec: &HeatmapSpec, dims: (usize, usize)) -> Result<Heatmap> {
    let mut map = Heatmap::zeros(dims.0, dims.1);
    draw_box(&mut map, b, spec)?;
    Ok(map)
}

fn draw_box(map: &mut Heatmap, b: &InstanceBox, spec: &HeatmapSpec) -> Result<()> {
    spec.validate()?;
    if !b.fits(map.dims()) {
        return Err(Error::InvalidAnchor {
            h: b.h_max as f64,
            w: b.w_max as f64,
            height: map.height,
            width: map.width,
        });
    }
    for (h, w, r) in box_anchors(b, spec) {
        map.splat(h, w, r);
    }
    Ok(())
}

/// Pointwise maximum over all box heatmaps; all-zero when `boxes` is empty.
pub fn image_heatmap(
    boxes: &[InstanceBox],
    spec: &HeatmapSpec,
    dims: (usize, usize),
) -> Result<Heatmap> {
    let mut map = Heatmap::zeros(dims.0, dims.1);
    for b in boxes {
        draw_box(&mut map, b, spec)?;
    }
    Ok(map)
}

/// Score-weighted sum of `K x H x W` masks, clamped to `[0, 1]`.
pub fn mask_heatmap(masks: &Tensor, scores: &[f64]) -> Result<Heatmap> {
    let d = masks.expect_rank(3, "masks")?;
    let (k, h, w) = (d[0], d[1], d[2]);
    if k != scores.len() {
        return Err(Error::shape(format!(
            "{k} masks but {} scores",
            scores.len()
        )));
    }
    let mut values = vec![0.0f64; h * w];
    if values.is_empty() {
        return Heatmap::from_values(h, w, values);
    }
    for (mask, &score) in masks.data().chunks_exact(h * w).zip(scores) {
        for (v, &m) in values.iter_mut().zip(mask) {
            *v += m as f64 * score;
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    Heatmap::from_values(h, w, values)
}

/// `psi_I(image) + psi_H(heat)`, both heads pointwise linear maps to the same width.
/// `image_features` is `H x W x C_i`; the result is `H x W x out`.
pub fn fuse_intermediate(
    image_features: &Tensor,
    heat: &Heatmap,
    psi_image: &PointwiseLinear,
    psi_heat: &PointwiseLinear,
) -> Result<Tensor> {
    let d = image_features.expect_rank(3, "image features")?;
    let (h, w, c) = (d[0], d[1], d[2]);
    if heat.dims() != (h, w) {
        return Err(Error::shape(format!(
            "heatmap {:?} vs features {h}x{w}",
            heat.dims()
        )));
    }
    if psi_image.in_dim() != c
        || psi_heat.in_dim() != 1
        || psi_image.out_dim() != psi_heat.out_dim()
    {
        return Err(Error::shape(format!(
            "heads {}->{} and {}->{} do not fit {c}-channel features and a 1-channel heatmap",
            psi_image.in_dim(),
            psi_image.out_dim(),
            psi_heat.in_dim(),
            psi_heat.out_dim()
        )));
    }
    let out_dim = psi_image.out_dim();
    let mut out = Vec::with_capacity(h * w * out_dim);
    let mut acc = vec![0f64; out_dim];
    for px in 0..h * w {
        acc.fill(0.0);
        psi_image.accumulate(&image_features.data()[px * c..(px + 1) * c], &mut acc);
        psi_image.add_bias(&mut acc);
        psi_heat.accumulate(&[heat.values[px] as f32], &mut acc);
        psi_heat.add_bias(&mut acc);
        out.extend(acc.iter().map(|&v| v as f32));
    }
    Tensor::new(vec![h, w, out_dim], out)
}
