//! Composite segmentation loss:
//! `total = sem + mu_hm * hm + mu_os * os + mu_fm * fm`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub mu_hm: f64,
    pub mu_os: f64,
    pub mu_fm: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mu_hm: 100.0,
            mu_os: 10.0,
            mu_fm: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.mu_hm, self.mu_os, self.mu_fm]
            .iter()
            .all(|w| *w >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "loss weights must be non-negative: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub sem: f64,
    pub hm: f64,
    pub os: f64,
    pub fm: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn from_components(sem: f64, hm: f64, os: f64, fm: f64, w: &LossWeights) -> Self {
        Self {
            sem,
            hm,
            os,
            fm,
            total: sem + w.mu_hm * hm + w.mu_os * os + w.mu_fm * fm,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    /// `cells x C` row-major.
    pub sem_logits: &'a [f32],
    pub num_classes: usize,
    pub sem_gt: &'a [u32],
    pub ignore: &'a [u32],
    pub hm_pred: &'a [f32],
    pub hm_gt: &'a [f32],
    /// `cells x 2`.
    pub os_pred: &'a [f32],
    pub os_gt: &'a [f32],
    pub fm_pred: &'a [f32],
    pub fm_gt: &'a [f32],
}

/// Mean cross-entropy over non-ignored cells; 0 when every cell is ignored.
pub fn cross_entropy(
    logits: &[f32],
    num_classes: usize,
    gt: &[u32],
    ignore: &[u32],
) -> Result<f64> {
    if num_classes == 0 || logits.len() != gt.len() * num_classes {
        return Err(Error::shape(format!(
            "{} logits for {} cells x {num_classes} classes",
            logits.len(),
            gt.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (row, &g) in logits.chunks_exact(num_classes).zip(gt) {
        if ignore.contains(&g) {
            continue;
        }
        if g as usize >= num_classes {
            return Err(Error::InvalidClass {
                class: g,
                num_classes,
            });
        }
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
        let lse = max
            + row
                .iter()
                .map(|&v| (v as f64 - max).exp())
                .sum::<f64>()
                .ln();
        sum += lse - row[g as usize] as f64;
        count += 1;
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

fn paired<'a>(a: &'a [f32], b: &'a [f32], what: &str) -> Result<impl Iterator<Item = f64> + 'a> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "{what}: {} predictions vs {} targets",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(&p, &t)| p as f64 - t as f64))
}

pub fn mse(pred: &[f32], target: &[f32]) -> Result<f64> {
    let n = pred.len().max(1) as f64;
    Ok(paired(pred, target, "mse")?.map(|d| d * d).sum::<f64>() / n)
}

pub fn mae(pred: &[f32], target: &[f32]) -> Result<f64> {
    let n = pred.len().max(1) as f64;
    Ok(paired(pred, target, "mae")?.map(f64::abs).sum::<f64>() / n)
}

pub fn segmentation_loss(inputs: &LossInputs<'_>, weights: &LossWeights) -> Result<LossBreakdown> {
    weights.validate()?;
    let cells = inputs.sem_gt.len();
    if inputs.sem_logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("logits must be finite".into()));
    }
    for (len, per_cell, what) in [
        (inputs.hm_pred.len(), 1, "heatmap"),
        (inputs.os_pred.len(), 2, "offsets"),
        (inputs.fm_pred.len(), 1, "fore mask"),
    ] {
        if len != cells * per_cell {
            return Err(Error::shape(format!(
                "{what} has {len} values, expected {}",
                cells * per_cell
            )));
        }
    }
    let sem = cross_entropy(
        inputs.sem_logits,
        inputs.num_classes,
        inputs.sem_gt,
        inputs.ignore,
    )?;
    let hm = mse(inputs.hm_pred, inputs.hm_gt)?;
    let os = mae(inputs.os_pred, inputs.os_gt)?;
    let fm = mse(inputs.fm_pred, inputs.fm_gt)?;
    Ok(LossBreakdown::from_components(sem, hm, os, fm, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_c() {
        for c in [2usize, 3, 20] {
            let logits = vec![0.7f32; 4 * c];
            let l = cross_entropy(&logits, c, &[0, 1, 1, 0], &[]).unwrap();
            assert!((l - (c as f64).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn ignored_cells_are_skipped() {
        let logits = [10.0f32, 0.0, 0.0, 10.0];
        let l = cross_entropy(&logits, 2, &[0, 255], &[255]).unwrap();
        let want = (1.0 + (-10.0f64).exp()).ln();
        assert!((l - want).abs() < 1e-12);
        assert_eq!(cross_entropy(&logits, 2, &[255, 255], &[255]).unwrap(), 0.0);
        assert!(cross_entropy(&logits, 2, &[0, 7], &[]).is_err());
    }

    #[test]
    fn regression_terms() {
        assert_eq!(mse(&[1.0, 3.0], &[0.0, 1.0]).unwrap(), 2.5);
        assert_eq!(mae(&[1.0, -3.0], &[0.0, 1.0]).unwrap(), 2.5);
        assert!(mse(&[1.0], &[]).is_err());
    }

    #[test]
    fn default_weighting() {
        let b = LossBreakdown::from_components(1.0, 2.0, 3.0, 4.0, &LossWeights::default());
        assert_eq!(b.total, 1.0 + 200.0 + 30.0 + 4.0);
    }
}
