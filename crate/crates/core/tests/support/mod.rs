//! Brute-force reference implementations shared by the integration tests and
//! the acceptance suite. Each one follows the definition directly and shares
//! no code with the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use latentlab_core::camera::InstanceBox;
use latentlab_core::decode::{Center, DecodeInputs, DecodeSpec};
use latentlab_core::heatmap::{Heatmap, HeatmapSpec};
use latentlab_core::{CylinderGridSpec, GridDims, Label, Point, VoxelIndex};

/// Textbook membership: cylindrical bin, integer region, parity of the region sum.
pub fn oracle_member(p: &Point, g: &CylinderGridSpec, r: GridDims) -> bool {
    let bin = |v: f64, lo: f64, hi: f64, n: usize| -> usize {
        let t = ((v - lo) / (hi - lo) * n as f64).floor();
        t.clamp(0.0, (n - 1) as f64) as usize
    };
    let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
    let v = [
        bin((x * x + y * y).sqrt(), g.rho_min, g.rho_max, g.dims.x),
        bin(y.atan2(x), g.phi_min, g.phi_max, g.dims.y),
        bin(z, g.z_min, g.z_max, g.dims.z),
    ];
    let (gd, rd) = (g.dims.as_array(), r.as_array());
    let sum: usize = (0..3).map(|k| v[k] * rd[k] / gd[k]).sum();
    sum % 2 == 1
}

pub fn bev_brute_force(features: &[f32], c: usize, idx: &[VoxelIndex], dims: GridDims) -> Vec<f32> {
    let mut best: HashMap<(usize, usize, usize), Vec<f32>> = HashMap::new();
    for (row, v) in features.chunks_exact(c).zip(idx) {
        let e = best.entry((v.x, v.y, v.z)).or_insert_with(|| row.to_vec());
        for (a, b) in e.iter_mut().zip(row) {
            *a = a.max(*b);
        }
    }
    let mut out = Vec::new();
    for x in 0..dims.x {
        for y in 0..dims.y {
            for z in 0..dims.z {
                match best.get(&(x, y, z)) {
                    Some(r) => out.extend_from_slice(r),
                    None => out.extend(std::iter::repeat_n(0.0, c)),
                }
            }
        }
    }
    out
}

pub fn gaussian(d2: f64, r: f64) -> f64 {
    if d2 <= r * r {
        (-2.0 * d2 / (r * r)).exp()
    } else {
        0.0
    }
}

/// Dense evaluation of every anchor at every cell.
pub fn dense_heatmap(boxes: &[InstanceBox], spec: &HeatmapSpec, dims: (usize, usize)) -> Vec<f64> {
    let mut out = vec![0.0f64; dims.0 * dims.1];
    for b in boxes {
        let (h0, h1, w0, w1) = (
            b.h_min as f64,
            b.h_max as f64,
            b.w_min as f64,
            b.w_max as f64,
        );
        let side = (h1 - h0).min(w1 - w0);
        let rc = (spec.p_center * side).max(spec.r_center_floor);
        let anchors = [
            (h0, w0, spec.r_corner),
            (h0, w1, spec.r_corner),
            (h1, w0, spec.r_corner),
            (h1, w1, spec.r_corner),
            ((h0 + h1) / 2.0, (w0 + w1) / 2.0, rc),
        ];
        for m in 0..dims.0 {
            for n in 0..dims.1 {
                for &(h, w, r) in &anchors {
                    let d2 = (m as f64 - h).powi(2) + (n as f64 - w).powi(2);
                    let v = gaussian(d2, r);
                    let cell = &mut out[m * dims.1 + n];
                    *cell = cell.max(v);
                }
            }
        }
    }
    out
}

/// Every cell compared against its full window, then sorted.
pub fn oracle_centers(hm: &Heatmap, spec: &DecodeSpec) -> Vec<(usize, usize)> {
    let (height, width) = hm.dims();
    let r = (spec.nms_kernel / 2) as isize;
    let mut found = Vec::new();
    for h in 0..height as isize {
        for w in 0..width as isize {
            let s = hm.get(h as usize, w as usize);
            if s < spec.center_threshold {
                continue;
            }
            let mut is_max = true;
            for dh in -r..=r {
                for dw in -r..=r {
                    let (m, n) = (h + dh, w + dw);
                    if (dh, dw) == (0, 0)
                        || m < 0
                        || n < 0
                        || m >= height as isize
                        || n >= width as isize
                    {
                        continue;
                    }
                    if hm.get(m as usize, n as usize) >= s {
                        is_max = false;
                    }
                }
            }
            if is_max {
                found.push((s, h as usize, w as usize));
            }
        }
    }
    found.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then((a.1, a.2).cmp(&(b.1, b.2)))
    });
    found.truncate(spec.top_k);
    found.into_iter().map(|(_, h, w)| (h, w)).collect()
}

pub fn oracle_assign(inputs: &DecodeInputs<'_>, centers: &[Center], things: &[u32]) -> Vec<u32> {
    let (height, width) = inputs.dims;
    let mut out = vec![0; height * width];
    if centers.is_empty() {
        return out;
    }
    for h in 0..height {
        for w in 0..width {
            let c = h * width + w;
            if inputs.fore_mask[c] < 0.5 || !things.contains(&inputs.sem[c]) {
                continue;
            }
            let th = h as f64 + inputs.offsets[2 * c] as f64;
            let tw = w as f64 + inputs.offsets[2 * c + 1] as f64;
            let d: Vec<f64> = centers
                .iter()
                .map(|k| (k.h as f64 - th).powi(2) + (k.w as f64 - tw).powi(2))
                .collect();
            let min = d.iter().copied().fold(f64::INFINITY, f64::min);
            out[c] = d.iter().position(|&x| x == min).unwrap() as u32 + 1;
        }
    }
    out
}

/// Per-class PQ result of the exhaustive oracle: `(class, pq, sq, rq, tp, fp, fn)`.
pub type OraclePQ = (u32, f64, f64, f64, usize, usize, usize);

/// Panoptic quality by trying every one-to-one matching between gt and pred
/// segments of each class and keeping the one with the most IoU > 0.5 pairs.
/// Stuff cells form one segment per class; thing cells with instance 0 and
/// cells whose gt class is ignored belong to nothing.
pub fn pq_oracle(
    pred: &[Label],
    gt: &[Label],
    things: &[u32],
    stuff: &[u32],
    ignore: &[u32],
) -> (Vec<OraclePQ>, f64) {
    let key = |l: Label| -> Option<(u32, u32)> {
        if stuff.contains(&l.sem) {
            Some((l.sem, 0))
        } else if things.contains(&l.sem) && l.inst != 0 {
            Some((l.sem, l.inst))
        } else {
            None
        }
    };
    let mut pred_cells: BTreeMap<(u32, u32), BTreeSet<usize>> = BTreeMap::new();
    let mut gt_cells: BTreeMap<(u32, u32), BTreeSet<usize>> = BTreeMap::new();
    for i in 0..gt.len() {
        if ignore.contains(&gt[i].sem) {
            continue;
        }
        if let Some(k) = key(pred[i]) {
            pred_cells.entry(k).or_default().insert(i);
        }
        if let Some(k) = key(gt[i]) {
            gt_cells.entry(k).or_default().insert(i);
        }
    }
    let classes: BTreeSet<u32> = pred_cells
        .keys()
        .chain(gt_cells.keys())
        .map(|k| k.0)
        .collect();
    let mut rows = Vec::new();
    for class in classes {
        let gs: Vec<&BTreeSet<usize>> = gt_cells
            .iter()
            .filter(|(k, _)| k.0 == class)
            .map(|(_, v)| v)
            .collect();
        let ps: Vec<&BTreeSet<usize>> = pred_cells
            .iter()
            .filter(|(k, _)| k.0 == class)
            .map(|(_, v)| v)
            .collect();
        let iou = |g: &BTreeSet<usize>, p: &BTreeSet<usize>| {
            let inter = g.intersection(p).count();
            inter as f64 / (g.len() + p.len() - inter) as f64
        };
        // best[i] = pred chosen for gt i, searched exhaustively
        let mut best: (usize, Vec<Option<usize>>) = (0, vec![None; gs.len()]);
        let mut current = vec![None; gs.len()];
        fn search(
            i: usize,
            used: &mut Vec<bool>,
            current: &mut Vec<Option<usize>>,
            best: &mut (usize, Vec<Option<usize>>),
            ok: &dyn Fn(usize, usize) -> bool,
        ) {
            if i == current.len() {
                let n = current.iter().flatten().count();
                if n > best.0 {
                    *best = (n, current.clone());
                }
                return;
            }
            current[i] = None;
            search(i + 1, used, current, best, ok);
            for p in 0..used.len() {
                if !used[p] && ok(i, p) {
                    used[p] = true;
                    current[i] = Some(p);
                    search(i + 1, used, current, best, ok);
                    current[i] = None;
                    used[p] = false;
                }
            }
        }
        let ok = |g: usize, p: usize| iou(gs[g], ps[p]) > 0.5;
        search(0, &mut vec![false; ps.len()], &mut current, &mut best, &ok);
        let ious: Vec<f64> = best
            .1
            .iter()
            .enumerate()
            .filter_map(|(g, p)| p.map(|p| iou(gs[g], ps[p])))
            .collect();
        let tp = ious.len();
        let fp = ps.len() - tp;
        let fn_ = gs.len() - tp;
        let sum: f64 = ious.iter().sum();
        let denom = tp as f64 + 0.5 * fp as f64 + 0.5 * fn_ as f64;
        let sq = if tp == 0 { 0.0 } else { sum / tp as f64 };
        let rq = if denom == 0.0 { 0.0 } else { tp as f64 / denom };
        rows.push((class, sq * rq, sq, rq, tp, fp, fn_));
    }
    let pq = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64
    };
    (rows, pq)
}

/// Random `side x side` panoptic map with up to `max_inst` rectangular thing
/// instances over a stuff background.
pub fn random_panoptic(
    rng: &mut impl rand::Rng,
    side: usize,
    classes: u32,
    max_inst: u32,
) -> Vec<Label> {
    let mut map: Vec<Label> = (0..side * side)
        .map(|_| Label::new(rng.gen_range(0..classes), 0))
        .collect();
    for inst in 1..=rng.gen_range(0..=max_inst) {
        let class = rng.gen_range(0..classes);
        let (h0, w0) = (rng.gen_range(0..side), rng.gen_range(0..side));
        let (h1, w1) = (rng.gen_range(h0..side), rng.gen_range(w0..side));
        for h in h0..=h1 {
            for w in w0..=w1 {
                map[h * side + w] = Label::new(class, inst);
            }
        }
    }
    map
}

/// A prediction derived from `gt`: a few cells relabeled and some instance
/// rectangles shifted, so that matches, misses and false positives all occur.
pub fn perturb(rng: &mut impl rand::Rng, gt: &[Label], side: usize, classes: u32) -> Vec<Label> {
    let mut pred = gt.to_vec();
    let shift = rng.gen_range(0..3);
    if shift > 0 {
        for h in (shift..side).rev() {
            for w in 0..side {
                if gt[(h - shift) * side + w].inst > 0 {
                    pred[h * side + w] = gt[(h - shift) * side + w];
                }
            }
        }
    }
    for _ in 0..rng.gen_range(0..side * side / 4) {
        let c = rng.gen_range(0..side * side);
        pred[c] = Label::new(rng.gen_range(0..classes), rng.gen_range(0..4));
    }
    pred
}
