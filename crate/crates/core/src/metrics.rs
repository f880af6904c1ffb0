//! Panoptic quality, mean IoU and boundary-distance binned accuracy.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::cloud::Label;
use crate::error::{Error, Result};

/// Thing, stuff and ignored class ids. Ignored ids default to `{0}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSets {
    pub things: BTreeSet<u32>,
    pub stuff: BTreeSet<u32>,
    pub ignore: BTreeSet<u32>,
}

impl ClassSets {
    pub fn new(
        things: impl IntoIterator<Item = u32>,
        stuff: impl IntoIterator<Item = u32>,
        ignore: impl IntoIterator<Item = u32>,
    ) -> Result<Self> {
        let sets = Self {
            things: things.into_iter().collect(),
            stuff: stuff.into_iter().collect(),
            ignore: ignore.into_iter().collect(),
        };
        let overlap = sets.things.intersection(&sets.stuff).next().is_some()
            || sets.things.intersection(&sets.ignore).next().is_some()
            || sets.stuff.intersection(&sets.ignore).next().is_some();
        if overlap {
            return Err(Error::InvalidParameter(
                "thing, stuff and ignore class sets must be disjoint".into(),
            ));
        }
        Ok(sets)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassPQ {
    pub class: u32,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    #[serde(skip)]
    pub iou_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PQReport {
    /// Classes that occur in prediction or ground truth, ascending.
    pub per_class: Vec<ClassPQ>,
    pub pq: f64,
    pub pq_things: f64,
    pub pq_stuff: f64,
}

impl PQReport {
    pub fn class(&self, class: u32) -> Option<&ClassPQ> {
        self.per_class.iter().find(|c| c.class == class)
    }
}

/// A segment is `(class, instance)`; stuff classes collapse to instance 0.
type Segment = (u32, u32);

fn segment_of(l: Label, sets: &ClassSets) -> Option<Segment> {
    if sets.ignore.contains(&l.sem) {
        None
    } else if sets.stuff.contains(&l.sem) {
        Some((l.sem, 0))
    } else if sets.things.contains(&l.sem) && l.inst > 0 {
        Some((l.sem, l.inst))
    } else {
        None
    }
}

/// Panoptic quality over aligned label arrays. Cells whose ground-truth class
/// is ignored are dropped from both sides. A pred/gt segment pair of the same
/// class matches when IoU > 0.5.
pub fn panoptic_quality(pred: &[Label], gt: &[Label], sets: &ClassSets) -> Result<PQReport> {
    if pred.len() != gt.len() {
        return Err(Error::shape(format!(
            "pred has {} cells, gt has {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut pred_area: HashMap<Segment, usize> = HashMap::new();
    let mut gt_area: HashMap<Segment, usize> = HashMap::new();
    let mut overlap: HashMap<(Segment, Segment), usize> = HashMap::new();
    for (&p, &g) in pred.iter().zip(gt) {
        if sets.ignore.contains(&g.sem) {
            continue;
        }
        let ps = segment_of(p, sets);
        let gs = segment_of(g, sets);
        if let Some(ps) = ps {
            *pred_area.entry(ps).or_default() += 1;
        }
        if let Some(gs) = gs {
            *gt_area.entry(gs).or_default() += 1;
        }
        if let (Some(ps), Some(gs)) = (ps, gs) {
            if ps.0 == gs.0 {
                *overlap.entry((ps, gs)).or_default() += 1;
            }
        }
    }

    // IoU > 0.5 makes matches unique, so each gt segment has at most one partner.
    let mut matched: BTreeMap<Segment, (Segment, f64)> = BTreeMap::new();
    for (&(ps, gs), &inter) in &overlap {
        let union = pred_area[&ps] + gt_area[&gs] - inter;
        let iou = inter as f64 / union as f64;
        if iou > 0.5 {
            matched.insert(gs, (ps, iou));
        }
    }
    let matched_pred: HashSet<Segment> = matched.values().map(|(ps, _)| *ps).collect();

    let classes: BTreeSet<u32> = pred_area
        .keys()
        .chain(gt_area.keys())
        .map(|s| s.0)
        .collect();
    let per_class = classes
        .into_iter()
        .map(|class| {
            let tp_ious: Vec<f64> = matched
                .iter()
                .filter(|(gs, _)| gs.0 == class)
                .map(|(_, &(_, iou))| iou)
                .collect();
            let fp = pred_area
                .keys()
                .filter(|s| s.0 == class && !matched_pred.contains(s))
                .count();
            let fn_ = gt_area
                .keys()
                .filter(|s| s.0 == class && !matched.contains_key(s))
                .count();
            class_pq(class, &tp_ious, fp, fn_)
        })
        .collect::<Vec<_>>();
    Ok(aggregate(per_class, sets))
}

/// Per-class PQ/SQ/RQ from matched IoUs (summed in the given order).
pub fn class_pq(class: u32, tp_ious: &[f64], fp: usize, fn_: usize) -> ClassPQ {
    let tp = tp_ious.len();
    let iou_sum: f64 = tp_ious.iter().sum();
    let denom = tp as f64 + 0.5 * fp as f64 + 0.5 * fn_ as f64;
    let (pq, sq, rq) = if denom == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        let sq = if tp == 0 { 0.0 } else { iou_sum / tp as f64 };
        let rq = tp as f64 / denom;
        (sq * rq, sq, rq)
    };
    ClassPQ {
        class,
        pq,
        sq,
        rq,
        tp,
        fp,
        fn_,
        iou_sum,
    }
}

/// Means over present classes; an empty group averages to 0.
pub fn aggregate(per_class: Vec<ClassPQ>, sets: &ClassSets) -> PQReport {
    let mean = |filter: &dyn Fn(u32) -> bool| {
        let vals: Vec<f64> = per_class
            .iter()
            .filter(|c| filter(c.class))
            .map(|c| c.pq)
            .collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    PQReport {
        pq: mean(&|_| true),
        pq_things: mean(&|c| sets.things.contains(&c)),
        pq_stuff: mean(&|c| sets.stuff.contains(&c)),
        per_class,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoUReport {
    /// `None` for classes absent from both prediction and ground truth (or ignored).
    pub per_class: Vec<Option<f64>>,
    pub miou: f64,
}

/// IoU per class and their mean over classes present in gt or pred. Cells
/// whose gt class is ignored are skipped.
pub fn mean_iou(pred: &[u32], gt: &[u32], num_classes: usize, ignore: &[u32]) -> Result<IoUReport> {
    if pred.len() != gt.len() {
        return Err(Error::shape(format!(
            "pred has {} cells, gt has {}",
            pred.len(),
            gt.len()
        )));
    }
    let check = |c: u32| {
        if (c as usize) < num_classes {
            Ok(c as usize)
        } else {
            Err(Error::InvalidClass {
                class: c,
                num_classes,
            })
        }
    };
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &g) in pred.iter().zip(gt) {
        let (pi, gi) = (check(p)?, check(g)?);
        if ignore.contains(&g) {
            continue;
        }
        if pi == gi {
            tp[gi] += 1;
        } else {
            fp[pi] += 1;
            fn_[gi] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = (0..num_classes)
        .map(|c| {
            let denom = tp[c] + fp[c] + fn_[c];
            (denom > 0 && !ignore.contains(&(c as u32))).then(|| tp[c] as f64 / denom as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let miou = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(IoUReport { per_class, miou })
}

/// Ascending `r_ds` edges splitting points into `edges.len() + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryBins {
    edges: Vec<f64>,
}

impl Default for BoundaryBins {
    fn default() -> Self {
        Self {
            edges: vec![1.0 / 3.0, 2.0 / 3.0],
        }
    }
}

impl BoundaryBins {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.windows(2).any(|w| w[0] >= w[1] || w[0].is_nan())
            || edges.iter().any(|e| !e.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "bin edges {edges:?} must be finite and strictly ascending"
            )));
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn num_bins(&self) -> usize {
        self.edges.len() + 1
    }

    /// Number of edges `<= r`.
    pub fn bin_of(&self, r: f64) -> usize {
        self.edges.partition_point(|&e| e <= r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinAccuracy {
    pub class: u32,
    /// Per bin: `(correct, total)`.
    pub counts: Vec<(usize, usize)>,
}

impl BinAccuracy {
    pub fn accuracy(&self, bin: usize) -> Option<f64> {
        let (ok, n) = self.counts[bin];
        (n > 0).then(|| ok as f64 / n as f64)
    }
}

/// Semantic accuracy of ground-truth instance points binned by
/// `r_ds = |p - centroid| / max_i |p_i - centroid|`. Instances are grouped by
/// `(gt class, gt instance)` with instance > 0; a zero-size instance puts all
/// its points in the first bin.
pub fn boundary_accuracy(
    positions: &[[f64; 3]],
    pred_sem: &[u32],
    gt: &[Label],
    bins: &BoundaryBins,
) -> Result<Vec<BinAccuracy>> {
    if positions.len() != gt.len() || pred_sem.len() != gt.len() {
        return Err(Error::shape(format!(
            "positions {}, pred {}, gt {} must align",
            positions.len(),
            pred_sem.len(),
            gt.len()
        )));
    }
    let mut members: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, l) in gt.iter().enumerate() {
        if l.inst > 0 {
            members.entry((l.sem, l.inst)).or_default().push(i);
        }
    }
    let mut acc: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for ((class, _), idx) in members {
        let n = idx.len() as f64;
        let mut centroid = [0.0f64; 3];
        for &i in &idx {
            for k in 0..3 {
                centroid[k] += positions[i][k];
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n);
        let dist = |i: usize| {
            (0..3)
                .map(|k| (positions[i][k] - centroid[k]).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let size = idx.iter().map(|&i| dist(i)).fold(0.0, f64::max);
        let counts = acc
            .entry(class)
            .or_insert_with(|| vec![(0, 0); bins.num_bins()]);
        for &i in &idx {
            let bin = if size > 0.0 {
                bins.bin_of(dist(i) / size)
            } else {
                0
            };
            counts[bin].1 += 1;
            if pred_sem[i] == class {
                counts[bin].0 += 1;
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|(class, counts)| BinAccuracy { class, counts })
        .collect())
}
