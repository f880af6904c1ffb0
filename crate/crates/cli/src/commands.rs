use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use latentlab_core::camera::{self, CameraModel, PixelMapping};
use latentlab_core::config::{parse_fixed, parse_list, PipelineConfig};
use latentlab_core::decode::{self, DecodeInputs, PanopticMap};
use latentlab_core::heatmap::{self, Heatmap};
use latentlab_core::loss::{self, LossInputs};
use latentlab_core::metrics::{self, BinAccuracy, BoundaryBins, ClassSets, IoUReport, PQReport};
use latentlab_core::tensor::{read_tensor, write_tensor};
use latentlab_core::{
    bev, grid, io, mix, split, Label, PointCloud, Provenance, Tensor, VoxelIndex,
};
use serde::Serialize;

use crate::args::*;

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            Ok(PipelineConfig::parse(&text)?)
        }
    }
}

/// Applies an explicit flag on top of the config file value.
pub fn overlay(cfg: &mut PipelineConfig, key: &str, value: Option<impl ToString>) -> Result<()> {
    if let Some(v) = value {
        cfg.set(key, &v.to_string())?;
    }
    Ok(())
}

pub fn finish_config(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    log::info!(
        "config: {}",
        cfg.to_text().lines().collect::<Vec<_>>().join("; ")
    );
    Ok(())
}

fn overlay_grid(cfg: &mut PipelineConfig, g: &GridArgs) -> Result<()> {
    overlay(cfg, "grid", g.grid.as_ref())?;
    overlay(cfg, "bounds", g.bounds.as_ref())
}

/// Integer-valued float tensor entries as `u32`.
pub fn tensor_u32(t: &Tensor, what: &str) -> Result<Vec<u32>> {
    t.data()
        .iter()
        .map(|&v| {
            ensure!(
                v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f32,
                "{what}: expected non-negative integers, found {v}"
            );
            Ok(v as u32)
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    Ok(io::write_atomic(path, text.as_bytes())?)
}

pub fn provenance_text(prov: &[Provenance]) -> String {
    let mut out = String::with_capacity(prov.len() * 10);
    for p in prov {
        let _ = writeln!(out, "{},{}", p.frame, p.index);
    }
    out
}

/// Writes `<stem>.bin`, `<stem>.label` and `<stem>.prov` into `dir`.
pub fn write_cloud(dir: &Path, stem: &str, cloud: &PointCloud) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    io::write_scan(dir.join(format!("{stem}.bin")), cloud)?;
    if let Some(labels) = cloud.labels() {
        io::write_labels(dir.join(format!("{stem}.label")), labels)?;
    }
    if let Some(prov) = cloud.provenance() {
        write_text(&dir.join(format!("{stem}.prov")), &provenance_text(prov))?;
    }
    Ok(())
}

pub fn voxel_tensor(voxels: &[Option<VoxelIndex>]) -> Tensor {
    let data = voxels
        .iter()
        .flat_map(|v| match v {
            Some(v) => [v.x as f32, v.y as f32, v.z as f32],
            None => [-1.0; 3],
        })
        .collect();
    Tensor::new(vec![voxels.len(), 3], data).expect("n x 3")
}

pub fn png_bytes(heat: &Heatmap) -> Result<Vec<u8>> {
    let (h, w) = heat.dims();
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf).write_image(
        &heat.to_gray8(),
        w as u32,
        h as u32,
        ExtendedColorType::L8,
    )?;
    Ok(buf)
}

fn frame_from_stem(path: &Path, default: u32) -> u32 {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.parse().ok())
        .unwrap_or(default)
}

/// Sorted file stems of `<dir>/*.<ext>`.
pub fn list_frames(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                frames.push(stem.to_string());
            }
        }
    }
    frames.sort();
    Ok(frames)
}

fn read_label_file(path: &Path) -> Result<Vec<Label>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(io::decode_labels(&bytes)?)
}

pub fn split(cfg_path: Option<&Path>, a: SplitArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay(&mut cfg, "ratio", a.ratio)?;
    finish_config(&cfg)?;
    let frames = match (&a.frames_dir, a.frames) {
        (Some(dir), _) => list_frames(dir, "bin")?,
        (None, Some(n)) => (0..n).map(|i| format!("{i:06}")).collect(),
        (None, None) => bail!("either --frames or --frames-dir is required"),
    };
    let manifest = split::fixed_interval_split(&frames, cfg.ratio)?;
    if let Some(out) = &a.out {
        write_text(out, &manifest.to_tsv())?;
    }
    let idx: Vec<String> = manifest
        .labeled_indices()
        .iter()
        .map(usize::to_string)
        .collect();
    println!("{}", idx.join(","));
    Ok(())
}

pub fn manifest(a: ManifestArgs) -> Result<()> {
    let split = split::read_split(&a.split)?;
    let m = split::self_training_manifest(&split, &a.gt_dir, &a.pseudo_dir)?;
    m.write(&a.out)?;
    log::info!("{} manifest entries", m.entries.len());
    Ok(())
}

pub fn mix(cfg_path: Option<&Path>, a: MixArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay_grid(&mut cfg, &a.grid)?;
    overlay(&mut cfg, "regions", a.regions.as_ref())?;
    overlay(&mut cfg, "p_cylmix", a.p)?;
    overlay(&mut cfg, "seed", a.seed)?;
    finish_config(&cfg)?;

    let fa = a
        .frame_a
        .unwrap_or_else(|| frame_from_stem(&a.scan_a, mix::SOURCE_A));
    let fb = a
        .frame_b
        .unwrap_or_else(|| frame_from_stem(&a.scan_b, mix::SOURCE_B));
    let ca = io::read_labeled_scan(&a.scan_a, &a.labels_a)?.tag_source(fa);
    let cb = io::read_labeled_scan(&a.scan_b, &a.labels_b)?.tag_source(fb);
    let out = mix::cylinder_mix(ca, cb, &cfg.grid, &cfg.mix)?;
    write_cloud(&a.out_dir, "mix1", &out.first)?;
    write_cloud(&a.out_dir, "mix2", &out.second)?;
    log::info!(
        "mix applied={} sizes {} + {}",
        out.applied,
        out.first.len(),
        out.second.len()
    );
    Ok(())
}

pub fn voxelize(cfg_path: Option<&Path>, a: VoxelizeArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay_grid(&mut cfg, &a.grid)?;
    finish_config(&cfg)?;
    let cloud = io::read_scan(&a.scan)?;
    let voxels = if a.drop_out_of_bounds {
        grid::voxelize_in_bounds(cloud.points(), &cfg.grid)?
    } else {
        grid::voxelize(cloud.points(), &cfg.grid)?
            .into_iter()
            .map(Some)
            .collect()
    };
    write_tensor(&a.out, &voxel_tensor(&voxels))?;
    Ok(())
}

pub fn bevpool(cfg_path: Option<&Path>, a: BevpoolArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay(&mut cfg, "grid", a.grid.as_ref())?;
    finish_config(&cfg)?;
    let features = read_tensor(&a.features)?;
    let indices = read_tensor(&a.indices)?;
    let fd = features.expect_rank(2, "features")?.to_vec();
    let id = indices.expect_rank(2, "indices")?;
    ensure!(
        id[1] == 3 && id[0] == fd[0],
        "indices must be {} x 3, got {:?}",
        fd[0],
        id
    );
    let c = fd[1];
    let mut rows = Vec::with_capacity(features.data().len());
    let mut voxels = Vec::with_capacity(fd[0]);
    for (f, v) in features
        .data()
        .chunks_exact(c.max(1))
        .zip(indices.data().chunks_exact(3))
    {
        if v.iter().any(|&x| x < 0.0) {
            continue;
        }
        ensure!(
            v.iter().all(|x| x.fract() == 0.0),
            "non-integer voxel index {v:?}"
        );
        voxels.push(VoxelIndex::new(v[0] as usize, v[1] as usize, v[2] as usize));
        rows.extend_from_slice(f);
    }
    let pooled = bev::bev_max_pool_with_fill(&rows, c, &voxels, cfg.grid.dims, a.fill)?;
    let t = if a.fold_height {
        pooled.to_height_folded_tensor()
    } else {
        pooled.to_tensor()
    };
    write_tensor(&a.out, &t)?;
    Ok(())
}

pub fn project(cfg_path: Option<&Path>, a: ProjectArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay(&mut cfg, "view", a.view)?;
    overlay(&mut cfg, "image_size", a.image_size.as_ref())?;
    finish_config(&cfg)?;
    let cloud = io::read_scan(&a.scan)?;
    let calib = io::read_calibration(&a.calib, cfg.view)?;
    let cam = CameraModel::from_calibration(&calib, cfg.image_size, cfg.view)?;
    let mapping = camera::project_points(cloud.points(), &cam);
    log::info!(
        "{} of {} points project into the image",
        mapping.pairs.len(),
        cloud.len()
    );
    write_tensor(&a.out, &mapping.to_tensor())?;
    Ok(())
}

pub fn boxes(cfg_path: Option<&Path>, a: BoxesArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay(&mut cfg, "things", a.things.as_ref())?;
    overlay(&mut cfg, "min_support", a.min_support)?;
    finish_config(&cfg)?;
    let mapping = PixelMapping::from_tensor(&read_tensor(&a.mapping)?)?;
    let labels = read_label_file(&a.labels)?;
    let boxes = camera::instance_boxes(&mapping, &labels, &cfg.things, cfg.min_support)?;
    write_text(&a.out, &camera::boxes_to_tsv(&boxes))?;
    Ok(())
}

pub fn heatmap(cfg_path: Option<&Path>, a: HeatmapArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay(&mut cfg, "r_corner", a.r_corner)?;
    overlay(&mut cfg, "p_center", a.p_center)?;
    overlay(&mut cfg, "image_size", a.size.as_ref())?;
    finish_config(&cfg)?;
    let heat = match (&a.boxes, &a.masks) {
        (Some(path), _) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut boxes = camera::boxes_from_tsv(&text)?;
            if let Some(view) = a.view {
                boxes.retain(|b| b.view_id == view);
            }
            heatmap::image_heatmap(&boxes, &cfg.heatmap, cfg.image_size)?
        }
        (None, Some(path)) => {
            let scores: Vec<f64> = parse_list(a.scores.as_deref().unwrap_or(""))?;
            heatmap::mask_heatmap(&read_tensor(path)?, &scores)?
        }
        (None, None) => bail!("either --boxes or --masks is required"),
    };
    write_tensor(&a.out, &heat.to_tensor())?;
    if let Some(png) = &a.png {
        io::write_atomic(png, &png_bytes(&heat)?)?;
    }
    Ok(())
}

pub fn decode(cfg_path: Option<&Path>, a: DecodeArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay(&mut cfg, "things", a.things.as_ref())?;
    overlay(&mut cfg, "center_threshold", a.threshold)?;
    overlay(&mut cfg, "nms_kernel", a.kernel)?;
    overlay(&mut cfg, "top_k", a.top_k)?;
    finish_config(&cfg)?;

    let sem_t = read_tensor(&a.sem)?;
    let d = sem_t.expect_rank(2, "semantic map")?;
    let dims = (d[0], d[1]);
    let sem = tensor_u32(&sem_t, "semantic map")?;
    let hm = Heatmap::from_tensor(&read_tensor(&a.centers_hm)?)?;
    ensure!(
        hm.dims() == dims,
        "center heatmap is {:?}, semantic map {:?}",
        hm.dims(),
        dims
    );
    let offsets = read_tensor(&a.offsets)?;
    ensure!(
        offsets.dims() == [dims.0, dims.1, 2],
        "offsets must be {}x{}x2, got {:?}",
        dims.0,
        dims.1,
        offsets.dims()
    );
    let fore = read_tensor(&a.fore_mask)?;
    ensure!(
        fore.dims() == [dims.0, dims.1],
        "fore mask must be {}x{}, got {:?}",
        dims.0,
        dims.1,
        fore.dims()
    );

    let centers = decode::find_centers(&hm, &cfg.decode)?;
    let inputs = DecodeInputs {
        dims,
        sem: &sem,
        offsets: offsets.data(),
        fore_mask: fore.data(),
    };
    let mut map = decode::assign_instances(&inputs, &centers, &cfg.things)?;
    if a.majority {
        map = decode::majority_semantic(&map);
    }
    log::info!("{} centers", centers.len());
    write_tensor(&a.out, &map.to_tensor())?;
    Ok(())
}

fn read_panoptic(path: &Path) -> Result<Vec<Label>> {
    if path.extension().and_then(|e| e.to_str()) == Some("label") {
        read_label_file(path)
    } else {
        Ok(PanopticMap::from_tensor(&read_tensor(path)?)?.labels())
    }
}

#[derive(Debug, Serialize)]
pub struct BoundaryRow {
    pub class: u32,
    pub accuracy: Vec<Option<f64>>,
    pub counts: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub panoptic: PQReport,
    pub semantic: IoUReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Vec<BoundaryRow>>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "class\tPQ\tSQ\tRQ\tTP\tFP\tFN");
        for c in &self.panoptic.per_class {
            let _ = writeln!(
                s,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
                c.class, c.pq, c.sq, c.rq, c.tp, c.fp, c.fn_
            );
        }
        let p = &self.panoptic;
        let _ = writeln!(
            s,
            "PQ\t{:.4}\nPQ_th\t{:.4}\nPQ_st\t{:.4}",
            p.pq, p.pq_things, p.pq_stuff
        );
        let _ = writeln!(s, "mIoU\t{:.4}", self.semantic.miou);
        if let Some(rows) = &self.boundary {
            for r in rows {
                let acc: Vec<String> = r
                    .accuracy
                    .iter()
                    .map(|a| a.map_or("-".into(), |v| format!("{v:.4}")))
                    .collect();
                let _ = writeln!(s, "boundary\t{}\t{}", r.class, acc.join("\t"));
            }
        }
        s
    }
}

pub fn evaluate(
    pred: &[Label],
    gt: &[Label],
    sets: &ClassSets,
    num_classes: Option<usize>,
    positions: Option<&[[f64; 3]]>,
) -> Result<EvalReport> {
    ensure!(
        pred.len() == gt.len(),
        "pred has {} cells, gt {}",
        pred.len(),
        gt.len()
    );
    let panoptic = metrics::panoptic_quality(pred, gt, sets)?;
    let ps: Vec<u32> = pred.iter().map(|l| l.sem).collect();
    let gs: Vec<u32> = gt.iter().map(|l| l.sem).collect();
    let seen = ps
        .iter()
        .chain(&gs)
        .copied()
        .max()
        .map_or(0, |m| m as usize + 1);
    let n = num_classes.unwrap_or(seen);
    let ignore: Vec<u32> = sets.ignore.iter().copied().collect();
    let semantic = metrics::mean_iou(&ps, &gs, n, &ignore)?;
    let boundary = match positions {
        None => None,
        Some(pos) => {
            let bins = BoundaryBins::default();
            let rows = metrics::boundary_accuracy(pos, &ps, gt, &bins)?;
            Some(rows.iter().map(boundary_row).collect())
        }
    };
    Ok(EvalReport {
        panoptic,
        semantic,
        boundary,
    })
}

fn boundary_row(b: &BinAccuracy) -> BoundaryRow {
    BoundaryRow {
        class: b.class,
        accuracy: (0..b.counts.len()).map(|i| b.accuracy(i)).collect(),
        counts: b.counts.clone(),
    }
}

pub fn eval(cfg_path: Option<&Path>, a: EvalArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay(&mut cfg, "things", a.things.as_ref())?;
    finish_config(&cfg)?;
    let pred = read_panoptic(&a.pred)?;
    let gt = read_panoptic(&a.gt)?;
    let stuff: BTreeSet<u32> = parse_list(&a.stuff)?.into_iter().collect();
    let ignore: BTreeSet<u32> = parse_list(&a.ignore)?.into_iter().collect();
    // classes named as stuff or ignore take precedence over the default thing list
    let things: Vec<u32> = cfg
        .things
        .iter()
        .copied()
        .filter(|c| !stuff.contains(c) && !ignore.contains(c))
        .collect();
    let sets = ClassSets::new(things, stuff, ignore)?;
    let positions: Option<Vec<[f64; 3]>> = match &a.scan {
        None => None,
        Some(p) => Some(
            io::read_scan(p)?
                .points()
                .iter()
                .map(|p| [p.x as f64, p.y as f64, p.z as f64])
                .collect(),
        ),
    };
    let report = evaluate(&pred, &gt, &sets, a.num_classes, positions.as_deref())?;
    let text = match a.report {
        ReportFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
        ReportFormat::Text => report.to_text(),
    };
    match &a.out {
        Some(out) => write_text(out, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn loss(cfg_path: Option<&Path>, a: LossArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    overlay(&mut cfg, "loss_weights", a.weights.as_ref())?;
    finish_config(&cfg)?;
    let load = |name: &str| read_tensor(a.inputs.join(format!("{name}.llt1")));
    let logits = load("sem_logits")?;
    let num_classes = *logits
        .dims()
        .last()
        .context("sem_logits must have a class dimension")?;
    let sem_gt = tensor_u32(&load("sem_gt")?, "sem_gt")?;
    let (hm_pred, hm_gt) = (load("hm_pred")?, load("hm_gt")?);
    let (os_pred, os_gt) = (load("os_pred")?, load("os_gt")?);
    let (fm_pred, fm_gt) = (load("fm_pred")?, load("fm_gt")?);
    let ignore: Vec<u32> = parse_list(&a.ignore)?;
    let inputs = LossInputs {
        sem_logits: logits.data(),
        num_classes,
        sem_gt: &sem_gt,
        ignore: &ignore,
        hm_pred: hm_pred.data(),
        hm_gt: hm_gt.data(),
        os_pred: os_pred.data(),
        os_gt: os_gt.data(),
        fm_pred: fm_pred.data(),
        fm_gt: fm_gt.data(),
    };
    let b = loss::segmentation_loss(&inputs, &cfg.loss)?;
    println!("{}", serde_json::to_string(&b)?);
    Ok(())
}

/// `H,W` flag values.
pub fn parse_size(s: &str) -> Result<(usize, usize)> {
    let [h, w] = parse_fixed(s)?;
    Ok((h, w))
}
