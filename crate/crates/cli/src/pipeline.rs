//! split -> mix -> voxelize -> project -> boxes -> heatmap over a dataset
//! directory. Every stage writes stable files, so an interrupted run can be
//! resumed and two runs with the same seed produce identical bytes.
//!
//! Output layout:
//!
//! ```text
//! config.txt  split.tsv  pairs.tsv
//! frames/<frame>/{voxels.llt1, mapping.llt1, boxes.tsv, heatmap.llt1}
//! mixed/<a>_<b>/mix{1,2}.{bin,label,prov,voxels.llt1}
//! mixed/<a>_<b>/mix{1,2}.<frame>.{mapping.llt1, boxes.tsv, heatmap.llt1}
//! ```
//!
//! Provenance frame ids in `.prov` files are positions in `split.tsv`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use latentlab_core::camera::{self, CameraModel, PixelMapping};
use latentlab_core::config::PipelineConfig;
use latentlab_core::io::{self, Calibration};
use latentlab_core::mix::{self, MixSpec};
use latentlab_core::tensor::write_tensor;
use latentlab_core::{grid, heatmap, split, PointCloud};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::commands::{list_frames, voxel_tensor, write_cloud, write_text};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineSummary {
    pub frames: usize,
    pub labeled: usize,
    pub pairs: usize,
    /// Work items skipped because their outputs already existed.
    pub skipped: usize,
}

struct Dataset<'a> {
    root: &'a Path,
    frames: Vec<String>,
}

impl Dataset<'_> {
    fn scan(&self, frame: &str) -> PathBuf {
        self.root.join("velodyne").join(format!("{frame}.bin"))
    }

    fn labels(&self, frame: &str) -> PathBuf {
        self.root.join("labels").join(format!("{frame}.label"))
    }

    /// `calib/<frame>.txt` when present, else the shared `calib.txt`.
    fn calibration(&self, frame: &str, view: u8) -> Result<Calibration> {
        let own = self.root.join("calib").join(format!("{frame}.txt"));
        let path = if own.is_file() {
            own
        } else {
            self.root.join("calib.txt")
        };
        Ok(io::read_calibration(&path, view)?)
    }

    fn index(&self, frame: &str) -> u32 {
        self.frames
            .iter()
            .position(|f| f == frame)
            .expect("known frame") as u32
    }
}

fn all_exist(paths: &[PathBuf]) -> bool {
    paths.iter().all(|p| p.is_file())
}

/// Projection, boxes and heatmap of `cloud` restricted to `subset` (indices into
/// `cloud`), seen through `cam`. Mapping rows refer to indices of `cloud`.
fn image_stage(
    cfg: &PipelineConfig,
    cloud: &PointCloud,
    subset: Option<&[usize]>,
    cam: &CameraModel,
    out: [&Path; 3],
) -> Result<()> {
    let mapping = match subset {
        None => camera::project_points(cloud.points(), cam),
        Some(idx) => {
            let pts: Vec<_> = idx.iter().map(|&i| cloud.points()[i]).collect();
            let mut m = camera::project_points(&pts, cam);
            for p in &mut m.pairs {
                p.point = idx[p.point as usize] as u32;
            }
            m
        }
    };
    let labels = cloud.labels().context("image stage needs labels")?;
    let boxes = camera::instance_boxes(&mapping, labels, &cfg.things, cfg.min_support)?;
    let heat = heatmap::image_heatmap(&boxes, &cfg.heatmap, mapping.image_size)?;
    write_mapping(out[0], &mapping)?;
    write_text(out[1], &camera::boxes_to_tsv(&boxes))?;
    write_tensor(out[2], &heat.to_tensor())?;
    Ok(())
}

fn write_mapping(path: &Path, m: &PixelMapping) -> Result<()> {
    Ok(write_tensor(path, &m.to_tensor())?)
}

fn labeled_frame(
    cfg: &PipelineConfig,
    ds: &Dataset<'_>,
    out: &Path,
    frame: &str,
    resume: bool,
) -> Result<bool> {
    let dir = out.join("frames").join(frame);
    let files = ["voxels.llt1", "mapping.llt1", "boxes.tsv", "heatmap.llt1"].map(|f| dir.join(f));
    if resume && all_exist(&files) {
        return Ok(false);
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let cloud = io::read_labeled_scan(ds.scan(frame), ds.labels(frame))?;
    let voxels = grid::voxelize(cloud.points(), &cfg.grid)?;
    write_tensor(
        &files[0],
        &voxel_tensor(&voxels.into_iter().map(Some).collect::<Vec<_>>()),
    )?;
    let cam =
        CameraModel::from_calibration(&ds.calibration(frame, cfg.view)?, cfg.image_size, cfg.view)?;
    image_stage(cfg, &cloud, None, &cam, [&files[1], &files[2], &files[3]])?;
    Ok(true)
}

fn mixed_pair(
    cfg: &PipelineConfig,
    ds: &Dataset<'_>,
    out: &Path,
    (a, b): &(String, String),
    seed: u64,
    resume: bool,
) -> Result<bool> {
    let dir = out.join("mixed").join(format!("{a}_{b}"));
    let mut files = Vec::new();
    for stem in ["mix1", "mix2"] {
        for ext in ["bin", "label", "prov", "voxels.llt1"] {
            files.push(dir.join(format!("{stem}.{ext}")));
        }
        for f in [a, b] {
            for ext in ["mapping.llt1", "boxes.tsv", "heatmap.llt1"] {
                files.push(dir.join(format!("{stem}.{f}.{ext}")));
            }
        }
    }
    if resume && all_exist(&files) {
        return Ok(false);
    }

    let ca = io::read_labeled_scan(ds.scan(a), ds.labels(a))?.tag_source(ds.index(a));
    let cb = io::read_labeled_scan(ds.scan(b), ds.labels(b))?.tag_source(ds.index(b));
    let spec = MixSpec { seed, ..cfg.mix };
    let mixed = mix::cylinder_mix(ca, cb, &cfg.grid, &spec)?;
    let cams = [a, b].map(|f| -> Result<(String, u32, CameraModel)> {
        let calib = ds.calibration(f, cfg.view)?;
        Ok((
            f.clone(),
            ds.index(f),
            CameraModel::from_calibration(&calib, cfg.image_size, cfg.view)?,
        ))
    });
    let [cam_a, cam_b] = cams;
    let cams = [cam_a?, cam_b?];

    for (stem, cloud) in [("mix1", &mixed.first), ("mix2", &mixed.second)] {
        write_cloud(&dir, stem, cloud)?;
        let voxels = grid::voxelize(cloud.points(), &cfg.grid)?;
        write_tensor(
            dir.join(format!("{stem}.voxels.llt1")),
            &voxel_tensor(&voxels.into_iter().map(Some).collect::<Vec<_>>()),
        )?;
        let prov = cloud
            .provenance()
            .context("mixed cloud without provenance")?;
        for (name, id, cam) in &cams {
            let subset: Vec<usize> = (0..cloud.len()).filter(|&i| prov[i].frame == *id).collect();
            let paths = ["mapping.llt1", "boxes.tsv", "heatmap.llt1"]
                .map(|ext| dir.join(format!("{stem}.{name}.{ext}")));
            image_stage(
                cfg,
                cloud,
                Some(&subset),
                cam,
                [&paths[0], &paths[1], &paths[2]],
            )?;
        }
    }
    Ok(true)
}

/// Per-pair mix seeds drawn sequentially from the run seed, so they do not
/// depend on scheduling.
pub fn pair_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

pub fn run_pipeline(
    cfg: &PipelineConfig,
    jobs: Option<usize>,
    resume: bool,
) -> Result<PipelineSummary> {
    cfg.validate()?;
    let data = cfg
        .data_dir
        .as_deref()
        .context("no dataset directory (--data or data_dir)")?;
    let out = cfg
        .out_dir
        .as_deref()
        .context("no output directory (--out or out_dir)")?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let frames = list_frames(&data.join("velodyne"), "bin")?;
    ensure!(
        !frames.is_empty(),
        "no scans under {}",
        data.join("velodyne").display()
    );
    let ds = Dataset { root: data, frames };

    // paths are left out so that runs into different directories compare equal
    let recorded = PipelineConfig {
        data_dir: None,
        out_dir: None,
        ..cfg.clone()
    };
    write_text(&out.join("config.txt"), &recorded.to_text())?;

    let split = split::fixed_interval_split(&ds.frames, cfg.ratio)?;
    write_text(&out.join("split.tsv"), &split.to_tsv())?;
    let labeled: Vec<String> = split.labeled().iter().map(|s| s.to_string()).collect();

    let pairing = if labeled.len() >= 2 {
        Some(mix::pair_scans(&labeled, cfg.seed)?)
    } else {
        log::warn!("{} labeled frame(s); nothing to mix", labeled.len());
        None
    };
    let mut pairs_tsv = String::new();
    let pairs = pairing.as_ref().map_or(&[][..], |p| &p.pairs[..]);
    for (a, b) in pairs {
        pairs_tsv.push_str(&format!("{a}\t{b}\n"));
    }
    if let Some(left) = pairing.as_ref().and_then(|p| p.leftover.as_ref()) {
        pairs_tsv.push_str(&format!("{left}\t-\n"));
    }
    write_text(&out.join("pairs.tsv"), &pairs_tsv)?;
    let seeds = pair_seeds(cfg.seed, pairs.len());

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().context("building worker pool")?;
    let (frame_runs, pair_runs) = pool.install(|| -> Result<(Vec<bool>, Vec<bool>)> {
        let f = labeled
            .par_iter()
            .map(|frame| labeled_frame(cfg, &ds, out, frame, resume))
            .collect::<Result<Vec<_>>>()?;
        let p = pairs
            .par_iter()
            .zip(&seeds)
            .map(|(pair, &seed)| mixed_pair(cfg, &ds, out, pair, seed, resume))
            .collect::<Result<Vec<_>>>()?;
        Ok((f, p))
    })?;
    let skipped = frame_runs
        .iter()
        .chain(&pair_runs)
        .filter(|ran| !**ran)
        .count();
    Ok(PipelineSummary {
        frames: ds.frames.len(),
        labeled: labeled.len(),
        pairs: pairs.len(),
        skipped,
    })
}
