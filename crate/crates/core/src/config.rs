//! Pipeline configuration with `key = value` text files.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::decode::DecodeSpec;
use crate::error::{Error, Result};
use crate::grid::{CylinderGridSpec, GridDims};
use crate::heatmap::HeatmapSpec;
use crate::loss::LossWeights;
use crate::mix::MixSpec;

/// Raw SemanticKITTI ids of the eight thing classes
/// (car, bicycle, motorcycle, truck, other-vehicle, person, bicyclist, motorcyclist).
pub const SEMANTIC_KITTI_THINGS: [u32; 8] = [10, 11, 15, 18, 20, 30, 31, 32];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub grid: CylinderGridSpec,
    pub mix: MixSpec,
    pub heatmap: HeatmapSpec,
    pub decode: DecodeSpec,
    pub loss: LossWeights,
    pub ratio: f64,
    pub seed: u64,
    pub things: Vec<u32>,
    pub min_support: usize,
    /// (H, W) of camera images.
    pub image_size: (usize, usize),
    pub view: u8,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            grid: CylinderGridSpec::default(),
            mix: MixSpec::default(),
            heatmap: HeatmapSpec::default(),
            decode: DecodeSpec::default(),
            loss: LossWeights::default(),
            ratio: 0.1,
            seed: 0,
            things: SEMANTIC_KITTI_THINGS.to_vec(),
            min_support: 1,
            image_size: (376, 1241),
            view: 2,
            data_dir: None,
            out_dir: None,
        }
    }
}

pub fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Parse(format!("bad list element `{s}` in `{value}`")))
        })
        .collect()
}

pub fn parse_fixed<T: FromStr + Copy, const N: usize>(value: &str) -> Result<[T; N]> {
    let items: Vec<T> = parse_list(value)?;
    items.try_into().map_err(|_| {
        Error::Parse(format!(
            "expected {N} comma-separated values, got `{value}`"
        ))
    })
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value `{value}` for `{key}`")))
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {}: expected `key = value`", n + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "grid" => {
                let [x, y, z] = parse_fixed(value)?;
                self.grid.dims = GridDims::new(x, y, z);
            }
            "bounds" => {
                let [r0, r1, z0, z1] = parse_fixed(value)?;
                self.grid.rho_min = r0;
                self.grid.rho_max = r1;
                self.grid.z_min = z0;
                self.grid.z_max = z1;
            }
            "regions" => {
                let [x, y, z] = parse_fixed(value)?;
                self.mix.regions = GridDims::new(x, y, z);
            }
            "p_cylmix" => self.mix.p_cylmix = parse_one(key, value)?,
            "r_corner" => self.heatmap.r_corner = parse_one(key, value)?,
            "p_center" => self.heatmap.p_center = parse_one(key, value)?,
            "r_center_floor" => self.heatmap.r_center_floor = parse_one(key, value)?,
            "center_threshold" => self.decode.center_threshold = parse_one(key, value)?,
            "nms_kernel" => self.decode.nms_kernel = parse_one(key, value)?,
            "top_k" => self.decode.top_k = parse_one(key, value)?,
            "loss_weights" => {
                let [hm, os, fm] = parse_fixed(value)?;
                self.loss = LossWeights {
                    mu_hm: hm,
                    mu_os: os,
                    mu_fm: fm,
                };
            }
            "ratio" => self.ratio = parse_one(key, value)?,
            "seed" => {
                self.seed = parse_one(key, value)?;
                self.mix.seed = self.seed;
            }
            "things" => self.things = parse_list(value)?,
            "min_support" => self.min_support = parse_one(key, value)?,
            "image_size" => {
                let [h, w] = parse_fixed(value)?;
                self.image_size = (h, w);
            }
            "view" => self.view = parse_one(key, value)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.mix.validate(self.grid.dims)?;
        self.heatmap.validate()?;
        self.decode.validate()?;
        self.loss.validate()?;
        crate::split::split_step(self.ratio)?;
        Ok(())
    }

    /// Effective configuration, one `key = value` per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid", join(&g.dims.as_array()));
        kv("bounds", join(&[g.rho_min, g.rho_max, g.z_min, g.z_max]));
        kv("regions", join(&self.mix.regions.as_array()));
        kv("p_cylmix", self.mix.p_cylmix.to_string());
        kv("r_corner", self.heatmap.r_corner.to_string());
        kv("p_center", self.heatmap.p_center.to_string());
        kv("r_center_floor", self.heatmap.r_center_floor.to_string());
        kv("center_threshold", self.decode.center_threshold.to_string());
        kv("nms_kernel", self.decode.nms_kernel.to_string());
        kv("top_k", self.decode.top_k.to_string());
        kv(
            "loss_weights",
            join(&[self.loss.mu_hm, self.loss.mu_os, self.loss.mu_fm]),
        );
        kv("ratio", self.ratio.to_string());
        kv("seed", self.seed.to_string());
        kv("things", join(&self.things));
        kv("min_support", self.min_support.to_string());
        kv("image_size", join(&[self.image_size.0, self.image_size.1]));
        kv("view", self.view.to_string());
        if let Some(d) = &self.data_dir {
            kv("data_dir", d.display().to_string());
        }
        if let Some(d) = &self.out_dir {
            kv("out_dir", d.display().to_string());
        }
        s
    }
}
