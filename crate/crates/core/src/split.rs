//! Semi-supervised frame splits and self-training manifests.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    frames: Vec<String>,
    labeled: Vec<bool>,
    ratio: f64,
}

impl SplitManifest {
    pub fn frames(&self) -> &[String] {
        &self.frames
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.labeled[i]
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.frames.len())
            .filter(|&i| self.labeled[i])
            .collect()
    }

    pub fn labeled(&self) -> Vec<&str> {
        self.iter().filter(|(_, l)| *l).map(|(f, _)| f).collect()
    }

    pub fn unlabeled(&self) -> Vec<&str> {
        self.iter().filter(|(_, l)| !*l).map(|(f, _)| f).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> + '_ {
        self.frames
            .iter()
            .map(String::as_str)
            .zip(self.labeled.iter().copied())
    }

    /// `frame_id<TAB>labeled|unlabeled` per line, preceded by a `# ratio=` header.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# ratio={}\n", self.ratio);
        for (frame, labeled) in self.iter() {
            let kind = if labeled { "labeled" } else { "unlabeled" };
            out.push_str(&format!("{frame}\t{kind}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut ratio = None;
        let mut frames = Vec::new();
        let mut labeled = Vec::new();
        for line in text.lines() {
            if let Some(r) = line.strip_prefix("# ratio=") {
                ratio = Some(
                    r.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad ratio `{r}`")))?,
                );
                continue;
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (frame, kind) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("bad split line `{line}`")))?;
            frames.push(frame.to_string());
            labeled.push(match kind.trim() {
                "labeled" => true,
                "unlabeled" => false,
                other => return Err(Error::Parse(format!("unknown split kind `{other}`"))),
            });
        }
        let ratio = ratio.unwrap_or_else(|| {
            labeled.iter().filter(|&&l| l).count() as f64 / frames.len().max(1) as f64
        });
        Ok(Self {
            frames,
            labeled,
            ratio,
        })
    }
}

/// Interval between labeled frames: `round(1 / ratio)` with ties to even, at least 1.
pub fn split_step(ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    Ok(((1.0 / ratio).round_ties_even() as usize).max(1))
}

/// Labels frames `0, k, 2k, ...` where `k = round(1 / ratio)`.
pub fn fixed_interval_split<S: AsRef<str>>(frames: &[S], ratio: f64) -> Result<SplitManifest> {
    let step = split_step(ratio)?;
    Ok(SplitManifest {
        frames: frames.iter().map(|f| f.as_ref().to_string()).collect(),
        labeled: (0..frames.len()).map(|i| i % step == 0).collect(),
        ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    GroundTruth,
    Pseudo,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelKind::GroundTruth => "ground_truth",
            LabelKind::Pseudo => "pseudo",
        })
    }
}

impl FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground_truth" => Ok(LabelKind::GroundTruth),
            "pseudo" => Ok(LabelKind::Pseudo),
            other => Err(Error::Parse(format!("unknown label kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub frame: String,
    pub label_path: PathBuf,
    pub kind: LabelKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingManifest {
    pub entries: Vec<ManifestEntry>,
}

impl TrainingManifest {
    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.frame, e.label_path.display(), e.kind))
            .collect()
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let mut cols = line.split('\t');
                match (cols.next(), cols.next(), cols.next(), cols.next()) {
                    (Some(frame), Some(path), Some(kind), None) => Ok(ManifestEntry {
                        frame: frame.to_string(),
                        label_path: PathBuf::from(path),
                        kind: kind.parse()?,
                    }),
                    _ => Err(Error::Parse(format!("bad manifest line `{line}`"))),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_tsv().as_bytes())
    }
}

pub fn label_file(dir: &Path, frame: &str) -> PathBuf {
    dir.join(format!("{frame}.label"))
}

/// Ground-truth labels for labeled frames and pseudo labels for the rest, in frame order.
pub fn self_training_manifest(
    split: &SplitManifest,
    gt_dir: &Path,
    pseudo_dir: &Path,
) -> Result<TrainingManifest> {
    let entries = split
        .iter()
        .map(|(frame, labeled)| {
            if labeled {
                return Ok(ManifestEntry {
                    frame: frame.to_string(),
                    label_path: label_file(gt_dir, frame),
                    kind: LabelKind::GroundTruth,
                });
            }
            let path = label_file(pseudo_dir, frame);
            if !path.is_file() {
                return Err(Error::MissingPseudo {
                    frame: frame.to_string(),
                    path,
                });
            }
            Ok(ManifestEntry {
                frame: frame.to_string(),
                label_path: path,
                kind: LabelKind::Pseudo,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TrainingManifest { entries })
}

pub fn read_split(path: impl AsRef<Path>) -> Result<SplitManifest> {
    let path = path.as_ref();
    SplitManifest::from_tsv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
