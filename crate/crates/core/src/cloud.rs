//! In-memory point cloud with optional per-point labels and provenance.

use crate::error::{Error, Result};

/// One LiDAR return: position in meters plus brightness/intensity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub b: f32,
}

impl Point {
    pub const fn new(x: f32, y: f32, z: f32, b: f32) -> Self {
        Self { x, y, z, b }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.b.is_finite()
    }
}

/// Per-point semantic class and instance id. Instance 0 means "no instance".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Label {
    pub sem: u32,
    pub inst: u32,
}

impl Label {
    pub const fn new(sem: u32, inst: u32) -> Self {
        Self { sem, inst }
    }
}

/// Where a point came from: the source frame and its index in that frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub frame: u32,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point>,
    labels: Option<Vec<Label>>,
    provenance: Option<Vec<Provenance>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self {
            points,
            labels: None,
            provenance: None,
        }
    }

    pub fn with_labels(points: Vec<Point>, labels: Vec<Label>) -> Result<Self> {
        Self::new(points).set_labels(labels)
    }

    pub fn set_labels(mut self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::LabelMismatch {
                expected: self.points.len(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn set_provenance(mut self, provenance: Vec<Provenance>) -> Result<Self> {
        if provenance.len() != self.points.len() {
            return Err(Error::shape(format!(
                "provenance has {} entries for {} points",
                provenance.len(),
                self.points.len()
            )));
        }
        self.provenance = Some(provenance);
        Ok(self)
    }

    /// Tags every point as coming from `frame` at its current index.
    pub fn tag_source(self, frame: u32) -> Self {
        let provenance = (0..self.points.len() as u32)
            .map(|index| Provenance { frame, index })
            .collect();
        Self {
            provenance: Some(provenance),
            ..self
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> Option<&[Provenance]> {
        self.provenance.as_deref()
    }

    pub fn into_parts(self) -> (Vec<Point>, Option<Vec<Label>>, Option<Vec<Provenance>>) {
        (self.points, self.labels, self.provenance)
    }

    /// Rows selected by `keep`, in order. Labels and provenance follow their points.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            provenance: self
                .provenance
                .as_ref()
                .map(|p| idx.iter().map(|&i| p[i]).collect()),
        }
    }

    pub(crate) fn from_raw_parts(
        points: Vec<Point>,
        labels: Option<Vec<Label>>,
        provenance: Option<Vec<Provenance>>,
    ) -> Self {
        debug_assert!(labels.as_ref().is_none_or(|l| l.len() == points.len()));
        debug_assert!(provenance.as_ref().is_none_or(|p| p.len() == points.len()));
        Self {
            points,
            labels,
            provenance,
        }
    }
}
