//! Point-cloud datasets: synthetic generators, normalization and file I/O.

mod csv;
mod lines;
mod pcds;
mod shapes;

pub use csv::load_csv;
pub use lines::gen_lines;
pub use pcds::{load_manifest, load_pc, save_pc, save_pc_with_meta, Manifest};
pub use shapes::{
    event_wireframe, gen_shapes, point_to_wireframe_distance, wireframe_edges, ShapeClass,
    DEFAULT_SHAPE_SIGMA,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One event: an unordered set of N points in D dimensions (D = 3 spatial,
/// or 4 with a charge channel). Point order carries no meaning; everything
/// consuming clouds must be permutation-invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Tensor,
}

impl PointCloud {
    pub fn new(points: Tensor) -> Result<Self> {
        let (n, d) = points.as_matrix()?;
        if n < 1 {
            return Err(Error::EmptyInput("PointCloud requires at least one point"));
        }
        if points.shape().len() != 2 || !(3..=4).contains(&d) {
            return Err(Error::invalid(format!(
                "PointCloud expects shape [N, 3] or [N, 4], got {:?}",
                points.shape()
            )));
        }
        Ok(PointCloud { points })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        PointCloud::new(Tensor::from_rows(rows)?)
    }

    pub fn n_points(&self) -> usize {
        self.points.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.points.shape()[1]
    }

    pub fn points(&self) -> &Tensor {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f32] {
        self.points.row(i)
    }

    /// Iterator over one coordinate column.
    pub fn coord(&self, axis: usize) -> impl Iterator<Item = f32> + '_ {
        let d = self.dim();
        self.points.values().iter().skip(axis).step_by(d).copied()
    }

    /// Reorder points; `perm` must be a permutation of 0..N.
    pub fn permuted(&self, perm: &[usize]) -> Result<PointCloud> {
        if perm.len() != self.n_points() {
            return Err(Error::invalid("permutation length differs from point count"));
        }
        let d = self.dim();
        let mut values = Vec::with_capacity(self.points.numel());
        for &i in perm {
            values.extend_from_slice(self.point(i));
        }
        PointCloud::new(Tensor::new(vec![perm.len(), d], values)?)
    }
}

/// Center/scale transform fitted on a dataset. `clamped` records that the
/// data had zero variance and the scale fell back to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub center: Vec<f32>,
    pub scale: f32,
    #[serde(default)]
    pub clamped: bool,
}

impl NormStats {
    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        self.transform(cloud, false)
    }

    pub fn invert(&self, cloud: &PointCloud) -> PointCloud {
        self.transform(cloud, true)
    }

    fn transform(&self, cloud: &PointCloud, inverse: bool) -> PointCloud {
        let d = cloud.dim();
        debug_assert_eq!(d, self.center.len());
        let mut values = cloud.points().values().to_vec();
        for row in values.chunks_mut(d) {
            for (v, &c) in row.iter_mut().zip(&self.center) {
                if inverse {
                    *v = v.mul_add(self.scale, c);
                } else {
                    *v = (*v - c) / self.scale;
                }
            }
        }
        PointCloud::new(Tensor::new(vec![cloud.n_points(), d], values).unwrap()).unwrap()
    }
}

/// A set of events from one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub events: Vec<PointCloud>,
    pub domain_label: String,
    /// Per-event class (0 = triangular prism, 1 = cuboid); absent for lines.
    pub class_labels: Option<Vec<u8>>,
    /// Stats this dataset was normalized with, if any.
    pub normalization: Option<NormStats>,
}

impl Dataset {
    pub fn new(events: Vec<PointCloud>, domain_label: impl Into<String>) -> Result<Self> {
        let ds = Dataset {
            events,
            domain_label: domain_label.into(),
            class_labels: None,
            normalization: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::EmptyInput("Dataset has no events"));
        }
        let d = self.events[0].dim();
        if self.events.iter().any(|e| e.dim() != d) {
            return Err(Error::invalid("events disagree on dimension"));
        }
        if let Some(labels) = &self.class_labels {
            if labels.len() != self.events.len() {
                return Err(Error::invalid("class label count differs from event count"));
            }
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::invalid("class labels must be 0 or 1"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.events[0].dim()
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn total_points(&self) -> usize {
        self.events.iter().map(PointCloud::n_points).sum()
    }

    /// Axis-aligned bounding box over all points (spatial + charge dims).
    pub fn bounding_box(&self) -> (Vec<f32>, Vec<f32>) {
        let d = self.dim();
        let mut lo = vec![f32::INFINITY; d];
        let mut hi = vec![f32::NEG_INFINITY; d];
        for e in &self.events {
            for row in e.points().values().chunks(d) {
                for i in 0..d {
                    lo[i] = lo[i].min(row[i]);
                    hi[i] = hi[i].max(row[i]);
                }
            }
        }
        (lo, hi)
    }
}

/// Fit center/scale on `dataset` and return the transformed copy.
///
/// Center is the per-dimension mean over every point; scale is the pooled
/// standard deviation of the centered coordinates. Zero variance clamps the
/// scale to 1 and flags the stats.
pub fn normalize(dataset: &Dataset) -> Result<(Dataset, NormStats)> {
    dataset.validate()?;
    let d = dataset.dim();
    let total = dataset.total_points();
    let mut center = vec![0.0f64; d];
    for e in &dataset.events {
        for row in e.points().values().chunks(d) {
            for (c, &v) in center.iter_mut().zip(row) {
                *c += v as f64;
            }
        }
    }
    for c in center.iter_mut() {
        *c /= total as f64;
    }
    let mut ss = 0.0f64;
    for e in &dataset.events {
        for row in e.points().values().chunks(d) {
            for (c, &v) in center.iter().zip(row) {
                let dv = v as f64 - c;
                ss += dv * dv;
            }
        }
    }
    let var = ss / (total * d) as f64;
    let (scale, clamped) = if var > 0.0 {
        (var.sqrt() as f32, false)
    } else {
        (1.0, true)
    };
    let stats = NormStats {
        center: center.iter().map(|&c| c as f32).collect(),
        scale,
        clamped,
    };
    Ok((normalize_with(dataset, &stats), stats))
}

/// Apply existing stats to a dataset.
pub fn normalize_with(dataset: &Dataset, stats: &NormStats) -> Dataset {
    let mut out = dataset.clone();
    out.events = dataset.events.iter().map(|e| stats.apply(e)).collect();
    out.normalization = Some(stats.clone());
    out
}

/// Inverse of [`normalize_with`].
pub fn denormalize(dataset: &Dataset, stats: &NormStats) -> Dataset {
    let mut out = dataset.clone();
    out.events = dataset.events.iter().map(|e| stats.invert(e)).collect();
    out.normalization = None;
    out
}
