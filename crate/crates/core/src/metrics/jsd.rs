//! Set-level Jensen-Shannon divergence over pooled voxel occupancy.
//!
//! All points of each event set pool into one histogram on a shared
//! resolution^3 grid spanning the union bounding box inflated by 5%.
//! JSD uses base-2 logarithms, so identical sets score 0 and sets landing in
//! disjoint voxels score 1.

use crate::data::PointCloud;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

pub const DEFAULT_JSD_RESOLUTION: usize = 28;

/// Occupancy histogram of one point set.
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    pub resolution: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub counts: Vec<u64>,
}

impl VoxelGrid {
    pub fn new(resolution: usize, lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::invalid("voxel resolution must be positive"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::invalid(format!(
                "voxel bounds must span positive volume, got {lo:?}..{hi:?}"
            )));
        }
        Ok(VoxelGrid {
            resolution,
            lo,
            hi,
            counts: vec![0; resolution * resolution * resolution],
        })
    }

    pub fn insert(&mut self, p: &[f32]) {
        let r = self.resolution;
        let mut idx = 0usize;
        for ((&v, &lo), &hi) in p.iter().take(3).zip(&self.lo).zip(&self.hi) {
            let frac = (v as f64 - lo) / (hi - lo);
            let cell = ((frac * r as f64) as isize).clamp(0, r as isize - 1) as usize;
            idx = idx * r + cell;
        }
        self.counts[idx] += 1;
    }

    pub fn add_set(&mut self, set: &[PointCloud]) {
        for pc in set {
            for i in 0..pc.n_points() {
                self.insert(pc.point(i));
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_probabilities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

/// Base-2 JSD between two histograms (0 log 0 = 0). Result clamped to [0, 1]
/// against rounding.
pub fn jsd_hist(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let ln2 = std::f64::consts::LN_2;
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        if pi > 0.0 {
            acc += 0.5 * pi * (pi / mi).ln() / ln2;
        }
        if qi > 0.0 {
            acc += 0.5 * qi * (qi / mi).ln() / ln2;
        }
    }
    acc.clamp(0.0, 1.0)
}

/// Spatial bounding box of pooled sets, per axis.
fn union_bounds(sets: &[&[PointCloud]]) -> Result<([f64; 3], [f64; 3])> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut any = false;
    for set in sets {
        for pc in *set {
            for i in 0..pc.n_points() {
                let p = pc.point(i);
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a] as f64);
                    hi[a] = hi[a].max(p[a] as f64);
                }
                any = true;
            }
        }
    }
    if !any {
        return Err(Error::EmptyInput("jsd over empty point sets"));
    }
    // Inflate 5%; give flat axes a token thickness so indexing stays sane.
    for a in 0..3 {
        let extent = hi[a] - lo[a];
        let pad = if extent > 0.0 { 0.025 * extent } else { 1e-6 };
        lo[a] -= pad;
        hi[a] += pad;
    }
    Ok((lo, hi))
}

/// JSD between two event sets at the given voxel resolution.
pub fn jsd_sets(set_a: &[PointCloud], set_b: &[PointCloud], resolution: usize) -> Result<f64> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::EmptyInput("jsd_sets requires non-empty sets"));
    }
    let (lo, hi) = union_bounds(&[set_a, set_b])?;
    let mut grid_a = VoxelGrid::new(resolution, lo, hi)?;
    grid_a.add_set(set_a);
    let mut grid_b = VoxelGrid::new(resolution, lo, hi)?;
    grid_b.add_set(set_b);
    if grid_a.total() == 0 || grid_b.total() == 0 {
        return Err(Error::EmptyInput("jsd_sets: a set contributed no points"));
    }
    Ok(jsd_hist(
        &grid_a.to_probabilities(),
        &grid_b.to_probabilities(),
    ))
}

/// The two reference scores for a domain: JSD between a random 50/50 split
/// of the set, and JSD against uniform noise clouds in the domain's
/// bounding box (matched event count and per-event point counts).
pub fn jsd_baselines(
    domain_set: &[PointCloud],
    resolution: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if domain_set.len() < 2 {
        return Err(Error::invalid(
            "jsd_baselines needs at least two events to split",
        ));
    }
    // Fisher-Yates split.
    let mut indices: Vec<usize> = (0..domain_set.len()).collect();
    let mut rng = Rng::substream(seed, stream::SPLIT, 0);
    for i in (1..indices.len()).rev() {
        let j = rng.below(i + 1);
        indices.swap(i, j);
    }
    let half = domain_set.len() / 2;
    let first: Vec<PointCloud> = indices[..half].iter().map(|&i| domain_set[i].clone()).collect();
    let second: Vec<PointCloud> = indices[half..].iter().map(|&i| domain_set[i].clone()).collect();
    let in_domain = jsd_sets(&first, &second, resolution)?;

    let (lo, hi) = union_bounds(&[domain_set])?;
    let mut rand_rng = Rng::substream(seed, stream::RAND_CLOUDS, 0);
    let d = domain_set[0].dim();
    let mut random_set = Vec::with_capacity(domain_set.len());
    for pc in domain_set {
        let mut values = Vec::with_capacity(pc.n_points() * d);
        for _ in 0..pc.n_points() {
            for a in 0..3 {
                values.push(rand_rng.uniform_range(lo[a], hi[a]) as f32);
            }
            values.extend(std::iter::repeat_n(0.0, d - 3));
        }
        random_set.push(PointCloud::new(crate::tensor::Tensor::new(
            vec![pc.n_points(), d],
            values,
        )?)?);
    }
    let rand = jsd_sets(domain_set, &random_set, resolution)?;
    Ok((in_domain, rand))
}
