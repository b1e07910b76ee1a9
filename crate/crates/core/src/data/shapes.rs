//! Synthetic wireframe solids: triangular prisms and cuboids.
//!
//! Every event draws per-axis extents from U(0.5, 1.5) and a uniform random
//! 3-D rotation (Shoemake quaternion method), centers the solid at the
//! origin and samples points uniformly by arc length over the edge set
//! (9 edges for a prism, 12 for a cuboid). The noisy variant adds
//! N(0, sigma^2) to every coordinate from a separate noise substream, so
//! noisy events are corrupted copies of the clean events for the same seed.

use crate::data::{Dataset, PointCloud};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

/// Default noise level for the noisy shapes domain.
pub const DEFAULT_SHAPE_SIGMA: f32 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeClass {
    TriangularPrism = 0,
    Cuboid = 1,
}

impl ShapeClass {
    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            0 => Ok(ShapeClass::TriangularPrism),
            1 => Ok(ShapeClass::Cuboid),
            other => Err(Error::invalid(format!("unknown shape class {other}"))),
        }
    }
}

type Vec3 = [f64; 3];
type Edge = (Vec3, Vec3);
/// One wireframe segment after rotation, in f32.
pub type SegmentF32 = ([f32; 3], [f32; 3]);

fn rotate(q: [f64; 4], v: Vec3) -> Vec3 {
    // Quaternion rotation q v q* with q = (w, x, y, z).
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let (vx, vy, vz) = (v[0], v[1], v[2]);
    // t = 2 * cross(q.xyz, v)
    let tx = 2.0 * (y * vz - z * vy);
    let ty = 2.0 * (z * vx - x * vz);
    let tz = 2.0 * (x * vy - y * vx);
    [
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    ]
}

/// Uniform random rotation (Shoemake). Consumes exactly three uniforms.
fn random_quaternion(rng: &mut Rng) -> [f64; 4] {
    let u1 = rng.uniform();
    let u2 = rng.uniform();
    let u3 = rng.uniform();
    let tau = std::f64::consts::TAU;
    [
        ((1.0 - u1).sqrt()) * (tau * u2).sin(),
        ((1.0 - u1).sqrt()) * (tau * u2).cos(),
        (u1.sqrt()) * (tau * u3).sin(),
        (u1.sqrt()) * (tau * u3).cos(),
    ]
}

/// Rotated wireframe edge set for a solid with full extents `size`,
/// centered at the origin.
pub fn wireframe_edges(class: ShapeClass, size: [f32; 3], quat: [f64; 4]) -> Vec<SegmentF32> {
    let (hx, hy, hz) = (
        size[0] as f64 / 2.0,
        size[1] as f64 / 2.0,
        size[2] as f64 / 2.0,
    );
    let edges: Vec<Edge> = match class {
        ShapeClass::Cuboid => {
            let corner = |i: usize| -> Vec3 {
                [
                    if i & 1 == 0 { -hx } else { hx },
                    if i & 2 == 0 { -hy } else { hy },
                    if i & 4 == 0 { -hz } else { hz },
                ]
            };
            // 12 edges: pairs of corners differing in exactly one bit.
            let mut out = Vec::with_capacity(12);
            for i in 0..8usize {
                for bit in [1usize, 2, 4] {
                    if i & bit == 0 {
                        out.push((corner(i), corner(i | bit)));
                    }
                }
            }
            out
        }
        ShapeClass::TriangularPrism => {
            // Equilateral triangle cross-section in the x-y plane, scaled per
            // axis, extruded along z. 3 + 3 + 3 = 9 edges.
            let vertex = |k: usize, z: f64| -> Vec3 {
                let angle = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / 3.0;
                [hx * angle.cos(), hy * angle.sin(), z]
            };
            let mut out = Vec::with_capacity(9);
            for k in 0..3 {
                let next = (k + 1) % 3;
                out.push((vertex(k, -hz), vertex(next, -hz)));
                out.push((vertex(k, hz), vertex(next, hz)));
                out.push((vertex(k, -hz), vertex(k, hz)));
            }
            out
        }
    };
    edges
        .into_iter()
        .map(|(a, b)| {
            let ra = rotate(quat, a);
            let rb = rotate(quat, b);
            (
                [ra[0] as f32, ra[1] as f32, ra[2] as f32],
                [rb[0] as f32, rb[1] as f32, rb[2] as f32],
            )
        })
        .collect()
}

/// Distance from a point to the nearest segment of a wireframe.
pub fn point_to_wireframe_distance(p: &[f32], edges: &[SegmentF32]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, b) in edges {
        let ab = [
            (b[0] - a[0]) as f64,
            (b[1] - a[1]) as f64,
            (b[2] - a[2]) as f64,
        ];
        let ap = [
            (p[0] - a[0]) as f64,
            (p[1] - a[1]) as f64,
            (p[2] - a[2]) as f64,
        ];
        let len_sq = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
        let t = if len_sq > 0.0 {
            ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let d = [
            ap[0] - t * ab[0],
            ap[1] - t * ab[1],
            ap[2] - t * ab[2],
        ];
        best = best.min((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
    }
    best
}

pub fn gen_shapes(
    n_events: usize,
    n_points: usize,
    seed: u64,
    noisy: bool,
    noise_sigma: f32,
) -> Result<Dataset> {
    if n_events == 0 || !n_events.is_multiple_of(2) {
        return Err(Error::invalid(
            "gen_shapes: n_events must be even and positive for the 50/50 class split",
        ));
    }
    if n_points < 2 {
        return Err(Error::invalid("gen_shapes: n_points must be >= 2"));
    }
    let mut events = Vec::with_capacity(n_events);
    let mut labels = Vec::with_capacity(n_events);
    for ev in 0..n_events {
        let (class, edges, mut geom) = event_geometry(seed, ev);
        let lengths: Vec<f64> = edges
            .iter()
            .map(|(a, b)| {
                let d = [
                    (b[0] - a[0]) as f64,
                    (b[1] - a[1]) as f64,
                    (b[2] - a[2]) as f64,
                ];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            })
            .collect();
        let total: f64 = lengths.iter().sum();
        let mut cumulative = Vec::with_capacity(lengths.len());
        let mut acc = 0.0;
        for l in &lengths {
            acc += l;
            cumulative.push(acc);
        }

        let mut values = Vec::with_capacity(n_points * 3);
        for _ in 0..n_points {
            let u = geom.uniform() * total;
            let idx = cumulative.partition_point(|&c| c < u).min(edges.len() - 1);
            let prev = if idx == 0 { 0.0 } else { cumulative[idx - 1] };
            let t = if lengths[idx] > 0.0 {
                ((u - prev) / lengths[idx]).clamp(0.0, 1.0) as f32
            } else {
                0.0
            };
            let (a, b) = edges[idx];
            values.extend_from_slice(&[
                (b[0] - a[0]).mul_add(t, a[0]),
                (b[1] - a[1]).mul_add(t, a[1]),
                (b[2] - a[2]).mul_add(t, a[2]),
            ]);
        }
        if noisy {
            let mut noise = Rng::substream(seed, stream::SHAPES_NOISE, ev as u64);
            for v in values.iter_mut() {
                *v += noise_sigma * noise.normal_f32();
            }
        }
        events.push(PointCloud::new(Tensor::new(vec![n_points, 3], values)?)?);
        labels.push(class.label());
    }
    let label = if noisy { "shapes-noisy" } else { "shapes-clean" };
    let mut ds = Dataset::new(events, label)?;
    ds.class_labels = Some(labels);
    Ok(ds)
}

/// Per-event solid: class, rotated wireframe, and the geometry stream
/// positioned right after the size/rotation draws (point sampling continues
/// from it). `gen_shapes` and the analytic reconstruction below share this.
fn event_geometry(seed: u64, ev: usize) -> (ShapeClass, Vec<SegmentF32>, Rng) {
    let class = if ev.is_multiple_of(2) {
        ShapeClass::TriangularPrism
    } else {
        ShapeClass::Cuboid
    };
    let mut geom = Rng::substream(seed, stream::SHAPES_GEOMETRY, ev as u64);
    let size = [
        geom.uniform_range(0.5, 1.5) as f32,
        geom.uniform_range(0.5, 1.5) as f32,
        geom.uniform_range(0.5, 1.5) as f32,
    ];
    let quat = random_quaternion(&mut geom);
    (class, wireframe_edges(class, size, quat), geom)
}

/// Rebuild the analytic wireframe for event `ev` of a `gen_shapes` dataset.
pub fn event_wireframe(seed: u64, ev: usize) -> Vec<SegmentF32> {
    event_geometry(seed, ev).1
}
