//! Minimal static SVG scatter plots (2-D projections of point clouds).

use std::fmt::Write as _;
use std::path::Path;

use pcdiff_core::PointCloud;

pub struct Series<'a> {
    pub cloud: &'a PointCloud,
    pub color: &'a str,
    pub label: &'a str,
}

/// Scatter the chosen coordinate pair of each series into one SVG file.
pub fn scatter(
    path: &Path,
    series: &[Series<'_>],
    axes: (usize, usize),
    title: &str,
) -> std::io::Result<()> {
    let (ax, ay) = axes;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for s in series {
        for i in 0..s.cloud.n_points() {
            let p = s.cloud.point(i);
            let (x, y) = (p[ax] as f64, p[ay] as f64);
            lo[0] = lo[0].min(x);
            hi[0] = hi[0].max(x);
            lo[1] = lo[1].min(y);
            hi[1] = hi[1].max(y);
        }
    }
    for a in 0..2 {
        let pad = (hi[a] - lo[a]).max(1e-6) * 0.05;
        lo[a] -= pad;
        hi[a] += pad;
    }

    let (w, h) = (640.0, 480.0);
    let sx = |x: f64| (x - lo[0]) / (hi[0] - lo[0]) * (w - 80.0) + 50.0;
    let sy = |y: f64| h - 40.0 - (y - lo[1]) / (hi[1] - lo[1]) * (h - 80.0);

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>").unwrap();
    writeln!(
        out,
        "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>",
        w / 2.0
    )
    .unwrap();
    for (i, s) in series.iter().enumerate() {
        writeln!(
            out,
            "<text x=\"56\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>",
            40.0 + 16.0 * i as f64,
            s.color,
            s.label
        )
        .unwrap();
        for j in 0..s.cloud.n_points() {
            let p = s.cloud.point(j);
            writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.6\" fill=\"{}\" fill-opacity=\"0.55\"/>",
                sx(p[ax] as f64),
                sy(p[ay] as f64),
                s.color
            )
            .unwrap();
        }
    }
    writeln!(out, "</svg>").unwrap();
    std::fs::write(path, out)
}
