//! Fitted conditional noise levels for the lines domain.
//!
//! Clean lines have x identically zero, so after translation the spread of
//! the x coordinate directly estimates the noise the translation added.
//! Events bin by their per-event median y over [0, 2]; each bin reports the
//! sample standard deviation of its pooled x coordinates.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedSigmaRow {
    /// Center of the y bin.
    pub y_bin_center: f64,
    /// Ground-truth law at the bin center: 0.1 * y.
    pub sigma_true: f64,
    /// Sample standard deviation of pooled x coordinates.
    pub sigma_t: f64,
    /// sigma_t / sqrt(points in bin).
    pub stderr: f64,
    /// |sigma_t - sigma_true|.
    pub mae: f64,
    /// Points pooled into the bin.
    pub n_points: usize,
    /// Root mean square of the contributing events' median y; the pooled
    /// noise law evaluates at this point rather than the bin center.
    pub y_rms: f64,
}

/// Bin events by median y and fit sigma per bin. Returns the rows plus a
/// warning per empty bin (empty bins emit no row).
pub fn fitted_sigma_report(
    translated: &Dataset,
    n_bins: usize,
) -> Result<(Vec<FittedSigmaRow>, Vec<String>)> {
    if n_bins == 0 {
        return Err(Error::invalid("fitted_sigma_report: n_bins must be positive"));
    }
    translated.validate()?;
    let width = 2.0 / n_bins as f64;

    let mut bin_x: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    let mut bin_y_sq: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for event in &translated.events {
        let mut ys: Vec<f64> = event.coord(1).map(|v| v as f64).collect();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if ys.len() % 2 == 1 {
            ys[ys.len() / 2]
        } else {
            0.5 * (ys[ys.len() / 2 - 1] + ys[ys.len() / 2])
        };
        // Clamp drifting medians into the edge bins.
        let bin = ((median / width) as isize).clamp(0, n_bins as isize - 1) as usize;
        bin_x[bin].extend(event.coord(0).map(|v| v as f64));
        bin_y_sq[bin].push(median * median);
    }

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (i, xs) in bin_x.iter().enumerate() {
        let center = (i as f64 + 0.5) * width;
        if xs.len() < 2 {
            warnings.push(format!(
                "bin {i} (y center {center:.3}) has {} points; row omitted",
                xs.len()
            ));
            continue;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let sigma_t = var.sqrt();
        let sigma_true = 0.1 * center;
        let y_rms =
            (bin_y_sq[i].iter().sum::<f64>() / bin_y_sq[i].len() as f64).sqrt();
        rows.push(FittedSigmaRow {
            y_bin_center: center,
            sigma_true,
            sigma_t,
            stderr: sigma_t / n.sqrt(),
            mae: (sigma_t - sigma_true).abs(),
            n_points: xs.len(),
            y_rms,
        });
    }
    Ok((rows, warnings))
}
