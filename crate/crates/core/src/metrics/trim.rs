//! Magnitude-based outlier trimming.

use crate::error::{Error, Result};

/// Keep the lowest `ceil(keep_fraction * len)` values by magnitude,
/// preserving their original order; ties break by position. Returns the kept
/// values and how many were removed.
pub fn outlier_trim(values: &[f64], keep_fraction: f64) -> Result<(Vec<f64>, usize)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("outlier_trim on empty list"));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "keep_fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    let keep = ((keep_fraction * values.len() as f64).ceil() as usize).min(values.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .abs()
            .partial_cmp(&values[b].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut keep_mask = vec![false; values.len()];
    for &i in &order[..keep] {
        keep_mask[i] = true;
    }
    let kept: Vec<f64> = values
        .iter()
        .zip(&keep_mask)
        .filter_map(|(&v, &k)| k.then_some(v))
        .collect();
    Ok((kept, values.len() - keep))
}
