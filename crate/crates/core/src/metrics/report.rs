//! Aggregated evaluation report with CSV and JSON emitters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::sigma::FittedSigmaRow;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub jsd_trans: Option<f64>,
    pub jsd_in_domain: Option<f64>,
    pub jsd_rand: Option<f64>,
    pub cd_reco_mean: Option<f64>,
    pub cd_reco_std: Option<f64>,
    /// Mean after trimming to the 99% keep fraction.
    pub cd_clean_mean: Option<f64>,
    pub rows: Vec<FittedSigmaRow>,
    /// Run provenance: seed, config hash, tool version.
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub tool_version: Option<String>,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("jsd_trans", self.jsd_trans),
            ("jsd_in_domain", self.jsd_in_domain),
            ("jsd_rand", self.jsd_rand),
        ] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// One `metric,value` row per populated metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let mut push = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                out.push_str(&format!("{name},{v}\n"));
            }
        };
        push("jsd_trans", self.jsd_trans);
        push("jsd_in_domain", self.jsd_in_domain);
        push("jsd_rand", self.jsd_rand);
        push("cd_reco_mean", self.cd_reco_mean);
        push("cd_reco_std", self.cd_reco_std);
        push("cd_clean_mean", self.cd_clean_mean);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fitted-sigma table as CSV, one row per y bin.
pub fn sigma_rows_to_csv(rows: &[FittedSigmaRow]) -> String {
    let mut out = String::from("y,sigma_y,sigma_t,stderr,mae\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.y_bin_center, r.sigma_true, r.sigma_t, r.stderr, r.mae
        ));
    }
    out
}

/// Mean and (sample) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
