//! Evaluation suite: Chamfer distance, set-level JSD with baselines, fitted
//! conditional noise tables and outlier trimming.

mod chamfer;
mod jsd;
mod report;
mod sigma;
mod trim;

pub use chamfer::{chamfer, chamfer_with};
pub use jsd::{jsd_baselines, jsd_hist, jsd_sets, VoxelGrid, DEFAULT_JSD_RESOLUTION};
pub use report::{mean_std, median, sigma_rows_to_csv, MetricsReport};
pub use sigma::{fitted_sigma_report, FittedSigmaRow};
pub use trim::outlier_trim;
