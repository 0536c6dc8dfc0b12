//! Error metrics, feature correlation and the one-axis-at-a-time experiment grid.

mod grid;
mod metrics;

pub use grid::{summarize, Axis, CellSettings, GridCell, GridConfig, ResultRecord, SummaryRow};
pub use metrics::{correlate, mae, mean, nmae, pearson, per_day_nmae, sample_sd, Correlation};
