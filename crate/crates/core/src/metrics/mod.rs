//! Verification scores and their grouped aggregation.
//!
//! MAE is scaled per output group (heat tendencies by `c_p`, moisture
//! tendencies by `L_v`). CRPS uses the fair ensemble estimator, with
//! deterministic predictions scored as point masses.

mod diagnostics;
mod export;
mod grouped;
mod scores;

pub use diagnostics::{ranks, spearman, uncertainty_error_diagnostics, Binning, UncertaintyDiagnostics};
pub use export::{read_report_json, write_comparison_csv, write_report_csv, write_report_json};
pub use grouped::{
    grouped_metrics, Grouping, MetricConfig, MetricReport, MetricRow, R2Mode, HEAT_SCALE,
    MOISTURE_SCALE,
};
pub use scores::{crps_fair, crps_point, mae, r2};
