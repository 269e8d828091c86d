//! Responsiveness metrics: pipe-up statistics at the first time point,
//! percentile-defined acute events, the variation metric at those events,
//! and time-sliced AUROC.

mod acuity;
mod roc;
mod trajectory;
mod variation;

pub use acuity::{
    all_definitions, change_series, compute_thresholds, detect_acute_events, nearest_rank,
    parse_thresholds_csv, pooled_changes, reference_thresholds, thresholds_from_cohort,
    write_thresholds_csv, AcuityDefinition, Percentile, ThresholdEntry, ThresholdTable,
    REFERENCE_THRESHOLDS_CSV,
};
pub use roc::{auroc, score_at, timeslice_auroc, SliceAuroc, SLICE_HOURS, TIMESLICE_MIN_MINUTES};
pub use trajectory::{first_prediction_stats, ClassStats, PipeUpStats, PredictionTrajectory};
pub use variation::{mean_variation, variation_report, variation_ve, VariationReport};
