//! Synthetic PICU-like cohorts: generation, patient-level splitting,
//! imputation/normalization and the on-disk cohort and split formats.

mod episode;
mod generate;
mod io;
mod preprocess;
mod schema;
mod split;

pub use episode::{EpisodeMatrix, Outcome};
pub use generate::{generate_cohort, GeneratorConfig};
pub use io::{
    load_cohort, load_split, parse_cohort, parse_split, save_cohort, save_split, write_cohort,
    write_split, COHORT_FORMAT_VERSION, SPLIT_FORMAT_VERSION,
};
pub use preprocess::{impute, impute_and_normalize, NormStats};
pub use schema::{default_schema, AcuteDirection, ChannelSchema, ACUITY_CHANNELS};
pub use split::{split_patients, summarize, CohortSplit, SplitSummary};
