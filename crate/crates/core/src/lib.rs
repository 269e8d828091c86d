//! Perseverating recurrent networks for clinical time series.
//!
//! The crate bundles a small dense numeric kernel, a synthetic ICU cohort
//! generator, a stacked LSTM with exact backpropagation through time, input
//! perseveration, a causally masked attention comparator, an RMSprop trainer
//! and the responsiveness metrics used to compare the resulting models.

pub mod attention;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod kv;
pub mod linalg;
pub mod loss;
pub mod lstm;
pub mod metrics;
pub mod model;
pub mod perseveration;
pub mod reports;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
