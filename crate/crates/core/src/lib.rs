//! Case suffix and remaining-time prediction for business process event logs.
//!
//! A [`predictor::Predictor`] supplies next-activity distributions, a
//! [`sampling::SamplerPolicy`] picks each next activity, and
//! [`generation::generate_suffix`] rolls a case forward until end-of-case.
//! [`metrics`] scores the result and [`harness`] runs the full
//! split / tune / compare protocol.

pub mod error;
pub mod eventlog;
pub mod generation;
pub mod harness;
pub mod metrics;
pub mod predictor;
pub mod sampling;

pub use error::{Error, Result};
pub use eventlog::{
    enumerate_log_pairs, enumerate_prefix_pairs, parse_csv_log, temporal_split, ColumnMapping, Event, EventLog,
    LogBuilder, PrefixSuffixPair, TimeFormat, Timestamp, Trace, Vocabulary,
};
pub use generation::{generate_suffix, generate_suffix_traced, remaining_time, GeneratedSuffix, GenerationLimits};
pub use predictor::{train_ngram, NextStepDistribution, NgramModel, Predictor};
pub use sampling::{DaemonCounts, DaemonMode, RandomStream, SamplerPolicy};
