//! Corpus-level evaluation: dataset splits, the climatology baseline,
//! summary statistics, report emission and a synthetic corpus generator.

pub mod baseline;
pub mod evaluate;
pub mod report;
pub mod synth;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Sample;
use crate::scoring::ScoringError;

pub use baseline::{climatology_baseline, Climatology};
pub use evaluate::{evaluate_corpus, EvalConfig, Evaluation, ModeSelection, ScoreRecord};
pub use report::{MetricSummary, Report};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no statistics for an empty input")]
    EmptyInput,
    #[error("no training samples for station {station} in month {month}")]
    EmptyStratum { station: String, month: u32 },
    #[error("prediction {position} refers to unknown sample id `{sample_id}`")]
    UnknownSampleId { sample_id: String, position: usize },
    #[error("duplicate sample id `{0}`")]
    DuplicateSampleId(String),
    #[error("more than one `{model}` prediction for sample `{sample_id}`")]
    DuplicatePrediction { model: String, sample_id: String },
    #[error("sample `{sample_id}` has unknown station `{station}`")]
    UnknownStation { sample_id: String, station: String },
    #[error("sample `{0}` has no forecast id, required for aggregate scoring")]
    MissingForecastId(String),
    #[error("sample `{sample_id}`: {source}")]
    Scoring {
        sample_id: String,
        source: ScoringError,
    },
}

/// One generated discussion for a sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    #[serde(default = "default_model")]
    pub model: String,
    pub predicted_text: String,
}

pub fn default_model() -> String {
    "model".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Training 2016-2022, validation 2023, test 2024-2025, by UTC issue year.
pub fn split_of(issue_time: DateTime<Utc>) -> Option<Split> {
    match issue_time.year() {
        2016..=2022 => Some(Split::Train),
        2023 => Some(Split::Validation),
        2024..=2025 => Some(Split::Test),
        _ => None,
    }
}

pub fn select_split(samples: &[Sample], split: Split) -> Vec<Sample> {
    samples
        .iter()
        .filter(|s| split_of(s.issue_time) == Some(split))
        .cloned()
        .collect()
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; absent when `n < 2`.
    pub sem: Option<f64>,
    pub n: usize,
}

/// Summation runs in input order, so equal inputs give bit-equal output.
pub fn aggregate_stats(values: &[f64]) -> Result<Stats, CorpusError> {
    let n = values.len();
    if n == 0 {
        return Err(CorpusError::EmptyInput);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sem = (n >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    });
    Ok(Stats { mean, sem, n })
}
