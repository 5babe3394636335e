//! Archive ingestion: station registry, issuance timestamps, forecast-cycle
//! pairing and the JSON archive client.

pub mod client;
pub mod cycle;
pub mod stations;
pub mod timestamp;

use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

pub use client::{ArchiveClient, FixtureTransport, IngestError, RawProduct, RecordingTransport, Transport};
pub use cycle::{pair_to_cycle, ForecastCycle};
pub use stations::{Station, StationRegistry};
pub use timestamp::{parse_issue_header, parse_issue_time, IssueHeader, TimestampError};

/// One discussion, optionally paired with a generated counterpart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    /// Office identifier, e.g. `BOU`.
    pub station: String,
    pub issue_time: DateTime<Utc>,
    /// Offset of the issuing office's local clock at issuance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utc_offset_minutes: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast_id: Option<String>,
    pub reference_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_text: Option<String>,
}

impl Sample {
    /// Issue time in the office's local offset, or UTC when unknown.
    pub fn local_issue_time(&self) -> DateTime<FixedOffset> {
        let offset = self
            .utc_offset_minutes
            .and_then(|m| FixedOffset::east_opt(m * 60))
            .unwrap_or_else(|| FixedOffset::east_opt(0).expect("zero offset"));
        self.issue_time.with_timezone(&offset)
    }
}

/// Builds a sample from a fetched product, or `None` (logged) when the
/// product carries no recognizable issuance header.
pub fn sample_from_product(office: &str, product: &RawProduct) -> Option<Sample> {
    match parse_issue_header(&product.text) {
        Ok(header) => Some(Sample {
            sample_id: product.product_id.clone(),
            station: office.to_string(),
            issue_time: header.utc,
            utc_offset_minutes: Some(header.offset.local_minus_utc() / 60),
            forecast_id: pair_to_cycle(header.utc).map(|c| c.to_string()),
            reference_text: product.text.clone(),
            predicted_text: None,
        }),
        Err(e) => {
            log::warn!("{}: {e}; product skipped", product.product_id);
            None
        }
    }
}
