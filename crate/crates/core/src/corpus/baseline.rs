//! Climatology baseline: a random training discussion from the same station
//! and calendar month.
//!
//! The draw for a test sample is seeded by `sha256(seed_le_bytes ||
//! sample_id)` feeding ChaCha8, and candidates are ordered by sample id, so
//! the pick does not depend on pool order or on other test samples.

use std::collections::HashMap;

use chrono::Datelike;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{CorpusError, Prediction};
use crate::ingest::Sample;

type Stratum = (String, u32);

fn stratum_of(s: &Sample) -> Stratum {
    (s.station.to_ascii_uppercase(), s.local_issue_time().month())
}

/// Training pool indexed by (station, month).
#[derive(Debug, Clone)]
pub struct Climatology<'a> {
    strata: HashMap<Stratum, Vec<&'a Sample>>,
}

impl<'a> Climatology<'a> {
    pub fn new(pool: &'a [Sample]) -> Self {
        let mut strata: HashMap<Stratum, Vec<&Sample>> = HashMap::new();
        for s in pool {
            strata.entry(stratum_of(s)).or_default().push(s);
        }
        for v in strata.values_mut() {
            v.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        }
        Self { strata }
    }

    pub fn predict(&self, test: &Sample, seed: u64) -> Result<&'a str, CorpusError> {
        let key = stratum_of(test);
        let candidates = self.strata.get(&key).filter(|v| !v.is_empty()).ok_or_else(|| {
            CorpusError::EmptyStratum {
                station: key.0.clone(),
                month: key.1,
            }
        })?;
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(test.sample_id.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        Ok(&candidates[rng.random_range(0..candidates.len())].reference_text)
    }

    /// Predictions for every test sample, labelled `model`.
    pub fn predictions(&self, tests: &[Sample], seed: u64, model: &str) -> Result<Vec<Prediction>, CorpusError> {
        tests
            .iter()
            .map(|t| {
                Ok(Prediction {
                    sample_id: t.sample_id.clone(),
                    model: model.to_string(),
                    predicted_text: self.predict(t, seed)?.to_string(),
                })
            })
            .collect()
    }
}

pub fn climatology_baseline(test: &Sample, pool: &[Sample], seed: u64) -> Result<String, CorpusError> {
    Climatology::new(pool).predict(test, seed).map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn s(id: &str, station: &str, month: u32, text: &str) -> Sample {
        Sample {
            sample_id: id.into(),
            station: station.into(),
            issue_time: Utc.with_ymd_and_hms(2020, month, 10, 12, 0, 0).unwrap(),
            utc_offset_minutes: Some(-420),
            forecast_id: None,
            reference_text: text.into(),
            predicted_text: None,
        }
    }

    #[test]
    fn single_candidate() {
        let pool = vec![s("a", "BOU", 1, "only"), s("b", "BOU", 2, "feb")];
        for seed in 0..20 {
            assert_eq!(climatology_baseline(&s("t", "BOU", 1, ""), &pool, seed).unwrap(), "only");
        }
    }

    #[test]
    fn stratum_is_respected_and_deterministic() {
        let mut pool: Vec<Sample> = (0..30)
            .map(|i| s(&format!("j{i}"), "BOU", 1, &format!("jan {i}")))
            .collect();
        pool.extend((0..30).map(|i| s(&format!("x{i}"), "TWC", 1, "tucson")));
        pool.extend((0..30).map(|i| s(&format!("f{i}"), "BOU", 2, "february")));
        let clim = Climatology::new(&pool);
        let test = s("t1", "bou", 1, "");
        let first = clim.predict(&test, 7).unwrap();
        assert!(first.starts_with("jan "));
        assert_eq!(clim.predict(&test, 7).unwrap(), first);

        let mut reversed = pool.clone();
        reversed.reverse();
        assert_eq!(climatology_baseline(&test, &reversed, 7).unwrap(), first);

        let picks: std::collections::HashSet<_> =
            (0..50).map(|seed| clim.predict(&test, seed).unwrap()).collect();
        assert!(picks.len() > 5);
    }

    #[test]
    fn empty_stratum() {
        let pool = vec![s("a", "BOU", 1, "x")];
        let err = climatology_baseline(&s("t", "BOU", 7, ""), &pool, 1).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyStratum { month: 7, .. }));
        assert!(err.to_string().contains("BOU"));
    }
}
