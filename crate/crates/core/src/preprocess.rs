//! Discussion filtering and dataset quality control.
//!
//! [`filter_afd`] reduces a raw discussion to the sentences that talk about
//! synoptic pressure and temperature features inside the forecast horizon,
//! or rejects the sample outright. [`quality_control`] screens whole samples.

use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Datelike, FixedOffset, Weekday};
use serde::Serialize;
use thiserror::Error;

use crate::extraction::segment_sentences;
use crate::ingest::cycle::ForecastCycle;
use crate::ingest::stations::StationRegistry;
use crate::ingest::Sample;
use crate::phrase::PhraseMatcher;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RulesError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("rule list `{0}` is empty")]
    EmptyList(&'static str),
    #[error("min_words ({min}) must be below max_words ({max})")]
    WordBounds { min: usize, max: usize },
}

#[derive(Debug, Clone)]
pub struct FilterRules {
    pub include_keywords: Vec<String>,
    pub exclude_model_keywords: Vec<String>,
    pub exclude_synoptic_keywords: Vec<String>,
    pub lead_time_phrases: Vec<String>,
    pub min_words: usize,
    pub max_words: usize,
    pub horizon_days: u32,
    include: PhraseMatcher<()>,
    exclude: PhraseMatcher<()>,
    lead_time: PhraseMatcher<usize>,
    weekdays: PhraseMatcher<Weekday>,
}

fn matcher<T: Clone>(phrases: &[String], value: impl Fn(usize) -> T) -> PhraseMatcher<T> {
    let mut m = PhraseMatcher::new(true);
    for (i, p) in phrases.iter().enumerate() {
        let _ = m.insert(p, value(i));
    }
    m
}

impl FilterRules {
    pub fn new(
        include_keywords: Vec<String>,
        exclude_model_keywords: Vec<String>,
        exclude_synoptic_keywords: Vec<String>,
        lead_time_phrases: Vec<String>,
        min_words: usize,
        max_words: usize,
        horizon_days: u32,
    ) -> Result<Self, RulesError> {
        for (name, list) in [
            ("include", &include_keywords),
            ("exclude_model", &exclude_model_keywords),
            ("exclude_synoptic", &exclude_synoptic_keywords),
            ("lead_time", &lead_time_phrases),
        ] {
            if list.is_empty() {
                return Err(RulesError::EmptyList(name));
            }
        }
        if min_words >= max_words {
            return Err(RulesError::WordBounds { min: min_words, max: max_words });
        }
        let excluded: Vec<String> = exclude_model_keywords
            .iter()
            .chain(&exclude_synoptic_keywords)
            .cloned()
            .collect();
        let mut weekdays = PhraseMatcher::new(true);
        for day in [
            Weekday::Mon,
            Weekday::Tue,
            Weekday::Wed,
            Weekday::Thu,
            Weekday::Fri,
            Weekday::Sat,
            Weekday::Sun,
        ] {
            let _ = weekdays.insert(weekday_name(day), day);
        }
        Ok(Self {
            include: matcher(&include_keywords, |_| ()),
            exclude: matcher(&excluded, |_| ()),
            lead_time: matcher(&lead_time_phrases, |i| i),
            weekdays,
            include_keywords,
            exclude_model_keywords,
            exclude_synoptic_keywords,
            lead_time_phrases,
            min_words,
            max_words,
            horizon_days,
        })
    }

    /// Parses `kind|value` lines; see the bundled `filter_rules.txt`.
    pub fn parse(text: &str) -> Result<Self, RulesError> {
        let (mut inc, mut model, mut syn, mut lead) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let (mut min_words, mut max_words, mut horizon) = (30, 200, 2);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| RulesError::Parse { line: n + 1, message };
            let (kind, value) = line
                .split_once('|')
                .ok_or_else(|| err("expected `kind|value`".into()))?;
            let value = value.trim();
            if value.is_empty() {
                return Err(err("empty value".into()));
            }
            let number = || value.parse::<usize>().map_err(|e| err(format!("`{value}`: {e}")));
            match kind.trim() {
                "include" => inc.push(value.to_string()),
                "exclude_model" => model.push(value.to_string()),
                "exclude_synoptic" => syn.push(value.to_string()),
                "lead_time" => lead.push(value.to_string()),
                "min_words" => min_words = number()?,
                "max_words" => max_words = number()?,
                "horizon_days" => horizon = number()? as u32,
                other => return Err(err(format!("unknown rule kind `{other}`"))),
            }
        }
        Self::new(inc, model, syn, lead, min_words, max_words, horizon)
    }

    pub fn is_excluded(&self, text: &str) -> bool {
        self.exclude.contains_any(text)
    }
}

fn weekday_name(day: Weekday) -> &'static str {
    match day {
        Weekday::Mon => "monday",
        Weekday::Tue => "tuesday",
        Weekday::Wed => "wednesday",
        Weekday::Thu => "thursday",
        Weekday::Fri => "friday",
        Weekday::Sat => "saturday",
        Weekday::Sun => "sunday",
    }
}

/// Days from `issue` until the next `day`, in 1..=7 (same weekday is 7).
pub fn weekday_offset(issue: Weekday, day: Weekday) -> u32 {
    let d = (day.num_days_from_monday() + 7 - issue.num_days_from_monday()) % 7;
    if d == 0 {
        7
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum FilterRejection {
    LeadTime { phrase: String },
    TooShort { words: usize },
    TooLong { words: usize },
}

impl FilterRejection {
    pub fn code(&self) -> &'static str {
        match self {
            FilterRejection::LeadTime { .. } => "lead-time",
            FilterRejection::TooShort { .. } => "too-short",
            FilterRejection::TooLong { .. } => "too-long",
        }
    }
}

/// Per-stage sentence counts for one run of the filter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FilterTrace {
    pub sentences: usize,
    pub dropped_no_keyword: usize,
    pub dropped_excluded: usize,
    pub dropped_truncated: usize,
    pub kept: usize,
    pub words: usize,
    pub rejection: Option<FilterRejection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    pub text: Option<String>,
    pub trace: FilterTrace,
}

/// Filters one raw discussion; `None` when the sample is rejected.
///
/// Weekday truncation is relative to the calendar day of `issue_time` in its
/// own offset, so pass the local issuance time when it is known.
pub fn filter_afd(
    raw_text: &str,
    issue_time: DateTime<FixedOffset>,
    rules: &FilterRules,
) -> Option<String> {
    filter_afd_traced(raw_text, issue_time, rules).text
}

pub fn filter_afd_traced(
    raw_text: &str,
    issue_time: DateTime<FixedOffset>,
    rules: &FilterRules,
) -> FilterOutcome {
    let issue_day = issue_time.weekday();
    let sentences = segment_sentences(raw_text);
    let mut trace = FilterTrace {
        sentences: sentences.len(),
        ..Default::default()
    };

    let mut kept: Vec<&str> = Vec::new();
    for s in &sentences {
        if !rules.include.contains_any(s.text) {
            trace.dropped_no_keyword += 1;
        } else if rules.exclude.contains_any(s.text) {
            trace.dropped_excluded += 1;
        } else {
            kept.push(s.text);
        }
    }

    let cut = kept.iter().position(|s| {
        rules
            .weekdays
            .find_all(s)
            .iter()
            .any(|m| weekday_offset(issue_day, *m.value) > rules.horizon_days)
    });
    if let Some(cut) = cut {
        trace.dropped_truncated = kept.len() - cut;
        kept.truncate(cut);
    }
    trace.kept = kept.len();

    let text = kept
        .iter()
        .map(|s| {
            let mut sentence = s.split_whitespace().collect::<Vec<_>>().join(" ");
            if !sentence.ends_with(['.', '!', '?']) {
                sentence.push('.');
            }
            sentence
        })
        .collect::<Vec<_>>()
        .join(" ");
    trace.words = text.split_whitespace().count();

    trace.rejection = if let Some(m) = rules.lead_time.first_match(&text) {
        Some(FilterRejection::LeadTime {
            phrase: rules.lead_time_phrases[*m.value].clone(),
        })
    } else if trace.words < rules.min_words {
        Some(FilterRejection::TooShort { words: trace.words })
    } else if trace.words > rules.max_words {
        Some(FilterRejection::TooLong { words: trace.words })
    } else {
        None
    };

    FilterOutcome {
        text: trace.rejection.is_none().then_some(text),
        trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QcReason {
    Duplicate,
    ControlCharacters,
    MissingField,
    PairingWindow,
    UnknownStation,
}

impl QcReason {
    pub fn code(self) -> &'static str {
        match self {
            QcReason::Duplicate => "duplicate",
            QcReason::ControlCharacters => "control-characters",
            QcReason::MissingField => "missing-field",
            QcReason::PairingWindow => "pairing-window",
            QcReason::UnknownStation => "unknown-station",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct QcOutcome {
    pub kept: Vec<Sample>,
    pub rejected: Vec<(Sample, QcReason)>,
}

impl QcOutcome {
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for (_, reason) in &self.rejected {
            *out.entry(reason.code()).or_default() += 1;
        }
        out
    }
}

/// Largest allowed gap between issuance and the paired forecast cycle.
pub const PAIRING_WINDOW_HOURS: i64 = 12;

fn has_control_chars(text: &str) -> bool {
    text.chars()
        .any(|c| c.is_control() && !matches!(c, '\n' | '\r' | '\t'))
}

/// Screens samples; the first failing check decides the reason. Duplicates
/// are exact reference-text repeats, and the first occurrence is kept.
pub fn quality_control(samples: Vec<Sample>, registry: Option<&StationRegistry>) -> QcOutcome {
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = QcOutcome::default();
    for sample in samples {
        let reason = qc_check(&sample, registry, &seen);
        match reason {
            Some(r) => out.rejected.push((sample, r)),
            None => {
                seen.insert(sample.reference_text.clone());
                out.kept.push(sample);
            }
        }
    }
    out
}

fn qc_check(
    sample: &Sample,
    registry: Option<&StationRegistry>,
    seen: &HashSet<String>,
) -> Option<QcReason> {
    if sample.sample_id.trim().is_empty()
        || sample.station.trim().is_empty()
        || sample.reference_text.trim().is_empty()
    {
        return Some(QcReason::MissingField);
    }
    let Some(forecast_id) = sample.forecast_id.as_deref() else {
        return Some(QcReason::MissingField);
    };
    if has_control_chars(&sample.reference_text) {
        return Some(QcReason::ControlCharacters);
    }
    if let Some(reg) = registry {
        if reg.get(&sample.station).is_none() {
            return Some(QcReason::UnknownStation);
        }
    }
    match forecast_id.parse::<ForecastCycle>() {
        Ok(cycle) => {
            let gap = (sample.issue_time - cycle.init_time()).num_seconds().abs();
            if gap > PAIRING_WINDOW_HOURS * 3600 {
                return Some(QcReason::PairingWindow);
            }
        }
        Err(_) => return Some(QcReason::MissingField),
    }
    if seen.contains(&sample.reference_text) {
        return Some(QcReason::Duplicate);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use chrono::{TimeZone, Utc};

    fn monday() -> DateTime<FixedOffset> {
        // 2025-01-06 was a Monday.
        FixedOffset::west_opt(7 * 3600)
            .unwrap()
            .with_ymd_and_hms(2025, 1, 6, 15, 30, 0)
            .unwrap()
    }

    fn filler(n: usize) -> String {
        vec!["word"; n].join(" ")
    }

    #[test]
    fn weekday_offsets() {
        assert_eq!(weekday_offset(Weekday::Mon, Weekday::Tue), 1);
        assert_eq!(weekday_offset(Weekday::Mon, Weekday::Thu), 3);
        assert_eq!(weekday_offset(Weekday::Mon, Weekday::Mon), 7);
        assert_eq!(weekday_offset(Weekday::Sat, Weekday::Mon), 2);
    }

    #[test]
    fn model_sentences_removed() {
        let rules = builtin::filter_rules();
        let raw = format!(
            "ECMWF shows a deeper trough. A ridge builds over the Rockies {}.",
            filler(30)
        );
        let out = filter_afd_traced(&raw, monday(), rules);
        assert_eq!(out.trace.dropped_excluded, 1);
        let text = out.text.unwrap();
        assert!(!text.contains("ECMWF"));
        assert!(text.starts_with("A ridge builds"));
    }

    #[test]
    fn truncation_after_horizon_weekday() {
        let rules = builtin::filter_rules();
        let raw = format!(
            "A ridge holds through Tuesday {f}. A trough arrives Thursday. \
             High pressure returns later.",
            f = filler(30)
        );
        let out = filter_afd_traced(&raw, monday(), rules);
        assert_eq!(out.trace.dropped_truncated, 2);
        let text = out.text.unwrap();
        assert!(text.contains("Tuesday"));
        assert!(!text.contains("Thursday"));
        assert!(!text.contains("returns later"));
    }

    #[test]
    fn short_samples_rejected() {
        let rules = builtin::filter_rules();
        let out = filter_afd_traced(
            "A ridge builds over the region with dry and mild conditions expected today.",
            monday(),
            rules,
        );
        assert_eq!(out.text, None);
        assert_eq!(out.trace.rejection, Some(FilterRejection::TooShort { words: 13 }));
    }

    #[test]
    fn long_samples_rejected() {
        let rules = builtin::filter_rules();
        let raw = format!("A trough lingers {}.", filler(250));
        let out = filter_afd_traced(&raw, monday(), rules);
        assert!(matches!(out.trace.rejection, Some(FilterRejection::TooLong { .. })));
    }

    #[test]
    fn lead_time_phrase_rejects_sample() {
        let rules = builtin::filter_rules();
        let raw = format!("In the long term a trough digs into the West {}.", filler(30));
        let out = filter_afd_traced(&raw, monday(), rules);
        assert_eq!(
            out.trace.rejection,
            Some(FilterRejection::LeadTime { phrase: "long term".into() })
        );
    }

    #[test]
    fn rules_validation() {
        assert!(matches!(
            FilterRules::parse("include|x\nexclude_model|y\nexclude_synoptic|z\nlead_time|w\nmin_words|300"),
            Err(RulesError::WordBounds { .. })
        ));
        assert!(matches!(
            FilterRules::parse("include|x\n"),
            Err(RulesError::EmptyList("exclude_model"))
        ));
        assert!(matches!(
            FilterRules::parse("bogus|x\n"),
            Err(RulesError::Parse { line: 1, .. })
        ));
    }

    fn sample(id: &str, text: &str, issue_hour: u32, forecast: &str) -> Sample {
        Sample {
            sample_id: id.into(),
            station: "BOU".into(),
            issue_time: Utc.with_ymd_and_hms(2025, 1, 7, issue_hour, 0, 0).unwrap(),
            utc_offset_minutes: None,
            forecast_id: Some(forecast.into()),
            reference_text: text.into(),
            predicted_text: None,
        }
    }

    #[test]
    fn qc_reasons() {
        let samples = vec![
            sample("a", "ridge", 13, "2025010712"),
            sample("b", "ridge", 13, "2025010712"),
            sample("c", "trough", 13, "2025010700"),
            sample("d", "bad\u{7}char", 13, "2025010712"),
            sample("e", "", 13, "2025010712"),
            sample("f", "fine", 12, "2025010712"),
        ];
        let out = quality_control(samples, Some(builtin::stations()));
        let kept: Vec<_> = out.kept.iter().map(|s| s.sample_id.as_str()).collect();
        assert_eq!(kept, ["a", "f"]);
        let rejected: Vec<_> = out
            .rejected
            .iter()
            .map(|(s, r)| (s.sample_id.as_str(), r.code()))
            .collect();
        assert_eq!(
            rejected,
            [
                ("b", "duplicate"),
                ("c", "pairing-window"),
                ("d", "control-characters"),
                ("e", "missing-field")
            ]
        );
        assert_eq!(out.counts()["duplicate"], 1);
    }

    #[test]
    fn qc_unknown_station() {
        let mut s = sample("a", "ridge", 12, "2025010712");
        s.station = "ZZZ".into();
        let out = quality_control(vec![s], Some(builtin::stations()));
        assert_eq!(out.rejected[0].1, QcReason::UnknownStation);
    }
}
