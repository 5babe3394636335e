//! Corpus evaluation: SPACE-local per sample, SPACE-aggregate per forecast,
//! and ROUGE-L / token F1 per sample, reduced into a [`Report`].
//!
//! Work fans out over `jobs` scoped threads; results are written back by
//! input position and every mean is summed in a fixed order, so the output
//! does not depend on the worker count.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::report::{MetricSummary, Report, ReportMetadata};
use super::{aggregate_stats, CorpusError, Prediction};
use crate::extraction::PhenomenonConfig;
use crate::hierarchy::LocationHierarchy;
use crate::ingest::{Sample, StationRegistry};
use crate::scoring::{space_aggregate, space_local, ForecastTexts, MatchTally, Mode, SpaceScore};
use crate::textmetrics::{rouge_l, token_f1, tokenize};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSelection {
    pub local: bool,
    pub aggregate: bool,
}

impl ModeSelection {
    pub const LOCAL: Self = Self { local: true, aggregate: false };
    pub const AGGREGATE: Self = Self { local: false, aggregate: true };
    pub const BOTH: Self = Self { local: true, aggregate: true };
}

impl fmt::Display for ModeSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match (self.local, self.aggregate) {
            (true, true) => "both",
            (false, true) => "aggregate",
            _ => "local",
        })
    }
}

impl FromStr for ModeSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Self::LOCAL),
            "aggregate" => Ok(Self::AGGREGATE),
            "both" => Ok(Self::BOTH),
            other => Err(format!("unknown mode `{other}` (expected local, aggregate or both)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig<'a> {
    pub phenomenon: &'a PhenomenonConfig,
    pub hierarchy: &'a LocationHierarchy,
    pub stations: &'a StationRegistry,
    pub modes: ModeSelection,
    pub jobs: usize,
    /// Recorded in the report metadata.
    pub seed: Option<u64>,
}

/// One line of the per-sample (or per-forecast) score stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub model: String,
    /// Absent on aggregate records.
    pub sample_id: Option<String>,
    pub forecast_id: Option<String>,
    /// Office id; absent on aggregate records.
    pub station: Option<String>,
    pub phenomenon: String,
    pub mode: Mode,
    pub s_m: f64,
    pub r_c: f64,
    pub s: f64,
    pub defined: bool,
    #[serde(flatten)]
    pub tally: MatchTally,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_f1: Option<f64>,
    /// Number of pooled discussions on aggregate records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discussions: Option<usize>,
}

impl ScoreRecord {
    fn from_score(model: &str, score: SpaceScore) -> Self {
        Self {
            model: model.to_string(),
            sample_id: None,
            forecast_id: None,
            station: None,
            phenomenon: score.phenomenon,
            mode: score.mode,
            s_m: score.match_score,
            r_c: score.coverage_ratio,
            s: score.score,
            defined: score.defined,
            tally: score.tally,
            rouge_l: None,
            token_f1: None,
            discussions: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub records: Vec<ScoreRecord>,
    pub report: Report,
}

struct Pair<'a> {
    sample: &'a Sample,
    prediction: &'a Prediction,
    node: &'a str,
}

/// Applies `f` to every item on up to `jobs` threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.max(1);
    if jobs == 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let f = &f;
    thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    })
}

/// SHA-256 over the canonical JSONL of `samples` followed by `predictions`.
pub fn corpus_hash(samples: &[Sample], predictions: &[Prediction]) -> String {
    let mut h = Sha256::new();
    for s in samples {
        h.update(serde_json::to_vec(s).expect("sample serializes"));
        h.update(b"\n");
    }
    for p in predictions {
        h.update(serde_json::to_vec(p).expect("prediction serializes"));
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn pair_up<'a>(
    samples: &'a [Sample],
    predictions: &'a [Prediction],
    cfg: &EvalConfig<'a>,
) -> Result<Vec<Pair<'a>>, CorpusError> {
    let mut by_id: HashMap<&str, &Sample> = HashMap::with_capacity(samples.len());
    for s in samples {
        if by_id.insert(&s.sample_id, s).is_some() {
            return Err(CorpusError::DuplicateSampleId(s.sample_id.clone()));
        }
    }
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut pairs = Vec::with_capacity(predictions.len());
    for (i, p) in predictions.iter().enumerate() {
        let sample = *by_id.get(p.sample_id.as_str()).ok_or_else(|| CorpusError::UnknownSampleId {
            sample_id: p.sample_id.clone(),
            position: i + 1,
        })?;
        if !seen.insert((&p.model, &p.sample_id)) {
            return Err(CorpusError::DuplicatePrediction {
                model: p.model.clone(),
                sample_id: p.sample_id.clone(),
            });
        }
        let node = cfg
            .stations
            .home_node(&sample.station, cfg.hierarchy)
            .ok_or_else(|| CorpusError::UnknownStation {
                sample_id: sample.sample_id.clone(),
                station: sample.station.clone(),
            })?;
        if cfg.modes.aggregate && sample.forecast_id.is_none() {
            return Err(CorpusError::MissingForecastId(sample.sample_id.clone()));
        }
        pairs.push(Pair { sample, prediction: p, node });
    }
    Ok(pairs)
}

fn local_record(pair: &Pair<'_>, cfg: &EvalConfig<'_>) -> Result<ScoreRecord, CorpusError> {
    let (pred, reference) = (&pair.prediction.predicted_text, &pair.sample.reference_text);
    let score = space_local(pred, reference, pair.node, cfg.phenomenon, cfg.hierarchy).map_err(|source| {
        CorpusError::Scoring {
            sample_id: pair.sample.sample_id.clone(),
            source,
        }
    })?;
    let (pt, rt) = (tokenize(pred), tokenize(reference));
    let mut r = ScoreRecord::from_score(&pair.prediction.model, score);
    r.sample_id = Some(pair.sample.sample_id.clone());
    r.forecast_id = pair.sample.forecast_id.clone();
    r.station = Some(pair.sample.station.clone());
    r.rouge_l = Some(rouge_l(&pt, &rt));
    r.token_f1 = Some(token_f1(&pt, &rt));
    Ok(r)
}

fn aggregate_record(
    model: &str,
    forecast_id: &str,
    members: &[&Pair<'_>],
    cfg: &EvalConfig<'_>,
) -> Result<ScoreRecord, CorpusError> {
    let texts = |predicted: bool| ForecastTexts {
        forecast_id: forecast_id.to_string(),
        discussions: members
            .iter()
            .map(|p| {
                let text = if predicted { &p.prediction.predicted_text } else { &p.sample.reference_text };
                (p.node.to_string(), text.clone())
            })
            .collect(),
    };
    let pred = texts(true);
    let refs = texts(false);
    let score = space_aggregate(&pred, &refs, cfg.phenomenon, cfg.hierarchy).map_err(|source| {
        CorpusError::Scoring {
            sample_id: members[0].sample.sample_id.clone(),
            source,
        }
    })?;
    let mut r = ScoreRecord::from_score(model, score);
    r.forecast_id = Some(forecast_id.to_string());
    r.discussions = Some(members.len());
    Ok(r)
}

fn summarize(values: &[f64]) -> Option<MetricSummary> {
    aggregate_stats(values).ok().map(MetricSummary::from)
}

pub fn evaluate_corpus(
    samples: &[Sample],
    predictions: &[Prediction],
    cfg: &EvalConfig<'_>,
) -> Result<Evaluation, CorpusError> {
    let pairs = pair_up(samples, predictions, cfg)?;

    let local: Vec<ScoreRecord> = parallel_map(&pairs, cfg.jobs, |p| local_record(p, cfg))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let mut forecasts: BTreeMap<(&str, &str), Vec<&Pair<'_>>> = BTreeMap::new();
    if cfg.modes.aggregate {
        for p in &pairs {
            let fid = p.sample.forecast_id.as_deref().expect("checked in pair_up");
            forecasts.entry((&p.prediction.model, fid)).or_default().push(p);
        }
    }
    let groups: Vec<_> = forecasts.into_iter().collect();
    let aggregate: Vec<ScoreRecord> = parallel_map(&groups, cfg.jobs, |((model, fid), members)| {
        aggregate_record(model, fid, members, cfg)
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let mut rows: BTreeMap<String, BTreeMap<String, MetricSummary>> = BTreeMap::new();
    let mut undefined: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let models: Vec<&str> = {
        let mut m: Vec<&str> = predictions.iter().map(|p| p.model.as_str()).collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    for model in models {
        let mut metrics = BTreeMap::new();
        let mut undef = BTreeMap::new();
        let mine: Vec<&ScoreRecord> = local.iter().filter(|r| r.model == model).collect();
        let text_metric = |f: fn(&ScoreRecord) -> Option<f64>| -> Vec<f64> { mine.iter().filter_map(|r| f(r)).collect() };
        if let Some(s) = summarize(&text_metric(|r| r.rouge_l)) {
            metrics.insert("rouge_l".to_string(), s);
        }
        if let Some(s) = summarize(&text_metric(|r| r.token_f1)) {
            metrics.insert("token_f1".to_string(), s);
        }
        let mut space = |prefix: &str, records: Vec<&ScoreRecord>, mode: &str| {
            let defined: Vec<&ScoreRecord> = records.iter().copied().filter(|r| r.defined).collect();
            undef.insert(mode.to_string(), records.len() - defined.len());
            for (name, get) in [
                ("s", (|r: &ScoreRecord| r.s) as fn(&ScoreRecord) -> f64),
                ("s_m", |r| r.s_m),
                ("r_c", |r| r.r_c),
            ] {
                let values: Vec<f64> = defined.iter().map(|r| get(r)).collect();
                if let Some(s) = summarize(&values) {
                    metrics.insert(format!("{prefix}.{name}"), s);
                }
            }
        };
        if cfg.modes.local {
            space("space_local", mine.clone(), "local");
        }
        if cfg.modes.aggregate {
            space(
                "space_aggregate",
                aggregate.iter().filter(|r| r.model == model).collect(),
                "aggregate",
            );
        }
        rows.insert(model.to_string(), metrics);
        undefined.insert(model.to_string(), undef);
    }

    let report = Report {
        metadata: ReportMetadata {
            tool: "space".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            schema_version: SCHEMA_VERSION,
            phenomenon: cfg.phenomenon.name.clone(),
            mode: cfg.modes.to_string(),
            corpus_sha256: corpus_hash(samples, predictions),
            seed: cfg.seed,
            samples: samples.len(),
            predictions: predictions.len(),
            f1_variant: "multiset".into(),
            sem_basis: BTreeMap::from([
                ("local".to_string(), "samples".to_string()),
                ("aggregate".to_string(), "forecasts".to_string()),
            ]),
        },
        rows,
        undefined,
    };

    let mut records = Vec::with_capacity(local.len() + aggregate.len());
    if cfg.modes.local {
        records.extend(local);
    }
    records.extend(aggregate);
    Ok(Evaluation { records, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use chrono::{TimeZone, Utc};

    fn sample(id: &str, station: &str, forecast: &str, text: &str) -> Sample {
        Sample {
            sample_id: id.into(),
            station: station.into(),
            issue_time: Utc.with_ymd_and_hms(2024, 3, 1, 12, 0, 0).unwrap(),
            utc_offset_minutes: None,
            forecast_id: Some(forecast.into()),
            reference_text: text.into(),
            predicted_text: None,
        }
    }

    fn pred(id: &str, text: &str) -> Prediction {
        Prediction {
            sample_id: id.into(),
            model: "m".into(),
            predicted_text: text.into(),
        }
    }

    fn cfg(jobs: usize) -> EvalConfig<'static> {
        EvalConfig {
            phenomenon: builtin::pressure(),
            hierarchy: builtin::hierarchy(),
            stations: builtin::stations(),
            modes: ModeSelection::BOTH,
            jobs,
            seed: None,
        }
    }

    fn corpus() -> (Vec<Sample>, Vec<Prediction>) {
        let samples = vec![
            sample("a", "BOU", "2024030112", "A ridge builds over Colorado."),
            sample("b", "TWC", "2024030112", "High pressure over Arizona."),
            sample("c", "CAE", "2024030112", "Clear and quiet."),
        ];
        let preds = vec![
            pred("a", "A ridge builds over Colorado."),
            pred("b", "A trough over Arizona."),
            pred("c", "Nothing to note."),
        ];
        (samples, preds)
    }

    #[test]
    fn scores_and_report() {
        let (samples, preds) = corpus();
        let eval = evaluate_corpus(&samples, &preds, &cfg(1)).unwrap();
        assert_eq!(eval.records.len(), 4);
        assert_eq!(eval.records[0].s, 1.0);
        assert_eq!(eval.records[1].s, 0.0);
        assert!(!eval.records[2].defined);
        let row = &eval.report.rows["m"];
        assert_eq!(row["space_local.s"].n, 2);
        assert_eq!(row["space_local.s"].mean, 0.5);
        assert_eq!(row["rouge_l"].n, 3);
        assert_eq!(eval.report.undefined["m"]["local"], 1);
        assert_eq!(eval.records[3].discussions, Some(3));
        assert_eq!(eval.records[3].mode, Mode::Aggregate);
    }

    #[test]
    fn jobs_do_not_change_output() {
        let (samples, preds) = corpus();
        let one = evaluate_corpus(&samples, &preds, &cfg(1)).unwrap();
        let many = evaluate_corpus(&samples, &preds, &cfg(8)).unwrap();
        assert_eq!(one.records, many.records);
        assert_eq!(one.report.to_json(false), many.report.to_json(false));
    }

    #[test]
    fn unknown_prediction_id() {
        let (samples, mut preds) = corpus();
        preds.push(pred("zzz", "x"));
        let err = evaluate_corpus(&samples, &preds, &cfg(1)).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownSampleId { position: 4, .. }));
        assert!(err.to_string().contains("zzz"));
    }

    #[test]
    fn record_json_shape() {
        let (samples, preds) = corpus();
        let eval = evaluate_corpus(&samples, &preds, &cfg(1)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&eval.records[0]).unwrap();
        for key in [
            "sample_id", "forecast_id", "station", "phenomenon", "mode", "s_m", "r_c", "s", "defined",
            "n_L", "n_H", "m_pred_L", "m_pred_H", "m_ref_L", "m_ref_H",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: ScoreRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, eval.records[0]);
    }
}
