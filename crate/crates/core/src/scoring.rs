//! Groups phenomenon objects, matches them across predicted and reference
//! texts, and computes the match score, coverage ratio and final score.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{
    extract_objects, ExtractionError, Phase, PhenomenonConfig, PhenomenonObject, Source,
};
use crate::hierarchy::LocationHierarchy;
use crate::union_find::DisjointSets;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoringError {
    #[error("coverage ratio is undefined when neither text contains an object")]
    Undefined,
    #[error("predicted forecast `{predicted}` does not match reference forecast `{reference}`")]
    MismatchedForecast { predicted: String, reference: String },
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Local,
    Aggregate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Local => "local",
            Mode::Aggregate => "aggregate",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Mode::Local),
            "aggregate" => Ok(Mode::Aggregate),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Same-source objects connected by chains of related locations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectGroup {
    pub source: Source,
    pub members: Vec<PhenomenonObject>,
    pub phases: BTreeSet<Phase>,
    pub location_closure: Vec<String>,
}

/// Matched and total object counts by phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchTally {
    #[serde(rename = "m_pred_L")]
    pub m_pred_l: u32,
    #[serde(rename = "m_pred_H")]
    pub m_pred_h: u32,
    #[serde(rename = "m_ref_L")]
    pub m_ref_l: u32,
    #[serde(rename = "m_ref_H")]
    pub m_ref_h: u32,
    #[serde(rename = "n_L")]
    pub n_l: u32,
    #[serde(rename = "n_H")]
    pub n_h: u32,
}

impl MatchTally {
    pub fn matched_pred(&self) -> u32 {
        self.m_pred_l + self.m_pred_h
    }

    pub fn matched_ref(&self) -> u32 {
        self.m_ref_l + self.m_ref_h
    }

    pub fn total(&self) -> u32 {
        self.n_l + self.n_h
    }

    /// The tally with predicted and reference roles exchanged.
    pub fn swapped(&self) -> MatchTally {
        MatchTally {
            m_pred_l: self.m_ref_l,
            m_pred_h: self.m_ref_h,
            m_ref_l: self.m_pred_l,
            m_ref_h: self.m_pred_h,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceScore {
    #[serde(rename = "s_m")]
    pub match_score: f64,
    #[serde(rename = "r_c")]
    pub coverage_ratio: f64,
    #[serde(rename = "s")]
    pub score: f64,
    pub mode: Mode,
    pub phenomenon: String,
    /// False when neither side produced an object.
    pub defined: bool,
    #[serde(flatten)]
    pub tally: MatchTally,
}

/// Partitions same-source objects into connected components of the
/// "some pair of their locations is related" relation.
///
/// Groups are ordered by their earliest member (sentence index, then byte
/// offset); members keep input order.
pub fn group_objects(
    objects: &[PhenomenonObject],
    hierarchy: &LocationHierarchy,
) -> Vec<ObjectGroup> {
    let locs = location_indices(objects, hierarchy);
    let mut sets = DisjointSets::new(objects.len());
    for i in 0..objects.len() {
        for j in i + 1..objects.len() {
            if any_related(&locs[i], &locs[j], hierarchy) {
                sets.union(i, j);
            }
        }
    }

    let mut groups: Vec<(Vec<usize>, (usize, usize, usize))> = sets
        .groups()
        .into_iter()
        .map(|members| {
            let key = members
                .iter()
                .map(|&i| (objects[i].sentence_index, objects[i].char_span.0, i))
                .min()
                .unwrap_or_default();
            (members, key)
        })
        .collect();
    groups.sort_by_key(|(_, key)| *key);

    groups
        .into_iter()
        .map(|(members, _)| {
            let members: Vec<PhenomenonObject> =
                members.into_iter().map(|i| objects[i].clone()).collect();
            let phases = members.iter().map(|o| o.phase).collect();
            let mut location_closure: Vec<String> = Vec::new();
            for loc in members.iter().flat_map(|o| &o.locations) {
                if !location_closure.contains(loc) {
                    location_closure.push(loc.clone());
                }
            }
            ObjectGroup {
                source: members[0].source,
                members,
                phases,
                location_closure,
            }
        })
        .collect()
}

/// Tallies matched objects between predicted and reference groups.
///
/// Groups `P` and `R` match when some `p` in `P` and `r` in `R` share a phase
/// and have related locations. Every object taking part in such a pair is
/// counted once, however many pairs it joins.
pub fn match_groups(
    pred_groups: &[ObjectGroup],
    ref_groups: &[ObjectGroup],
    hierarchy: &LocationHierarchy,
) -> MatchTally {
    let pred: Vec<&PhenomenonObject> = pred_groups.iter().flat_map(|g| &g.members).collect();
    let refs: Vec<&PhenomenonObject> = ref_groups.iter().flat_map(|g| &g.members).collect();
    tally_objects(&pred, &refs, hierarchy)
}

fn tally_objects(
    pred: &[&PhenomenonObject],
    refs: &[&PhenomenonObject],
    hierarchy: &LocationHierarchy,
) -> MatchTally {
    let pred_locs = location_indices(pred.iter().copied(), hierarchy);
    let ref_locs = location_indices(refs.iter().copied(), hierarchy);
    let mut pred_hit = vec![false; pred.len()];
    let mut ref_hit = vec![false; refs.len()];
    for (i, p) in pred.iter().enumerate() {
        for (j, r) in refs.iter().enumerate() {
            if (pred_hit[i] && ref_hit[j]) || p.phase != r.phase {
                continue;
            }
            if any_related(&pred_locs[i], &ref_locs[j], hierarchy) {
                pred_hit[i] = true;
                ref_hit[j] = true;
            }
        }
    }

    let mut t = MatchTally::default();
    for (objs, hits, is_pred) in [(pred, &pred_hit, true), (refs, &ref_hit, false)] {
        for (o, &hit) in objs.iter().zip(hits.iter()) {
            match o.phase {
                Phase::Negative => t.n_l += 1,
                Phase::Positive => t.n_h += 1,
            }
            if !hit {
                continue;
            }
            let slot = match (is_pred, o.phase) {
                (true, Phase::Negative) => &mut t.m_pred_l,
                (true, Phase::Positive) => &mut t.m_pred_h,
                (false, Phase::Negative) => &mut t.m_ref_l,
                (false, Phase::Positive) => &mut t.m_ref_h,
            };
            *slot += 1;
        }
    }
    t
}

/// One minus the gap between the negative-phase shares of matched objects
/// on each side. Zero when either side has no matches.
pub fn match_score(t: &MatchTally) -> f64 {
    let (pred, refs) = (t.matched_pred(), t.matched_ref());
    if pred == 0 || refs == 0 {
        return 0.0;
    }
    let pred_share = f64::from(t.m_pred_l) / f64::from(pred);
    let ref_share = f64::from(t.m_ref_l) / f64::from(refs);
    1.0 - (pred_share - ref_share).abs()
}

/// Fraction of all objects, both texts combined, that take part in a match.
pub fn coverage_ratio(t: &MatchTally) -> Result<f64, ScoringError> {
    if t.total() == 0 {
        return Err(ScoringError::Undefined);
    }
    Ok(f64::from(t.matched_pred() + t.matched_ref()) / f64::from(t.total()))
}

/// Scores a tally. An empty tally yields an undefined, all-zero score.
pub fn score_tally(tally: MatchTally, mode: Mode, phenomenon: &str) -> SpaceScore {
    let (match_score, coverage_ratio, defined) = match coverage_ratio(&tally) {
        Ok(rc) => (match_score(&tally), rc, true),
        Err(_) => (0.0, 0.0, false),
    };
    SpaceScore {
        match_score,
        coverage_ratio,
        score: match_score * coverage_ratio,
        mode,
        phenomenon: phenomenon.to_string(),
        defined,
        tally,
    }
}

/// Groups, matches and scores two already-extracted object sets.
pub fn score_objects(
    predicted: &[PhenomenonObject],
    reference: &[PhenomenonObject],
    hierarchy: &LocationHierarchy,
    mode: Mode,
    phenomenon: &str,
) -> SpaceScore {
    let pred_groups = group_objects(predicted, hierarchy);
    let ref_groups = group_objects(reference, hierarchy);
    score_tally(
        match_groups(&pred_groups, &ref_groups, hierarchy),
        mode,
        phenomenon,
    )
}

/// Scores one predicted/reference discussion pair.
pub fn space_local(
    pred_text: &str,
    ref_text: &str,
    station: &str,
    config: &PhenomenonConfig,
    hierarchy: &LocationHierarchy,
) -> Result<SpaceScore, ScoringError> {
    let pred = extract_objects(pred_text, Source::Predicted, config, hierarchy, station)?;
    let refs = extract_objects(ref_text, Source::Reference, config, hierarchy, station)?;
    Ok(score_objects(&pred, &refs, hierarchy, Mode::Local, &config.name))
}

/// All station discussions issued for one forecast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastTexts {
    pub forecast_id: String,
    /// (station node id, discussion text)
    pub discussions: Vec<(String, String)>,
}

/// Pools objects from every station discussion of one forecast on each side
/// and scores the pooled sets.
pub fn space_aggregate(
    predicted: &ForecastTexts,
    reference: &ForecastTexts,
    config: &PhenomenonConfig,
    hierarchy: &LocationHierarchy,
) -> Result<SpaceScore, ScoringError> {
    if predicted.forecast_id != reference.forecast_id {
        return Err(ScoringError::MismatchedForecast {
            predicted: predicted.forecast_id.clone(),
            reference: reference.forecast_id.clone(),
        });
    }
    let pool = |texts: &ForecastTexts, source| -> Result<Vec<PhenomenonObject>, ScoringError> {
        let mut all = Vec::new();
        for (station, text) in &texts.discussions {
            all.extend(extract_objects(text, source, config, hierarchy, station)?);
        }
        Ok(all)
    };
    let pred = pool(predicted, Source::Predicted)?;
    let refs = pool(reference, Source::Reference)?;
    Ok(score_objects(&pred, &refs, hierarchy, Mode::Aggregate, &config.name))
}

fn location_indices<'a>(
    objects: impl IntoIterator<Item = &'a PhenomenonObject>,
    hierarchy: &LocationHierarchy,
) -> Vec<Vec<usize>> {
    objects
        .into_iter()
        .map(|o| {
            o.locations
                .iter()
                .filter_map(|id| hierarchy.index_of(id))
                .collect()
        })
        .collect()
}

fn any_related(a: &[usize], b: &[usize], hierarchy: &LocationHierarchy) -> bool {
    a.iter()
        .any(|&x| b.iter().any(|&y| hierarchy.related_idx(x, y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn obj(phase: Phase, loc: &str, source: Source, pos: usize) -> PhenomenonObject {
        PhenomenonObject {
            phase,
            term: "x".into(),
            locations: vec![loc.into()],
            sentence_index: pos,
            char_span: (pos, pos + 1),
            source,
        }
    }

    fn tally(pl: u32, ph: u32, rl: u32, rh: u32) -> MatchTally {
        MatchTally {
            m_pred_l: pl,
            m_pred_h: ph,
            m_ref_l: rl,
            m_ref_h: rh,
            n_l: pl + rl,
            n_h: ph + rh,
        }
    }

    #[test]
    fn grouping_examples() {
        let h = builtin::hierarchy();
        assert!(group_objects(&[], h).is_empty());

        let ancestor = [
            obj(Phase::Positive, "denver-co", Source::Reference, 0),
            obj(Phase::Positive, "colorado", Source::Reference, 1),
        ];
        let g = group_objects(&ancestor, h);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].members.len(), 2);
        assert_eq!(g[0].location_closure, ["denver-co", "colorado"]);

        let apart = [
            obj(Phase::Positive, "arizona", Source::Reference, 0),
            obj(Phase::Negative, "maine", Source::Reference, 1),
        ];
        let g = group_objects(&apart, h);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].members[0].locations, ["arizona"]);
        assert_eq!(g[1].members[0].locations, ["maine"]);
    }

    #[test]
    fn grouping_is_transitive() {
        let h = builtin::hierarchy();
        // denver ~ colorado ~ rockies ~ montana, but denver and montana only
        // through the chain.
        let objs = [
            obj(Phase::Positive, "denver-co", Source::Reference, 0),
            obj(Phase::Negative, "montana", Source::Reference, 1),
            obj(Phase::Positive, "rockies", Source::Reference, 2),
        ];
        assert_eq!(group_objects(&objs, h).len(), 1);
    }

    #[test]
    fn match_examples() {
        let h = builtin::hierarchy();
        let single = |src| vec![obj(Phase::Positive, "arizona", src, 0)];
        let t = match_groups(
            &group_objects(&single(Source::Predicted), h),
            &group_objects(&single(Source::Reference), h),
            h,
        );
        assert_eq!(t, MatchTally { m_pred_h: 1, m_ref_h: 1, n_h: 2, ..Default::default() });

        let pred = [obj(Phase::Negative, "southeast-us", Source::Predicted, 0)];
        let refs = [obj(Phase::Positive, "columbia-sc", Source::Reference, 0)];
        let t = match_groups(&group_objects(&pred, h), &group_objects(&refs, h), h);
        assert_eq!(t, MatchTally { n_l: 1, n_h: 1, ..Default::default() });
    }

    #[test]
    fn objects_counted_once() {
        let h = builtin::hierarchy();
        let pred = [
            obj(Phase::Positive, "arizona", Source::Predicted, 0),
            obj(Phase::Positive, "tucson-az", Source::Predicted, 1),
        ];
        let refs = [obj(Phase::Positive, "southwest-us", Source::Reference, 0)];
        let t = match_groups(&group_objects(&pred, h), &group_objects(&refs, h), h);
        assert_eq!(t.m_pred_h, 2);
        assert_eq!(t.m_ref_h, 1);
        assert_eq!(t.n_h, 3);
    }

    #[test]
    fn match_score_examples() {
        assert_eq!(match_score(&tally(2, 2, 1, 1)), 1.0);
        assert!((match_score(&tally(2, 1, 1, 1)) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(match_score(&tally(0, 1, 0, 1)), 1.0);
        assert_eq!(match_score(&MatchTally::default()), 0.0);
        assert_eq!(match_score(&tally(0, 0, 1, 0)), 0.0);
    }

    #[test]
    fn coverage_examples() {
        let mut t = tally(0, 1, 0, 1);
        t.n_l += 2;
        assert_eq!(coverage_ratio(&t), Ok(0.5));
        assert_eq!(coverage_ratio(&tally(1, 2, 2, 1)), Ok(1.0));
        let hallucinated = MatchTally { n_h: 3, ..Default::default() };
        assert_eq!(coverage_ratio(&hallucinated), Ok(0.0));
        assert_eq!(coverage_ratio(&MatchTally::default()), Err(ScoringError::Undefined));
    }

    #[test]
    fn undefined_when_both_empty() {
        let s = space_local(
            "Clear skies.",
            "Sunny.",
            "tucson-az",
            builtin::pressure(),
            builtin::hierarchy(),
        )
        .unwrap();
        assert!(!s.defined);
        assert_eq!((s.match_score, s.coverage_ratio, s.score), (0.0, 0.0, 0.0));
    }

    #[test]
    fn aggregate_single_station_equals_local() {
        let (p, r) = (
            "A trough over Kansas with a ridge over Utah.",
            "Trough over Kansas. High pressure across Nevada.",
        );
        let local =
            space_local(p, r, "topeka-ks", builtin::pressure(), builtin::hierarchy()).unwrap();
        let wrap = |t: &str| ForecastTexts {
            forecast_id: "2025010700".into(),
            discussions: vec![("topeka-ks".into(), t.into())],
        };
        let agg = space_aggregate(&wrap(p), &wrap(r), builtin::pressure(), builtin::hierarchy())
            .unwrap();
        assert_eq!(agg.mode, Mode::Aggregate);
        assert_eq!(
            (agg.match_score, agg.coverage_ratio, agg.score, agg.tally),
            (local.match_score, local.coverage_ratio, local.score, local.tally)
        );
    }

    #[test]
    fn aggregate_rejects_mismatched_forecasts() {
        let a = ForecastTexts { forecast_id: "a".into(), discussions: vec![] };
        let b = ForecastTexts { forecast_id: "b".into(), discussions: vec![] };
        assert!(matches!(
            space_aggregate(&a, &b, builtin::pressure(), builtin::hierarchy()),
            Err(ScoringError::MismatchedForecast { .. })
        ));
    }

    #[test]
    fn score_record_field_names() {
        let s = score_tally(tally(0, 1, 0, 1), Mode::Local, "pressure");
        let v = serde_json::to_value(&s).unwrap();
        for key in ["s_m", "r_c", "s", "defined", "n_L", "n_H", "m_pred_L", "m_ref_H", "mode"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["mode"], "local");
    }
}
