mod common;

use chrono::{DateTime, FixedOffset, TimeZone, Utc};
use proptest::prelude::*;
use proptest::sample::select;

use common::*;
use synoptic_space::ingest::timestamp::{format_issue_header, parse_issue_header};
use synoptic_space::preprocess::filter_afd;
use synoptic_space::scoring::{coverage_ratio, match_score, space_local};
use synoptic_space::textmetrics::{lcs_len, rouge_l, token_f1};
use synoptic_space::{builtin, LocationHierarchy, LocationNode, MatchTally, Phase, PhenomenonObject, Scale, Source};

/// Node specs: (parent picks, stop flag). Node `i` may only take parents
/// with a smaller index, which keeps the graph acyclic; scales are banded
/// by index so every parent is at least as coarse as its child.
fn hierarchy_spec() -> impl Strategy<Value = Vec<(Vec<usize>, bool)>> {
    prop::collection::vec((prop::collection::vec(any::<usize>(), 0..3), prop::bool::weighted(0.2)), 1..=20)
}

fn build_nodes(spec: &[(Vec<usize>, bool)]) -> Vec<LocationNode> {
    let n = spec.len();
    spec.iter()
        .enumerate()
        .map(|(i, (picks, stop))| {
            let mut parents: Vec<String> = if i == 0 {
                Vec::new()
            } else {
                picks.iter().map(|p| format!("n{}", p % i)).collect()
            };
            parents.sort();
            parents.dedup();
            let scale = match i * 3 / n {
                0 => Scale::Large,
                1 => Scale::Medium,
                _ => Scale::Small,
            };
            LocationNode {
                id: format!("n{i}"),
                canonical_name: format!("Place {i}"),
                scale,
                aliases: vec![format!("place{i}")],
                parents,
                stop: *stop,
            }
        })
        .collect()
}

fn objects_over(n_nodes: usize) -> impl Strategy<Value = Vec<PhenomenonObject>> {
    prop::collection::vec((any::<bool>(), prop::collection::vec(0..n_nodes, 1..=3)), 0..=12).prop_map(|objs| {
        objs.into_iter()
            .enumerate()
            .map(|(i, (positive, mut locs))| {
                locs.dedup();
                PhenomenonObject {
                    phase: if positive { Phase::Positive } else { Phase::Negative },
                    term: "ridge".into(),
                    locations: locs.into_iter().map(|l| format!("n{l}")).collect(),
                    sentence_index: i,
                    char_span: (0, 5),
                    source: Source::Reference,
                }
            })
            .collect()
    })
}

fn tally() -> impl Strategy<Value = MatchTally> {
    (0u32..10, 0u32..10, 0u32..10, 0u32..10)
        .prop_flat_map(|(pl, ph, rl, rh)| (0..=pl, 0..=ph, 0..=rl, 0..=rh, Just((pl, ph, rl, rh))))
        .prop_map(|(m_pred_l, m_pred_h, m_ref_l, m_ref_h, (pl, ph, rl, rh))| MatchTally {
            m_pred_l,
            m_pred_h,
            m_ref_l,
            m_ref_h,
            n_l: pl + rl,
            n_h: ph + rh,
        })
}

fn place_names() -> Vec<String> {
    builtin::hierarchy().nodes().iter().map(|n| n.canonical_name.clone()).collect()
}

fn sentence() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => (select(TERMS), select(CONNECTORS), select(place_names())).prop_map(|(t, c, p)| {
            let mut s = format!("{t} {c} {p}.");
            s[..1].make_ascii_uppercase();
            s
        }),
        1 => select(FILLER).prop_map(String::from),
    ]
}

fn discussion() -> impl Strategy<Value = String> {
    prop::collection::vec(sentence(), 1..6).prop_map(|v| v.join(" "))
}

fn station() -> impl Strategy<Value = String> {
    select(builtin::stations().iter().map(|s| s.home_node.clone()).collect::<Vec<_>>())
}

fn tokens() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(select(vec!["a", "b", "c", "d", "ridge"]).prop_map(String::from), 0..=30)
}

const ZONE_NAMES: &[&str] = &[
    "UTC", "GMT", "EST", "EDT", "CST", "CDT", "MST", "MDT", "PST", "PDT", "AKST", "AKDT", "HST", "AST", "ADT", "CHST", "SST",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn relatedness_matches_oracle(spec in hierarchy_spec()) {
        let nodes = build_nodes(&spec);
        let h = LocationHierarchy::from_nodes(nodes.clone()).unwrap();
        let oracle = RelatednessOracle::new(&nodes);
        for a in &nodes {
            prop_assert!(h.related(&a.id, &a.id).unwrap());
            for b in &nodes {
                let got = h.related(&a.id, &b.id).unwrap();
                prop_assert_eq!(got, oracle.related(&a.id, &b.id), "{} vs {}", a.id, b.id);
                prop_assert_eq!(got, h.related(&b.id, &a.id).unwrap());
                prop_assert_eq!(got, h.relation(&a.id, &b.id).unwrap().is_related());
            }
        }
    }

    #[test]
    fn more_stop_nodes_never_relate_more(spec in hierarchy_spec(), extra in any::<prop::sample::Index>()) {
        let nodes = build_nodes(&spec);
        let mut stricter = nodes.clone();
        stricter[extra.index(nodes.len())].stop = true;
        let (loose, strict) = (
            LocationHierarchy::from_nodes(nodes.clone()).unwrap(),
            LocationHierarchy::from_nodes(stricter).unwrap(),
        );
        for a in &nodes {
            for b in &nodes {
                if strict.related(&a.id, &b.id).unwrap() {
                    prop_assert!(loose.related(&a.id, &b.id).unwrap());
                }
            }
        }
    }

    #[test]
    fn grouping_matches_closure(
        (spec, objs) in hierarchy_spec().prop_flat_map(|spec| {
            let n = spec.len();
            (Just(spec), objects_over(n))
        })
    ) {
        let nodes = build_nodes(&spec);
        let h = LocationHierarchy::from_nodes(nodes.clone()).unwrap();
        let oracle = RelatednessOracle::new(&nodes);
        prop_assert_eq!(library_partition(&objs, &h), closure_partition(&objs, &oracle));
    }

    #[test]
    fn formulas_match_oracle_and_stay_in_bounds(t in tally()) {
        let sm = match_score(&t);
        prop_assert!((sm - match_score_oracle(t.m_pred_l, t.m_pred_h, t.m_ref_l, t.m_ref_h)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&sm));
        prop_assert_eq!(sm, match_score(&t.swapped()));
        match coverage_ratio(&t) {
            Ok(rc) => {
                prop_assert_eq!(Some(rc), coverage_oracle(t.matched_pred() + t.matched_ref(), t.n_l, t.n_h));
                prop_assert!((0.0..=1.0).contains(&rc));
            }
            Err(_) => prop_assert_eq!(t.total(), 0),
        }
    }

    #[test]
    fn coverage_grows_with_added_matches(t in tally(), low in any::<bool>()) {
        let mut more = t;
        if low {
            more.m_pred_l += 1;
            more.m_ref_l += 1;
            more.n_l += 2;
        } else {
            more.m_pred_h += 1;
            more.m_ref_h += 1;
            more.n_h += 2;
        }
        let before = coverage_ratio(&t).unwrap_or(0.0);
        prop_assert!(coverage_ratio(&more).unwrap() >= before);
    }

    #[test]
    fn scoring_identity_and_symmetry(a in discussion(), b in discussion(), st in station()) {
        let (h, cfg) = (builtin::hierarchy(), builtin::pressure());
        let same = space_local(&a, &a, &st, cfg, h).unwrap();
        if same.tally.total() > 0 {
            prop_assert_eq!(same.score, 1.0);
        } else {
            prop_assert!(!same.defined);
        }
        let ab = space_local(&a, &b, &st, cfg, h).unwrap();
        let ba = space_local(&b, &a, &st, cfg, h).unwrap();
        prop_assert_eq!((ab.match_score, ab.coverage_ratio, ab.score), (ba.match_score, ba.coverage_ratio, ba.score));
        prop_assert_eq!(ab.tally.swapped(), ba.tally);
        for v in [ab.match_score, ab.coverage_ratio, ab.score] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn scoring_ignores_case(a in discussion(), b in discussion(), st in station()) {
        let (h, cfg) = (builtin::hierarchy(), builtin::pressure());
        let plain = space_local(&a, &b, &st, cfg, h).unwrap();
        let upper = space_local(&a.to_uppercase(), &b.to_lowercase(), &st, cfg, h).unwrap();
        prop_assert_eq!(plain.tally, upper.tally);
        prop_assert_eq!(plain.score, upper.score);
    }

    #[test]
    fn filtering_is_idempotent(
        parts in prop::collection::vec(
            prop_oneof![
                3 => sentence(),
                1 => select(vec!["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"])
                    .prop_map(|d| format!("A trough arrives {d}.")),
                1 => Just("The ECMWF brings a shortwave through.".to_string()),
                2 => Just("Clouds thicken and winds ease as the ridge builds over the area.".to_string()),
            ],
            1..25,
        ),
        hour in 0u32..24,
        day in 6u32..13,
    ) {
        let rules = builtin::filter_rules();
        let issue: DateTime<FixedOffset> = FixedOffset::west_opt(6 * 3600).unwrap().with_ymd_and_hms(2025, 1, day, hour, 0, 0).unwrap();
        let raw = parts.join("  ");
        if let Some(once) = filter_afd(&raw, issue, rules) {
            prop_assert_eq!(filter_afd(&once, issue, rules), Some(once.clone()));
        }
    }

    #[test]
    fn issue_header_round_trips(minutes in 0i64..(20 * 365 * 24 * 60), zone in select(ZONE_NAMES)) {
        let utc = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap() + chrono::Duration::minutes(minutes);
        let line = format_issue_header(utc, zone).unwrap();
        let header = parse_issue_header(&format!("AFDXXX\n{line}\n")).unwrap();
        prop_assert_eq!(header.utc, utc);
        prop_assert_eq!(header.zone, zone);
    }

    #[test]
    fn rouge_matches_dp(a in tokens(), b in tokens()) {
        let lcs = lcs_dp(&a, &b);
        prop_assert_eq!(lcs_len(&a, &b), lcs);
        prop_assert_eq!(rouge_l(&a, &b), f_oracle(lcs, a.len(), b.len()));
        prop_assert_eq!(rouge_l(&a, &b), rouge_l(&b, &a));
        prop_assert_eq!(token_f1(&a, &b), token_f1(&b, &a));
    }
}
