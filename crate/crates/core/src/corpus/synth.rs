//! Synthetic corpora and raw products for tests, goldens and demos.
//!
//! Each synthetic forecast carries a handful of pressure features over named
//! regions. A station's reference discussion mentions nearby features more
//! often than distant ones, and the synthetic model's prediction is a noisy
//! copy: phases flip, locations drift, features drop out or are invented.
//! Everything is drawn from one ChaCha8 stream, so a seed fixes the output.

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc, Weekday};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Climatology, Prediction};
use crate::extraction::Phase;
use crate::hierarchy::LocationHierarchy;
use crate::ingest::cycle::{ForecastCycle, CYCLE_HOURS};
use crate::ingest::stations::{Station, StationRegistry};
use crate::ingest::timestamp::format_issue_header;
use crate::ingest::Sample;

/// Region names used in generated text. Every one resolves in the bundled
/// hierarchy.
pub const REGIONS: &[&str] = &[
    "the Pacific Northwest",
    "the Great Basin",
    "the Desert Southwest",
    "the Four Corners",
    "the northern Rockies",
    "the central Rockies",
    "the Southern Plains",
    "the Northern Plains",
    "the High Plains",
    "the Upper Midwest",
    "the Upper Mississippi Valley",
    "the Mid-South",
    "the Tennessee Valley",
    "the Southeast",
    "the Deep South",
    "the Gulf Coast",
    "the Carolinas",
    "the Mid-Atlantic",
    "the Northeast",
    "New England",
    "the Appalachians",
    "the Intermountain West",
    "the West Coast",
    "Texas",
    "California",
    "Montana",
    "Florida",
    "Colorado",
    "Minnesota",
    "Georgia",
];

const HIGH_TERMS: &[&str] = &["High pressure", "A ridge", "An upper ridge", "A broad ridge"];
const LOW_TERMS: &[&str] = &["Low pressure", "A trough", "An upper trough", "A deep trough"];
const HIGH_VERBS: &[&str] = &["builds over", "remains anchored over", "expands across", "holds over", "settles into"];
const LOW_VERBS: &[&str] = &["digs into", "moves across", "deepens over", "swings through", "lingers over"];
const TAILS: &[&str] = &["tonight", "through tomorrow", "over the next day", "into the weekend", "this afternoon"];
const HIGH_LOCAL: &[&str] = &[
    "keeps skies mostly clear tonight",
    "maintains dry and stable conditions",
    "brings light winds and clear skies",
];
const LOW_LOCAL: &[&str] = &[
    "brings clouds and a chance of showers",
    "keeps conditions unsettled",
    "supports breezy and cool conditions",
];
const FILLERS: &[&str] = &[
    "Winds remain light overnight.",
    "Temperatures run near seasonal normals.",
    "Skies stay mostly clear through the period.",
    "Dry conditions continue.",
    "Visibility stays unrestricted at area terminals.",
    "Humidity recovers overnight with light winds.",
    "Breezy conditions develop in the afternoon.",
    "Patchy fog is possible in sheltered valleys early.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthOptions {
    pub forecasts: usize,
    pub stations_per_forecast: usize,
    /// Training discussions per test sample for the climatology pool.
    pub training_per_sample: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            forecasts: 10,
            stations_per_forecast: 20,
            training_per_sample: 3,
            seed: 2025,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub samples: Vec<Sample>,
    pub training: Vec<Sample>,
    /// Predictions from the `synthetic` model, then the `climatology` model
    /// (omitted when no training discussions are generated).
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, Copy)]
struct Feature {
    phase: Phase,
    region: usize,
}

struct Ctx<'a> {
    hierarchy: &'a LocationHierarchy,
    region_nodes: Vec<String>,
}

impl<'a> Ctx<'a> {
    fn new(hierarchy: &'a LocationHierarchy) -> Self {
        let region_nodes = REGIONS
            .iter()
            .map(|r| {
                let m = hierarchy.find_mentions(r);
                assert!(m.len() == 1, "region `{r}` must resolve to one node");
                hierarchy.node_at(m[0].node).id.clone()
            })
            .collect();
        Self { hierarchy, region_nodes }
    }

    fn near(&self, f: Feature, home: &str) -> bool {
        self.hierarchy.related(&self.region_nodes[f.region], home).unwrap_or(false)
    }
}

fn feature_sentence(f: Feature, located: bool, rng: &mut impl Rng) -> String {
    let (terms, verbs, local) = match f.phase {
        Phase::Positive => (HIGH_TERMS, HIGH_VERBS, HIGH_LOCAL),
        Phase::Negative => (LOW_TERMS, LOW_VERBS, LOW_LOCAL),
    };
    let term = terms.choose(rng).expect("nonempty");
    if located {
        format!(
            "{term} {} {} {}.",
            verbs.choose(rng).expect("nonempty"),
            REGIONS[f.region],
            TAILS.choose(rng).expect("nonempty")
        )
    } else {
        format!("{term} {}.", local.choose(rng).expect("nonempty"))
    }
}

fn random_feature(rng: &mut impl Rng) -> Feature {
    Feature {
        phase: if rng.random_bool(0.5) { Phase::Positive } else { Phase::Negative },
        region: rng.random_range(0..REGIONS.len()),
    }
}

fn compose(mut sentences: Vec<String>, rng: &mut impl Rng) -> String {
    for _ in 0..rng.random_range(1..=3) {
        sentences.push(FILLERS.choose(rng).expect("nonempty").to_string());
    }
    sentences.shuffle(rng);
    sentences.join(" ")
}

/// Reference discussion for `home`, and the (feature, located) mentions.
fn reference_for(ctx: &Ctx<'_>, features: &[Feature], home: &str, rng: &mut impl Rng) -> (String, Vec<(Feature, bool)>) {
    let mut mentions = Vec::new();
    if !rng.random_bool(0.08) {
        for &f in features {
            let near = ctx.near(f, home);
            if rng.random_bool(if near { 0.75 } else { 0.2 }) {
                mentions.push((f, !(near && rng.random_bool(0.25))));
            }
        }
    }
    let sentences = mentions.iter().map(|&(f, located)| feature_sentence(f, located, rng)).collect();
    (compose(sentences, rng), mentions)
}

fn prediction_for(features: &[Feature], mentions: &[(Feature, bool)], rng: &mut impl Rng) -> String {
    let mut sentences = Vec::new();
    for &(f, located) in mentions {
        let roll: f64 = rng.random();
        let out = if roll < 0.65 {
            Some(f)
        } else if roll < 0.8 {
            Some(Feature { phase: f.phase.opposite(), ..f })
        } else if roll < 0.92 {
            Some(Feature { region: rng.random_range(0..REGIONS.len()), ..f })
        } else {
            None
        };
        if let Some(f) = out {
            sentences.push(feature_sentence(f, located, rng));
        }
    }
    if rng.random_bool(0.35) {
        let f = if rng.random_bool(0.6) {
            *features.choose(rng).expect("forecast has features")
        } else {
            random_feature(rng)
        };
        sentences.push(feature_sentence(f, true, rng));
    }
    compose(sentences, rng)
}

fn random_cycle(rng: &mut impl Rng, first: NaiveDate, days: i64) -> ForecastCycle {
    ForecastCycle {
        date: first + Duration::days(rng.random_range(0..days)),
        hour: *CYCLE_HOURS.choose(rng).expect("nonempty"),
    }
}

pub fn generate(opts: &SynthOptions, hierarchy: &LocationHierarchy, registry: &StationRegistry) -> SynthCorpus {
    let ctx = Ctx::new(hierarchy);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let stations: Vec<&Station> = registry.iter().collect();
    let per = opts.stations_per_forecast.min(stations.len());
    let test_start = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date");

    let mut samples = Vec::new();
    let mut predictions = Vec::new();
    let mut training = Vec::new();
    let mut used_cycles = Vec::new();
    for _ in 0..opts.forecasts {
        let cycle = loop {
            let c = random_cycle(&mut rng, test_start, 700);
            if !used_cycles.contains(&c) {
                used_cycles.push(c);
                break c;
            }
        };
        let features: Vec<Feature> = (0..rng.random_range(2..=4)).map(|_| random_feature(&mut rng)).collect();
        let picks = rand::seq::index::sample(&mut rng, stations.len(), per).into_vec();
        for idx in picks {
            let station = stations[idx];
            let issue = cycle.init_time() + Duration::minutes(rng.random_range(-150..=150));
            let (text, mentions) = reference_for(&ctx, &features, &station.home_node, &mut rng);
            let sample_id = format!("{}-{}", station.office, cycle);
            predictions.push(Prediction {
                sample_id: sample_id.clone(),
                model: "synthetic".into(),
                predicted_text: prediction_for(&features, &mentions, &mut rng),
            });
            for k in 0..opts.training_per_sample {
                let year = 2016 + (k as i32 * 2 + rng.random_range(0..2)) % 7;
                let day = rng.random_range(1..=28);
                let date = NaiveDate::from_ymd_opt(year, cycle.date.month(), day).expect("valid date");
                let past = ForecastCycle { date, hour: *CYCLE_HOURS.choose(&mut rng).expect("nonempty") };
                let past_features: Vec<Feature> = (0..rng.random_range(1..=3)).map(|_| random_feature(&mut rng)).collect();
                let (past_text, _) = reference_for(&ctx, &past_features, &station.home_node, &mut rng);
                training.push(Sample {
                    sample_id: format!("{}-{}", station.office, past),
                    station: station.office.clone(),
                    issue_time: past.init_time() + Duration::minutes(rng.random_range(-150..=150)),
                    utc_offset_minutes: Some(zone_for(&station.state, past.init_time()).1 * 60),
                    forecast_id: Some(past.to_string()),
                    reference_text: past_text,
                    predicted_text: None,
                });
            }
            samples.push(Sample {
                sample_id,
                station: station.office.clone(),
                issue_time: issue,
                utc_offset_minutes: Some(zone_for(&station.state, issue).1 * 60),
                forecast_id: Some(cycle.to_string()),
                reference_text: text,
                predicted_text: None,
            });
        }
    }
    training.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    training.dedup_by(|a, b| a.sample_id == b.sample_id);

    if opts.training_per_sample > 0 {
        let clim = Climatology::new(&training);
        let clim_preds = clim
            .predictions(&samples, opts.seed, "climatology")
            .expect("every test stratum has training samples");
        predictions.extend(clim_preds);
    }
    SynthCorpus { samples, training, predictions }
}

fn in_dst(t: DateTime<Utc>) -> bool {
    // Second Sunday in March through the first Sunday in November.
    let year = t.year();
    let nth_sunday = |month, n| {
        NaiveDate::from_weekday_of_month_opt(year, month, Weekday::Sun, n).expect("valid month")
    };
    let d = t.date_naive();
    d >= nth_sunday(3, 2) && d < nth_sunday(11, 1)
}

/// Zone abbreviation and UTC offset in hours for an office's state.
pub fn zone_for(state: &str, t: DateTime<Utc>) -> (&'static str, i32) {
    let dst = in_dst(t);
    let pick = |std: (&'static str, i32), day: (&'static str, i32)| if dst { day } else { std };
    match state {
        "AZ" => ("MST", -7),
        "HI" => ("HST", -10),
        "PR" => ("AST", -4),
        "AK" => pick(("AKST", -9), ("AKDT", -8)),
        "CA" | "NV" | "OR" | "WA" => pick(("PST", -8), ("PDT", -7)),
        "CO" | "ID" | "MT" | "NM" | "UT" | "WY" => pick(("MST", -7), ("MDT", -6)),
        "AL" | "AR" | "IA" | "IL" | "KS" | "LA" | "MN" | "MO" | "MS" | "NE" | "ND" | "SD" | "OK"
        | "TN" | "TX" | "WI" => pick(("CST", -6), ("CDT", -5)),
        _ => pick(("EST", -5), ("EDT", -4)),
    }
}

const MODELS: &[&str] = &["ECMWF", "NAM", "HRRR", "CMC", "EURO", "UKMET"];
const WEEKDAY_NAMES: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

fn weekday_after(issue: Weekday, offset: u32) -> &'static str {
    WEEKDAY_NAMES[((issue.num_days_from_monday() + offset) % 7) as usize]
}

/// A complete raw discussion product for `station` issued at `issue`.
pub fn raw_product(station: &Station, issue: DateTime<Utc>, rng: &mut impl Rng) -> String {
    let (zone, offset) = zone_for(&station.state, issue);
    let local_day = (issue + Duration::hours(i64::from(offset))).weekday();
    let header = format_issue_header(issue, zone).expect("known zone");
    let day = |o: u32| weekday_after(local_day, o);
    let feature = |rng: &mut ChaCha8Rng| feature_sentence(random_feature(rng), rng.random_bool(0.8), rng);
    let mut r = ChaCha8Rng::seed_from_u64(rng.random());

    let mut synopsis = vec![feature(&mut r)];
    if r.random_bool(0.6) {
        synopsis.push(feature(&mut r));
    }
    if r.random_bool(0.5) {
        synopsis.push(format!(
            "The {} is slower with the trough than the GFS.",
            MODELS.choose(&mut r).expect("nonempty")
        ));
    }

    let mut short = Vec::new();
    for _ in 0..r.random_range(2..=5) {
        let s = match r.random_range(0..8) {
            0 => "A shortwave trough rotates through the flow tonight.".to_string(),
            1 => "A surface trough lingers near the area through tomorrow.".to_string(),
            2 => format!(
                "{} guidance keeps the ridge farther west.",
                MODELS.choose(&mut r).expect("nonempty")
            ),
            3 => format!(
                "The ridge weakens on {} as the trough approaches.",
                day(r.random_range(1..=2))
            ),
            4 => FILLERS.choose(&mut r).expect("nonempty").to_string(),
            _ => feature(&mut r),
        };
        short.push(s);
    }
    if r.random_bool(0.15) {
        short.push(
            ["Ridging dominates the extended period.", "A trough may return by Day 3."]
                .choose(&mut r)
                .expect("nonempty")
                .to_string(),
        );
    }
    if r.random_bool(0.3) {
        short.push(format!("Another trough arrives by {}.", day(r.random_range(3..=6))));
        short.push(feature(&mut r));
    }

    let long = [
        format!("High pressure returns for {} and {}.", day(3), day(4)),
        format!("A cold front crosses the region on {}.", day(5)),
    ];

    format!(
        "000\nFXUS6{n} K{office} {stamp}\nAFD{office}\n\nArea Forecast Discussion\n\
         National Weather Service {city} {state}\n{header}\n\n\
         .SYNOPSIS...\n{synopsis}\n\n&&\n\n\
         .SHORT TERM /Through {d2}/...\n{short}\n\n&&\n\n\
         .LONG TERM /{d3} through {d7}/...\n{long}\n\n&&\n\n\
         .AVIATION /{hh:02}Z TAFS/...\n{aviation}\n\n&&\n\n$$\n\nFORECASTER{fc}\n",
        n = r.random_range(1..=8),
        office = station.office,
        stamp = issue.format("%d%H%M"),
        city = station.city,
        state = station.state,
        synopsis = synopsis.join(" "),
        d2 = day(2),
        short = wrap(&short.join(" "), 68),
        d3 = day(3),
        d7 = day(7),
        long = long.join(" "),
        hh = issue.hour(),
        aviation = FILLERS.choose(&mut r).expect("nonempty"),
        fc = r.random_range(1..=9),
    )
}

/// Hard-wraps text at `width` columns the way products are transmitted.
fn wrap(text: &str, width: usize) -> String {
    let mut out = String::new();
    let mut col = 0;
    for word in text.split_whitespace() {
        if col > 0 && col + 1 + word.len() > width {
            out.push('\n');
            col = 0;
        } else if col > 0 {
            out.push(' ');
            col += 1;
        }
        out.push_str(word);
        col += word.len();
    }
    out
}

/// Raw products spread across the registry, with their file names.
pub fn raw_products(count: usize, registry: &StationRegistry, seed: u64) -> Vec<(String, Station, DateTime<Utc>, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stations: Vec<&Station> = registry.iter().collect();
    (0..count)
        .map(|_| {
            let station = stations[rng.random_range(0..stations.len())].clone();
            let day = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid") + Duration::days(rng.random_range(0..700));
            let minutes = rng.random_range(0..24 * 60);
            let issue = Utc.from_utc_datetime(&day.and_hms_opt(minutes / 60, minutes % 60, 0).expect("valid"));
            let text = raw_product(&station, issue, &mut rng);
            let name = format!("{}_{}.txt", station.office, issue.format("%Y%m%d%H%M"));
            (name, station, issue, text)
        })
        .collect()
}

/// Offices and days covered by [`api_fixtures`].
pub const API_OFFICES: [&str; 3] = ["BOU", "TWC", "CAE"];
pub const API_FIRST_DAY: (i32, u32, u32) = (2025, 1, 6);
pub const API_DAYS: u32 = 3;

/// Recorded-style archive responses: one listing per office and day, plus
/// one text body per listed product, keyed by fixture file name. Listings
/// are deliberately newest-first.
pub fn api_fixtures(registry: &StationRegistry, seed: u64) -> Vec<(String, String)> {
    use crate::ingest::client::fixture_name;

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let (y, m, d) = API_FIRST_DAY;
    let first = NaiveDate::from_ymd_opt(y, m, d).expect("valid date");
    let mut out = Vec::new();
    for office in API_OFFICES {
        let station = registry.get(office).expect("fixture office is registered");
        let cccc = format!("K{office}");
        for k in 0..API_DAYS {
            let day = first + Duration::days(i64::from(k));
            let mut minutes: Vec<u32> = (0..rng.random_range(0..=2)).map(|_| rng.random_range(0..24 * 60)).collect();
            minutes.sort_unstable();
            minutes.dedup();
            let mut entries = Vec::new();
            for min in minutes {
                let issue = Utc.from_utc_datetime(&day.and_hms_opt(min / 60, min % 60, 0).expect("valid"));
                let product_id = format!("{}-{cccc}-FXUS6{}-AFD{office}", issue.format("%Y%m%d%H%M"), rng.random_range(1..=8));
                out.push((fixture_name(&format!("api/1/nwstext/{product_id}")), raw_product(station, issue, &mut rng)));
                entries.push(serde_json::json!({
                    "entered": issue.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
                    "pil": format!("AFD{office}"),
                    "product_id": product_id,
                    "cccc": cccc,
                    "count": 1,
                }));
            }
            entries.reverse();
            let path = format!("api/1/nws/afos/list.json?pil=AFD{office}&date={}", day.format("%Y-%m-%d"));
            let body = serde_json::to_string_pretty(&serde_json::json!({ "data": entries }))
                .expect("listing serializes");
            out.push((fixture_name(&path), body + "\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::ingest::parse_issue_time;

    #[test]
    fn regions_resolve() {
        Ctx::new(builtin::hierarchy());
    }

    #[test]
    fn deterministic_and_shaped() {
        let opts = SynthOptions { forecasts: 3, stations_per_forecast: 5, ..Default::default() };
        let a = generate(&opts, builtin::hierarchy(), builtin::stations());
        let b = generate(&opts, builtin::hierarchy(), builtin::stations());
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.predictions, b.predictions);
        assert_eq!(a.samples.len(), 15);
        assert_eq!(a.predictions.len(), 30);
        for s in &a.samples {
            let cycle: ForecastCycle = s.forecast_id.as_deref().unwrap().parse().unwrap();
            assert!((s.issue_time - cycle.init_time()).num_minutes().abs() <= 150);
        }
    }

    #[test]
    fn raw_products_have_headers() {
        for (_, station, issue, text) in raw_products(20, builtin::stations(), 3) {
            assert_eq!(parse_issue_time(&text).unwrap(), issue, "{}", station.office);
        }
    }

    #[test]
    fn dst_window() {
        let t = |m, d| Utc.with_ymd_and_hms(2025, m, d, 12, 0, 0).unwrap();
        assert_eq!(zone_for("CO", t(1, 7)).0, "MST");
        assert_eq!(zone_for("CO", t(3, 9)).0, "MDT");
        assert_eq!(zone_for("CO", t(11, 2)).0, "MST");
        assert_eq!(zone_for("AZ", t(7, 1)).0, "MST");
    }
}
