//! Phase- and location-aware evaluation of synoptic weather discussions.
//!
//! Generated and reference forecast discussions are reduced to phenomenon
//! objects (a phase-tagged term plus the locations it is bound to), the
//! objects are grouped and matched through a spatial hierarchy, and each
//! pair of texts gets a match score, a coverage ratio and their product.
//!
//! ```
//! use synoptic_space::{builtin, scoring::space_local};
//!
//! let score = space_local(
//!     "High pressure over the Desert Southwest keeps skies clear.",
//!     "Strong high pressure remains over the southwestern US.",
//!     "tucson-az",
//!     builtin::pressure(),
//!     builtin::hierarchy(),
//! )
//! .unwrap();
//! assert_eq!(score.score, 1.0);
//! ```
//!
//! The surrounding pipeline covers discussion filtering ([`preprocess`]),
//! archive ingestion ([`ingest`]), surface-overlap metrics
//! ([`textmetrics`]) and corpus evaluation and reporting ([`corpus`]).

pub mod corpus;
pub mod extraction;
pub mod hierarchy;
pub mod jsonl;
pub mod ingest;
pub mod phrase;
pub mod preprocess;
pub mod scoring;
pub mod textmetrics;
mod union_find;

pub use extraction::{extract_objects, segment_sentences, Phase, PhenomenonConfig, PhenomenonObject, Source};
pub use hierarchy::{load_hierarchy, LocationHierarchy, LocationNode, Relation, Scale};
pub use scoring::{
    coverage_ratio, group_objects, match_groups, match_score, space_aggregate, space_local,
    ForecastTexts, MatchTally, Mode, ObjectGroup, SpaceScore,
};

/// Version of the JSONL and report schemas written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Data files compiled into the crate.
pub mod builtin {
    use std::sync::OnceLock;

    use crate::extraction::PhenomenonConfig;
    use crate::hierarchy::{parse_stop_list, LocationHierarchy};
    use crate::ingest::stations::StationRegistry;
    use crate::preprocess::FilterRules;

    pub const HIERARCHY: &str = include_str!("../data/hierarchy.txt");
    pub const STOP_NODES: &str = include_str!("../data/stop_nodes.txt");
    pub const PRESSURE: &str = include_str!("../data/pressure.txt");
    pub const TEMPERATURE: &str = include_str!("../data/temperature.txt");
    pub const FILTER_RULES: &str = include_str!("../data/filter_rules.txt");
    pub const STATIONS: &str = include_str!("../data/stations.txt");

    pub fn hierarchy() -> &'static LocationHierarchy {
        static CELL: OnceLock<LocationHierarchy> = OnceLock::new();
        CELL.get_or_init(|| {
            LocationHierarchy::parse(HIERARCHY).expect("bundled hierarchy is valid")
        })
    }

    pub fn stop_names() -> Vec<String> {
        parse_stop_list(STOP_NODES)
    }

    pub fn pressure() -> &'static PhenomenonConfig {
        static CELL: OnceLock<PhenomenonConfig> = OnceLock::new();
        CELL.get_or_init(|| {
            PhenomenonConfig::parse("pressure", PRESSURE).expect("bundled pressure config is valid")
        })
    }

    pub fn temperature() -> &'static PhenomenonConfig {
        static CELL: OnceLock<PhenomenonConfig> = OnceLock::new();
        CELL.get_or_init(|| {
            PhenomenonConfig::parse("temperature", TEMPERATURE)
                .expect("bundled temperature config is valid")
        })
    }

    /// Bundled config for `name` (`pressure` or `temperature`).
    pub fn phenomenon(name: &str) -> Option<&'static PhenomenonConfig> {
        match name {
            "pressure" => Some(pressure()),
            "temperature" => Some(temperature()),
            _ => None,
        }
    }

    pub fn filter_rules() -> &'static FilterRules {
        static CELL: OnceLock<FilterRules> = OnceLock::new();
        CELL.get_or_init(|| FilterRules::parse(FILTER_RULES).expect("bundled rules are valid"))
    }

    pub fn stations() -> &'static StationRegistry {
        static CELL: OnceLock<StationRegistry> = OnceLock::new();
        CELL.get_or_init(|| StationRegistry::parse(STATIONS).expect("bundled stations are valid"))
    }
}
