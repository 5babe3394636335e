use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::hierarchy::LocationHierarchy;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StationError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("office `{0}` listed twice")]
    Duplicate(String),
    #[error("office `{office}` uses unknown home node `{node}`")]
    UnknownNode { office: String, node: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Station {
    pub office: String,
    pub city: String,
    pub state: String,
    /// Hierarchy node objects bind to when a discussion names no location.
    pub home_node: String,
}

#[derive(Debug, Clone, Default)]
pub struct StationRegistry {
    stations: Vec<Station>,
    by_office: HashMap<String, usize>,
}

impl StationRegistry {
    /// Parses `office|city|state|home_node` lines.
    pub fn parse(text: &str) -> Result<Self, StationError> {
        let mut reg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('|').map(str::trim).collect();
            let [office, city, state, home] = fields[..] else {
                return Err(StationError::Parse {
                    line: n + 1,
                    message: format!("expected 4 fields, found {}", fields.len()),
                });
            };
            if office.is_empty() || home.is_empty() {
                return Err(StationError::Parse {
                    line: n + 1,
                    message: "office and home node are required".into(),
                });
            }
            let office = office.to_ascii_uppercase();
            if reg.by_office.contains_key(&office) {
                return Err(StationError::Duplicate(office));
            }
            reg.by_office.insert(office.clone(), reg.stations.len());
            reg.stations.push(Station {
                office,
                city: city.into(),
                state: state.into(),
                home_node: home.into(),
            });
        }
        Ok(reg)
    }

    /// Looks up an office id, case-insensitively.
    pub fn get(&self, office: &str) -> Option<&Station> {
        self.by_office
            .get(&office.trim().to_ascii_uppercase())
            .map(|&i| &self.stations[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Station> {
        self.stations.iter()
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Every home node must exist in `hierarchy`.
    pub fn validate(&self, hierarchy: &LocationHierarchy) -> Result<(), StationError> {
        for s in &self.stations {
            if !hierarchy.contains(&s.home_node) {
                return Err(StationError::UnknownNode {
                    office: s.office.clone(),
                    node: s.home_node.clone(),
                });
            }
        }
        Ok(())
    }

    /// Home node for an office id, or the argument itself when it already
    /// names a hierarchy node.
    pub fn home_node<'a>(&'a self, station: &'a str, hierarchy: &LocationHierarchy) -> Option<&'a str> {
        match self.get(station) {
            Some(s) => Some(s.home_node.as_str()),
            None => hierarchy.contains(station).then_some(station),
        }
    }
}
