//! Independent reference implementations used as test oracles. None of
//! these share code with the library beyond its public data types.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::PathBuf;

use synoptic_space::extraction::PhenomenonObject;
use synoptic_space::hierarchy::{LocationHierarchy, LocationNode};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// Relatedness by explicit graph walks over the node list.
pub struct RelatednessOracle {
    ancestors: HashMap<String, HashSet<String>>,
    stop: HashSet<String>,
}

impl RelatednessOracle {
    pub fn new(nodes: &[LocationNode]) -> Self {
        let parents: HashMap<&str, &Vec<String>> = nodes.iter().map(|n| (n.id.as_str(), &n.parents)).collect();
        let mut ancestors = HashMap::new();
        for n in nodes {
            let mut seen = HashSet::new();
            let mut todo: Vec<&str> = n.parents.iter().map(String::as_str).collect();
            while let Some(p) = todo.pop() {
                if seen.insert(p.to_string()) {
                    todo.extend(parents[p].iter().map(String::as_str));
                }
            }
            ancestors.insert(n.id.clone(), seen);
        }
        let stop = nodes.iter().filter(|n| n.stop).map(|n| n.id.clone()).collect();
        Self { ancestors, stop }
    }

    pub fn related(&self, a: &str, b: &str) -> bool {
        if a == b || self.ancestors[a].contains(b) || self.ancestors[b].contains(a) {
            return true;
        }
        if self.stop.contains(a) || self.stop.contains(b) {
            return false;
        }
        self.ancestors[a]
            .intersection(&self.ancestors[b])
            .any(|c| !self.stop.contains(c))
    }
}

/// Partition of object indices by transitive closure of a dense
/// relatedness matrix (Warshall), as a set of sorted index sets.
pub fn closure_partition(objects: &[PhenomenonObject], oracle: &RelatednessOracle) -> BTreeSet<Vec<usize>> {
    let n = objects.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = i == j
                || objects[i]
                    .locations
                    .iter()
                    .any(|a| objects[j].locations.iter().any(|b| oracle.related(a, b)));
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .map(|i| (0..n).filter(|&j| reach[i][j]).collect())
        .collect()
}

/// Partition produced by the library, mapped back to input indices.
pub fn library_partition(objects: &[PhenomenonObject], hierarchy: &LocationHierarchy) -> BTreeSet<Vec<usize>> {
    synoptic_space::group_objects(objects, hierarchy)
        .into_iter()
        .map(|g| {
            let mut idx: Vec<usize> = g
                .members
                .iter()
                .map(|m| objects.iter().position(|o| o == m).expect("member comes from input"))
                .collect();
            idx.sort_unstable();
            idx
        })
        .collect()
}

/// Quadratic-time LCS length.
pub fn lcs_dp(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

pub fn f_oracle(overlap: usize, p: usize, r: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let (pr, rc) = (overlap as f64 / p as f64, overlap as f64 / r as f64);
    2.0 * pr * rc / (pr + rc)
}

/// Match score and coverage ratio written straight from their definitions.
pub fn match_score_oracle(m_pred_l: u32, m_pred_h: u32, m_ref_l: u32, m_ref_h: u32) -> f64 {
    let pred = f64::from(m_pred_l + m_pred_h);
    let refs = f64::from(m_ref_l + m_ref_h);
    if pred == 0.0 || refs == 0.0 {
        0.0
    } else {
        1.0 - (f64::from(m_pred_l) / pred - f64::from(m_ref_l) / refs).abs()
    }
}

pub fn coverage_oracle(matched: u32, n_l: u32, n_h: u32) -> Option<f64> {
    let total = n_l + n_h;
    (total > 0).then(|| f64::from(matched) / f64::from(total))
}

/// Word-bounded, case-insensitive scan for `phrase` (optionally plural).
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let pattern = format!(r"(?i)(^|[^\w]){}(s|es)?([^\w]|$)", regex::escape(phrase).replace(r"\ ", r"\s+"));
    regex::Regex::new(&pattern).expect("valid pattern").is_match(text)
}

/// Sentence texts built from known aliases and terms, used by randomized
/// identity checks.
pub const TERMS: &[&str] = &["high pressure", "low pressure", "ridge", "trough", "shortwave trough"];
pub const CONNECTORS: &[&str] = &["builds over", "moves across", "lingers near", "settles into", "over"];
pub const FILLER: &[&str] = &["Skies clear tonight.", "Winds remain light.", "Temperatures near normal."];
