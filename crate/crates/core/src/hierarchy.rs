//! Three-level spatial hierarchy used to decide whether two location
//! mentions refer to related places.
//!
//! Nodes live at one of three scales and point at their parents. Two nodes
//! are *related* when they are equal, when one is an ancestor of the other,
//! or when they share a common ancestor that is not a stop node (and
//! neither endpoint is itself a stop node).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phrase::{normalize_phrase, PhraseMatcher};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("alias `{alias}` declared on both `{first}` and `{second}`")]
    DuplicateAlias {
        alias: String,
        first: String,
        second: String,
    },
    #[error("node `{node}` names unknown parent `{parent}`")]
    UnknownParent { node: String, parent: String },
    #[error("node `{node}` ({node_scale}) cannot have smaller-scale parent `{parent}` ({parent_scale})")]
    ScaleOrder {
        node: String,
        node_scale: Scale,
        parent: String,
        parent_scale: Scale,
    },
    #[error("parent cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown location id `{0}`")]
    UnknownId(String),
    #[error("stop list entry `{0}` does not resolve to any node")]
    UnresolvedStopName(String),
    #[error("stop list entry `{name}` resolves to `{id}`, which is not flagged as a stop node")]
    StopNameNotFlagged { name: String, id: String },
    #[error("node `{0}` is flagged as a stop node but no stop list entry names it")]
    StopNodeNotListed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Small,
    Medium,
    Large,
}

impl Scale {
    pub fn code(self) -> char {
        match self {
            Scale::Large => 'L',
            Scale::Medium => 'M',
            Scale::Small => 'S',
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Large => "large",
            Scale::Medium => "medium",
            Scale::Small => "small",
        })
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "L" | "l" => Ok(Scale::Large),
            "M" | "m" => Ok(Scale::Medium),
            "S" | "s" => Ok(Scale::Small),
            other => Err(format!("scale must be L, M or S, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationNode {
    pub id: String,
    pub canonical_name: String,
    pub scale: Scale,
    pub aliases: Vec<String>,
    pub parents: Vec<String>,
    pub stop: bool,
}

/// How two nodes are related, if at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "via", rename_all = "snake_case")]
pub enum Relation {
    Equal,
    /// The first node is an ancestor of the second.
    Ancestor,
    /// The first node is a descendant of the second.
    Descendant,
    /// Lowest-index shared non-stop ancestor.
    CommonRelative(String),
    /// Only stop nodes are shared ancestors, or an endpoint is a stop node.
    BlockedByStop,
    Unrelated,
}

impl Relation {
    pub fn is_related(&self) -> bool {
        !matches!(self, Relation::BlockedByStop | Relation::Unrelated)
    }
}

/// A toponym found in text, bound to a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationMention {
    pub node: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BitSet(Vec<u64>);

impl BitSet {
    fn new(bits: usize) -> Self {
        BitSet(vec![0; bits.div_ceil(64)])
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }

    fn first_common(&self, other: &BitSet) -> Option<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .find_map(|(w, (a, b))| {
                let both = a & b;
                (both != 0).then(|| w * 64 + both.trailing_zeros() as usize)
            })
    }
}

/// Validated, immutable location hierarchy.
#[derive(Debug, Clone)]
pub struct LocationHierarchy {
    nodes: Vec<LocationNode>,
    index: HashMap<String, usize>,
    alias_index: HashMap<String, usize>,
    /// Strict ancestors of each node.
    ancestors: Vec<BitSet>,
    /// Strict ancestors of each node that are not stop nodes.
    open_ancestors: Vec<BitSet>,
    matcher: PhraseMatcher<usize>,
}

impl LocationHierarchy {
    /// Parses the pipe-delimited hierarchy format.
    pub fn parse(text: &str) -> Result<Self, HierarchyError> {
        let mut nodes = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            nodes.push(parse_record(line).map_err(|message| HierarchyError::Parse {
                line: n + 1,
                message,
            })?);
        }
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<LocationNode>) -> Result<Self, HierarchyError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(HierarchyError::DuplicateId(node.id.clone()));
            }
        }

        let mut parent_idx: Vec<Vec<usize>> = Vec::with_capacity(nodes.len());
        for node in &nodes {
            let mut ps = Vec::with_capacity(node.parents.len());
            for parent in &node.parents {
                let &p = index.get(parent).ok_or_else(|| HierarchyError::UnknownParent {
                    node: node.id.clone(),
                    parent: parent.clone(),
                })?;
                if nodes[p].scale < node.scale {
                    return Err(HierarchyError::ScaleOrder {
                        node: node.id.clone(),
                        node_scale: node.scale,
                        parent: parent.clone(),
                        parent_scale: nodes[p].scale,
                    });
                }
                ps.push(p);
            }
            parent_idx.push(ps);
        }

        let order = topological_order(&nodes, &parent_idx)?;

        let mut ancestors = vec![BitSet::new(nodes.len()); nodes.len()];
        let mut open_ancestors = vec![BitSet::new(nodes.len()); nodes.len()];
        // Parents before children, so each parent's closure is final when read.
        for &i in &order {
            for &p in &parent_idx[i] {
                let (parent_all, parent_open) = (ancestors[p].clone(), open_ancestors[p].clone());
                ancestors[i].insert(p);
                ancestors[i].union_with(&parent_all);
                if !nodes[p].stop {
                    open_ancestors[i].insert(p);
                }
                open_ancestors[i].union_with(&parent_open);
            }
        }

        let mut alias_index: HashMap<String, usize> = HashMap::new();
        let mut matcher = PhraseMatcher::new(false);
        for (i, node) in nodes.iter().enumerate() {
            for alias in &node.aliases {
                let key = normalize_phrase(alias);
                if key.is_empty() {
                    continue;
                }
                if let Some(&prev) = alias_index.get(&key) {
                    if prev == i {
                        continue;
                    }
                    return Err(HierarchyError::DuplicateAlias {
                        alias: alias.clone(),
                        first: nodes[prev].id.clone(),
                        second: node.id.clone(),
                    });
                }
                alias_index.insert(key, i);
                let _ = matcher.insert(alias, i);
            }
        }

        Ok(Self {
            nodes,
            index,
            alias_index,
            ancestors,
            open_ancestors,
            matcher,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[LocationNode] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&LocationNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_at(&self, idx: usize) -> &LocationNode {
        &self.nodes[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Node id for a surface string, after case-folding and whitespace
    /// normalization. Absence is not an error.
    pub fn resolve(&self, surface: &str) -> Option<&str> {
        self.alias_index
            .get(&normalize_phrase(surface))
            .map(|&i| self.nodes[i].id.as_str())
    }

    pub fn stop_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter(|n| n.stop).map(|n| n.id.as_str())
    }

    /// Ids of all strict ancestors, in declaration order.
    pub fn ancestors(&self, id: &str) -> Result<Vec<&str>, HierarchyError> {
        let i = self.require(id)?;
        Ok((0..self.nodes.len())
            .filter(|&j| self.ancestors[i].contains(j))
            .map(|j| self.nodes[j].id.as_str())
            .collect())
    }

    pub fn related(&self, a: &str, b: &str) -> Result<bool, HierarchyError> {
        Ok(self.related_idx(self.require(a)?, self.require(b)?))
    }

    pub fn relation(&self, a: &str, b: &str) -> Result<Relation, HierarchyError> {
        let (a, b) = (self.require(a)?, self.require(b)?);
        Ok(self.relation_idx(a, b))
    }

    pub fn related_idx(&self, a: usize, b: usize) -> bool {
        a == b
            || self.ancestors[b].contains(a)
            || self.ancestors[a].contains(b)
            || (!self.nodes[a].stop
                && !self.nodes[b].stop
                && self.open_ancestors[a]
                    .first_common(&self.open_ancestors[b])
                    .is_some())
    }

    pub fn relation_idx(&self, a: usize, b: usize) -> Relation {
        if a == b {
            return Relation::Equal;
        }
        if self.ancestors[b].contains(a) {
            return Relation::Ancestor;
        }
        if self.ancestors[a].contains(b) {
            return Relation::Descendant;
        }
        if !self.nodes[a].stop && !self.nodes[b].stop {
            if let Some(c) = self.open_ancestors[a].first_common(&self.open_ancestors[b]) {
                return Relation::CommonRelative(self.nodes[c].id.clone());
            }
        }
        if self.ancestors[a].first_common(&self.ancestors[b]).is_some() {
            Relation::BlockedByStop
        } else {
            Relation::Unrelated
        }
    }

    /// Every alias occurrence in `text`, leftmost-longest, non-overlapping.
    pub fn find_mentions(&self, text: &str) -> Vec<LocationMention> {
        self.matcher
            .find_all(text)
            .into_iter()
            .map(|m| LocationMention {
                node: *m.value,
                start: m.start,
                end: m.end,
            })
            .collect()
    }

    /// Checks that the stop list and the stop flags agree: every listed name
    /// resolves to a flagged node and every flagged node is named.
    pub fn check_stop_list<S: AsRef<str>>(&self, names: &[S]) -> Result<(), HierarchyError> {
        let mut named = vec![false; self.nodes.len()];
        for name in names {
            let name = name.as_ref();
            let &i = self
                .alias_index
                .get(&normalize_phrase(name))
                .ok_or_else(|| HierarchyError::UnresolvedStopName(name.to_string()))?;
            if !self.nodes[i].stop {
                return Err(HierarchyError::StopNameNotFlagged {
                    name: name.to_string(),
                    id: self.nodes[i].id.clone(),
                });
            }
            named[i] = true;
        }
        match self.nodes.iter().zip(&named).find(|(n, &seen)| n.stop && !seen) {
            Some((n, _)) => Err(HierarchyError::StopNodeNotListed(n.id.clone())),
            None => Ok(()),
        }
    }

    /// Serializes back to the line format accepted by [`LocationHierarchy::parse`].
    pub fn to_definition(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!(
                "{}|{}|{}|{}|{}|{}\n",
                n.id,
                n.scale.code(),
                n.canonical_name,
                n.parents.join(","),
                n.aliases.join(","),
                u8::from(n.stop)
            ));
        }
        out
    }

    fn require(&self, id: &str) -> Result<usize, HierarchyError> {
        self.index_of(id)
            .ok_or_else(|| HierarchyError::UnknownId(id.to_string()))
    }
}

/// Convenience wrapper over [`LocationHierarchy::parse`].
pub fn load_hierarchy(definition_text: &str) -> Result<LocationHierarchy, HierarchyError> {
    LocationHierarchy::parse(definition_text)
}

/// Parses a stop list: one surface name per line, `#` comments allowed.
pub fn parse_stop_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn split_list(field: &str) -> Vec<String> {
    field
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_record(line: &str) -> Result<LocationNode, String> {
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 `|`-separated fields, found {}", fields.len()));
    }
    let id = fields[0].trim();
    if id.is_empty() {
        return Err("empty node id".into());
    }
    let stop = match fields[5].trim() {
        "0" => false,
        "1" => true,
        other => return Err(format!("stop flag must be 0 or 1, got `{other}`")),
    };
    Ok(LocationNode {
        id: id.to_string(),
        scale: fields[1].parse()?,
        canonical_name: fields[2].trim().to_string(),
        parents: split_list(fields[3]),
        aliases: split_list(fields[4]),
        stop,
    })
}

/// Orders nodes so every parent precedes its children, or reports a cycle.
fn topological_order(
    nodes: &[LocationNode],
    parents: &[Vec<usize>],
) -> Result<Vec<usize>, HierarchyError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; nodes.len()];
    let mut order = Vec::with_capacity(nodes.len());
    for root in 0..nodes.len() {
        if mark[root] != Mark::New {
            continue;
        }
        // (node, next parent slot to visit)
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Active;
        while let Some(top) = stack.len().checked_sub(1) {
            let (node, slot) = stack[top];
            if let Some(&p) = parents[node].get(slot) {
                stack[top].1 += 1;
                match mark[p] {
                    Mark::New => {
                        mark[p] = Mark::Active;
                        stack.push((p, 0));
                    }
                    Mark::Active => {
                        let start = stack.iter().position(|&(n, _)| n == p).unwrap_or(0);
                        let mut path: Vec<String> =
                            stack[start..].iter().map(|&(n, _)| nodes[n].id.clone()).collect();
                        path.push(nodes[p].id.clone());
                        return Err(HierarchyError::Cycle(path));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                order.push(node);
                stack.pop();
            }
        }
    }
    Ok(order)
}
