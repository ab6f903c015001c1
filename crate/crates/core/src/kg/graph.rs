use std::collections::{BTreeSet, HashMap};

use super::triple::Triple;
use crate::error::{Error, Result};

pub const PLAYER: &str = "you";

/// The agent's persistent memory of the world.
///
/// Node indices are assigned on first sight and never change, even if a node
/// later drops out of every edge.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KnowledgeGraph {
    edges: BTreeSet<Triple>,
    current_room: String,
    node_index: HashMap<String, usize>,
    latest: BTreeSet<Triple>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph directly from edges, e.g. for tests or snapshots.
    pub fn from_edges(edges: impl IntoIterator<Item = Triple>, current_room: &str) -> Self {
        let mut kg = Self::new();
        let edges: BTreeSet<Triple> = edges.into_iter().collect();
        for t in &edges {
            kg.register(t);
        }
        kg.latest = edges.clone();
        kg.edges = edges;
        kg.current_room = current_room.to_string();
        kg
    }

    fn register(&mut self, t: &Triple) {
        for n in [t.subject(), t.object()] {
            if !self.node_index.contains_key(n) {
                let next = self.node_index.len();
                self.node_index.insert(n.to_string(), next);
            }
        }
    }

    pub fn edges(&self) -> &BTreeSet<Triple> {
        &self.edges
    }

    /// Triples passed to the most recent update.
    pub fn latest(&self) -> &BTreeSet<Triple> {
        &self.latest
    }

    pub fn current_room(&self) -> &str {
        &self.current_room
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Exactly the strings that occur as subject or object of some edge.
    pub fn nodes(&self) -> BTreeSet<&str> {
        self.edges
            .iter()
            .flat_map(|t| [t.subject(), t.object()])
            .collect()
    }

    pub fn node_index(&self, node: &str) -> Option<usize> {
        self.node_index.get(node).copied()
    }

    /// Replaces every player edge with the new triples and keeps all other
    /// history.
    pub fn update(&mut self, new_triples: BTreeSet<Triple>) -> Result<()> {
        let room = new_triples
            .iter()
            .find(|t| t.subject() == PLAYER && t.relation() == "in")
            .map(|t| t.object().to_string())
            .ok_or(Error::MissingPlayerLocation)?;
        self.edges.retain(|t| t.subject() != PLAYER);
        for t in &new_triples {
            self.register(t);
        }
        self.edges.extend(new_triples.iter().cloned());
        self.latest = new_triples;
        self.current_room = room;
        Ok(())
    }

    /// One line per edge, sorted.
    pub fn to_snapshot(&self) -> String {
        snapshot(&self.edges)
    }

    pub fn from_snapshot(text: &str, current_room: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let t = match fields.as_slice() {
                [s, r, o] => Triple::new(s, r, o),
                _ => None,
            };
            edges.push(t.ok_or_else(|| {
                Error::Config(format!("snapshot line {}: expected 3 tab-separated fields", i + 1))
            })?);
        }
        Ok(Self::from_edges(edges, current_room))
    }
}

/// Functional form of [`KnowledgeGraph::update`].
pub fn graph_update(kg: &KnowledgeGraph, new_triples: BTreeSet<Triple>) -> Result<KnowledgeGraph> {
    let mut next = kg.clone();
    next.update(new_triples)?;
    Ok(next)
}

pub fn snapshot<'a>(edges: impl IntoIterator<Item = &'a Triple>) -> String {
    let mut lines: Vec<String> = edges.into_iter().map(Triple::to_line).collect();
    lines.sort();
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}
