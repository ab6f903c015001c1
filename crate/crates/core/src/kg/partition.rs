use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::graph::{KnowledgeGraph, PLAYER};
use super::triple::Triple;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PartitionStrategy {
    /// connectivity, current-room objects, inventory, history without the player
    Full,
    /// current-room and inventory parts merged
    NoRelational,
    /// history folded back into connectivity and room membership
    NoTemporal,
    /// the four full parts built from the latest triples only
    NoHistory,
}

impl PartitionStrategy {
    pub const ALL: [PartitionStrategy; 4] = [
        PartitionStrategy::Full,
        PartitionStrategy::NoRelational,
        PartitionStrategy::NoTemporal,
        PartitionStrategy::NoHistory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PartitionStrategy::Full => "full",
            PartitionStrategy::NoRelational => "no-relational",
            PartitionStrategy::NoTemporal => "no-temporal",
            PartitionStrategy::NoHistory => "no-history",
        }
    }

    pub fn num_parts(self) -> usize {
        self.labels().len()
    }

    /// Channel names used in attention traces.
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            PartitionStrategy::Full | PartitionStrategy::NoHistory => {
                &["connectivity", "item_in_room", "item_in_inv", "history"]
            }
            PartitionStrategy::NoRelational => &["connectivity", "item_in_room_or_inv", "history"],
            PartitionStrategy::NoTemporal => &["connectivity", "item_in_room", "item_in_inv"],
        }
    }
}

impl fmt::Display for PartitionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PartitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// One part of a partition, with nodes ordered by the parent graph's indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SubGraph {
    pub edges: BTreeSet<Triple>,
    pub nodes: Vec<String>,
}

impl SubGraph {
    fn new(edges: BTreeSet<Triple>, kg: &KnowledgeGraph) -> Self {
        let mut nodes: Vec<String> = edges
            .iter()
            .flat_map(|t| [t.subject(), t.object()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect();
        nodes.sort_by_key(|n| (kg.node_index(n).unwrap_or(usize::MAX), n.clone()));
        Self { edges, nodes }
    }

    /// The whole graph as a single part.
    pub fn whole(kg: &KnowledgeGraph) -> Self {
        Self::new(kg.edges().clone(), kg)
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Symmetric adjacency with self-loops; row `i` is `self.nodes[i]`.
    pub fn to_adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let pos = |name: &str| self.nodes.iter().position(|x| x == name);
        let mut adj = vec![vec![false; n]; n];
        for (i, row) in adj.iter_mut().enumerate() {
            row[i] = true;
        }
        for t in &self.edges {
            if let (Some(a), Some(b)) = (pos(t.subject()), pos(t.object())) {
                adj[a][b] = true;
                adj[b][a] = true;
            }
        }
        adj
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubGraphSet {
    pub parts: Vec<SubGraph>,
    pub strategy: PartitionStrategy,
}

impl SubGraphSet {
    pub fn union(&self) -> BTreeSet<Triple> {
        self.parts.iter().flat_map(|p| p.edges.iter().cloned()).collect()
    }
}

fn is_connectivity(t: &Triple) -> bool {
    t.relation().ends_with(" of") && !t.involves(PLAYER)
}

fn is_inventory(t: &Triple) -> bool {
    t.subject() == PLAYER && t.relation() == "have"
}

/// Room-membership edges for the current room, plus any remaining player
/// edge (in practice `(you, in, room)`).
fn is_current_room(t: &Triple, room: &str) -> bool {
    (t.relation() == "in" && t.object() == room) || (t.involves(PLAYER) && !is_inventory(t))
}

fn full_parts(edges: &BTreeSet<Triple>, room: &str) -> [BTreeSet<Triple>; 4] {
    let pick = |f: &dyn Fn(&Triple) -> bool| edges.iter().filter(|t| f(t)).cloned().collect();
    [
        pick(&is_connectivity),
        pick(&|t| is_current_room(t, room)),
        pick(&is_inventory),
        pick(&|t| !t.involves(PLAYER)),
    ]
}

/// Splits `kg` into sub-graphs whose union is the source edge set (the
/// latest-triple set for [`PartitionStrategy::NoHistory`]). Parts may overlap.
pub fn partition(kg: &KnowledgeGraph, strategy: PartitionStrategy) -> SubGraphSet {
    let room = kg.current_room();
    let parts: Vec<BTreeSet<Triple>> = match strategy {
        PartitionStrategy::Full => full_parts(kg.edges(), room).into(),
        PartitionStrategy::NoHistory => full_parts(kg.latest(), room).into(),
        PartitionStrategy::NoRelational => {
            let [c, r, i, h] = full_parts(kg.edges(), room);
            vec![c, r.union(&i).cloned().collect(), h]
        }
        PartitionStrategy::NoTemporal => {
            let [c, r, i, h] = full_parts(kg.edges(), room);
            let connectivity: BTreeSet<Triple> =
                c.union(&h.iter().filter(|t| is_connectivity(t)).cloned().collect()).cloned().collect();
            let membership: BTreeSet<Triple> = r
                .iter()
                .cloned()
                .chain(h.into_iter().filter(|t| !is_connectivity(t)))
                .collect();
            vec![connectivity, membership, i]
        }
    };
    SubGraphSet {
        parts: parts.into_iter().map(|e| SubGraph::new(e, kg)).collect(),
        strategy,
    }
}

/// Parses the strategy id and partitions.
pub fn partition_by_name(kg: &KnowledgeGraph, strategy: &str) -> Result<SubGraphSet> {
    Ok(partition(kg, strategy.parse()?))
}
