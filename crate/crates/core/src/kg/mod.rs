//! Knowledge-graph memory: triple extraction, the per-step update, sub-graph
//! partitioning, and the object candidates used by the decoder's graph mask.

mod extract;
mod graph;
mod partition;
mod triple;

use std::collections::BTreeSet;

pub use extract::{extract_triples, RuleExtractor, TripleExtractor};
pub use graph::{graph_update, snapshot, KnowledgeGraph, PLAYER};
pub use partition::{partition, partition_by_name, PartitionStrategy, SubGraph, SubGraphSet};
pub use triple::{normalize, Triple};

use crate::encoders::{split_words, Vocabulary, PAD, UNK};

/// Token ids of every node word that the vocabulary knows, ascending.
/// The player node is not an object.
pub fn object_candidates(kg: &KnowledgeGraph, vocab: &Vocabulary) -> Vec<usize> {
    let mut ids = BTreeSet::new();
    for node in kg.nodes() {
        if node == PLAYER {
            continue;
        }
        for word in split_words(node) {
            if let Some(id) = vocab.get(&word) {
                if id != PAD && id != UNK {
                    ids.insert(id);
                }
            }
        }
    }
    ids.into_iter().collect()
}
