use std::collections::BTreeSet;

use super::graph::PLAYER;
use super::triple::Triple;
use crate::env::{is_direction, ObservationBundle};

/// Source of triples for one observation. The rule-based extractor is the
/// default; an OpenIE-style service can be plugged in behind this trait.
pub trait TripleExtractor: Send + Sync {
    fn extract(
        &self,
        obs: &ObservationBundle,
        prev_room: &str,
        nav_action: Option<&str>,
    ) -> BTreeSet<Triple>;
}

/// Uses the object lists the environment reports.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleExtractor;

impl TripleExtractor for RuleExtractor {
    fn extract(
        &self,
        obs: &ObservationBundle,
        prev_room: &str,
        nav_action: Option<&str>,
    ) -> BTreeSet<Triple> {
        extract_triples(
            obs,
            prev_room,
            nav_action,
            &obs.interactables,
            &obs.inventory_items,
        )
    }
}

/// Inventory items become `(you, have, item)`, other visible objects
/// `(object, in, room)`, the player is placed in the room, and a successful
/// move in direction `d` adds `(previous room, d of, room)`.
///
/// `nav_action` must only be passed when the move succeeded.
pub fn extract_triples(
    obs: &ObservationBundle,
    prev_room: &str,
    nav_action: Option<&str>,
    interactables: &[String],
    inventory_items: &[String],
) -> BTreeSet<Triple> {
    let room = obs.room_id.as_str();
    let mut out = BTreeSet::new();
    for item in inventory_items {
        out.extend(Triple::new(PLAYER, "have", item));
    }
    for o in interactables {
        if !inventory_items.contains(o) {
            out.extend(Triple::new(o, "in", room));
        }
    }
    out.extend(Triple::new(PLAYER, "in", room));
    if let Some(dir) = nav_action.map(str::trim) {
        if is_direction(dir) && !prev_room.trim().is_empty() {
            out.extend(Triple::new(prev_room, &format!("{dir} of"), room));
        }
    }
    out
}
