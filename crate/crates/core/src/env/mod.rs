//! Text-game environments. [`MiniQuest`] interprets a small TOML world and
//! enumerates valid actions by brute force over a cloned state.

mod miniquest;
mod world;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use miniquest::{bundled_templates, miniquest_vocabulary, walkthrough, world_texts, MiniQuest};
pub use world::{is_direction, ObjectSpec, RoomSpec, RuleSpec, WorldSpec, DIRECTIONS};

/// Feedback for any action that changes nothing.
pub const NOTHING_HAPPENS: &str = "Nothing happens";
pub const EMPTY_HANDED: &str = "you are empty-handed";

/// Everything the agent sees after one step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationBundle {
    pub desc: String,
    pub inv: String,
    pub feed: String,
    pub last_action: String,
    pub score: i64,
    pub interactables: Vec<String>,
    pub inventory_items: Vec<String>,
    pub room_id: String,
}

impl ObservationBundle {
    /// The four textual components in encoder order.
    pub fn components(&self) -> [&str; 4] {
        [&self.desc, &self.inv, &self.feed, &self.last_action]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub obs: ObservationBundle,
    pub reward: f64,
    pub done: bool,
    pub valid: bool,
}

/// The environment contract used by the trainer.
pub trait TextEnv: Send {
    /// `seed` is reserved for stochastic worlds.
    fn reset(&mut self, seed: u64) -> ObservationBundle;
    fn step(&mut self, action: &str) -> StepOutcome;
    /// Actions whose feedback is not [`NOTHING_HAPPENS`] in the current state.
    fn valid_actions(&self) -> BTreeSet<String>;
    fn max_score(&self) -> i64;
    fn observation(&self) -> ObservationBundle;
}
