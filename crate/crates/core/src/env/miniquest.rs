use std::collections::BTreeSet;
use std::sync::Arc;

use super::world::{is_direction, WorldSpec, INVENTORY};
use super::{ObservationBundle, StepOutcome, TextEnv, EMPTY_HANDED, NOTHING_HAPPENS};
use crate::decoder::TemplateSet;
use crate::encoders::Vocabulary;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Location {
    Room(usize),
    Inventory,
    Inside(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Command {
    Look,
    Go(String),
    Take(usize),
    Drop(usize),
    Open(usize),
    Unlock(usize, Option<usize>),
    Put(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
struct WorldState {
    room: usize,
    locations: Vec<Location>,
    open: Vec<bool>,
    locked: Vec<bool>,
    fired: Vec<bool>,
    score: i64,
    feed: String,
    last_action: String,
}

/// Deterministic interpreter for a [`WorldSpec`].
///
/// Cloning copies the whole mutable state; the spec and template set are
/// shared.
#[derive(Clone, Debug)]
pub struct MiniQuest {
    spec: Arc<WorldSpec>,
    templates: Arc<TemplateSet>,
    state: WorldState,
}

impl MiniQuest {
    pub fn new(spec: WorldSpec, templates: TemplateSet) -> Result<Self> {
        spec.validate()?;
        Ok(Self::from_shared(Arc::new(spec), Arc::new(templates)))
    }

    pub fn from_shared(spec: Arc<WorldSpec>, templates: Arc<TemplateSet>) -> Self {
        let state = initial_state(&spec);
        Self {
            spec,
            templates,
            state,
        }
    }

    /// The bundled world with its bundled templates.
    pub fn bundled() -> Self {
        Self::new(WorldSpec::miniquest(), bundled_templates()).expect("bundled world")
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn score(&self) -> i64 {
        self.state.score
    }

    pub fn room_id(&self) -> &str {
        &self.spec.rooms[self.state.room].id
    }

    fn visible(&self, obj: usize) -> bool {
        match self.state.locations[obj] {
            Location::Room(r) => r == self.state.room,
            Location::Inventory => true,
            Location::Inside(c) => self.state.open[c] && self.visible(c),
        }
    }

    fn held(&self, obj: usize) -> bool {
        self.state.locations[obj] == Location::Inventory
    }

    fn interactables(&self) -> Vec<String> {
        (0..self.spec.objects.len())
            .filter(|&o| self.visible(o) && !self.held(o))
            .map(|o| self.spec.objects[o].id.clone())
            .collect()
    }

    fn inventory_items(&self) -> Vec<String> {
        (0..self.spec.objects.len())
            .filter(|&o| self.held(o))
            .map(|o| self.spec.objects[o].id.clone())
            .collect()
    }

    fn room_text(&self) -> String {
        let room = &self.spec.rooms[self.state.room];
        let mut text = format!("{}. {}", room.title, room.description);
        let seen: Vec<String> = (0..self.spec.objects.len())
            .filter(|&o| self.visible(o) && !self.held(o))
            .map(|o| {
                let obj = &self.spec.objects[o];
                if !obj.container {
                    obj.id.clone()
                } else if self.state.locked[o] {
                    format!("{} (locked)", obj.id)
                } else if self.state.open[o] {
                    format!("{} (open)", obj.id)
                } else {
                    format!("{} (closed)", obj.id)
                }
            })
            .collect();
        if !seen.is_empty() {
            text.push_str(&format!(" You see: {}.", seen.join(", ")));
        }
        text
    }

    fn inventory_text(&self) -> String {
        let items = self.inventory_items();
        if items.is_empty() {
            EMPTY_HANDED.to_string()
        } else {
            format!("you are carrying: {}", items.join(", "))
        }
    }

    fn parse(&self, action: &str) -> Option<Command> {
        let (t, objects) = self.templates.parse_action(action)?;
        let template = self.templates.get(t)?;
        let words: Vec<&str> = template.words().collect();
        let obj = |i: usize| self.spec.object_index(objects.get(i)?);
        match (words.as_slice(), objects.len()) {
            (["look"], 0) => Some(Command::Look),
            ([dir], 0) if is_direction(dir) => Some(Command::Go((*dir).to_string())),
            (["take"], 1) => Some(Command::Take(obj(0)?)),
            (["drop"], 1) => Some(Command::Drop(obj(0)?)),
            (["open"], 1) => Some(Command::Open(obj(0)?)),
            (["unlock"], 1) => Some(Command::Unlock(obj(0)?, None)),
            (["unlock", "with"], 2) => Some(Command::Unlock(obj(0)?, Some(obj(1)?))),
            (["put", "in"], 2) => Some(Command::Put(obj(0)?, obj(1)?)),
            _ => None,
        }
    }

    /// Applies a command if its preconditions hold; returns the canonical
    /// event name and default feedback.
    fn execute(&mut self, cmd: &Command) -> Option<(String, String)> {
        let name = |o: usize| self.spec.objects[o].id.clone();
        match *cmd {
            Command::Look => Some(("look".into(), self.room_text())),
            Command::Go(ref dir) => {
                let to = self.spec.rooms[self.state.room].exits.get(dir)?;
                self.state.room = self.spec.room_index(to)?;
                Some((dir.clone(), self.room_text()))
            }
            Command::Take(o) => {
                if !self.visible(o) || self.held(o) || !self.spec.objects[o].portable {
                    return None;
                }
                self.state.locations[o] = Location::Inventory;
                Some((format!("take {}", name(o)), "Taken.".into()))
            }
            Command::Drop(o) => {
                if !self.held(o) {
                    return None;
                }
                self.state.locations[o] = Location::Room(self.state.room);
                Some((format!("drop {}", name(o)), "Dropped.".into()))
            }
            Command::Open(o) => {
                let spec = &self.spec.objects[o];
                if !self.visible(o) || !spec.container || self.state.open[o] || self.state.locked[o]
                {
                    return None;
                }
                self.state.open[o] = true;
                Some((format!("open {}", name(o)), "Opened.".into()))
            }
            Command::Unlock(o, with) => {
                if !self.visible(o) || !self.state.locked[o] {
                    return None;
                }
                let key = self.spec.object_index(self.spec.objects[o].key.as_deref()?)?;
                if !self.held(key) || with.is_some_and(|w| w != key) {
                    return None;
                }
                self.state.locked[o] = false;
                Some((format!("unlock {}", name(o)), "Unlocked.".into()))
            }
            Command::Put(o, c) => {
                if o == c
                    || !self.held(o)
                    || !self.visible(c)
                    || !self.spec.objects[c].container
                    || !self.state.open[c]
                {
                    return None;
                }
                self.state.locations[o] = Location::Inside(c);
                Some((format!("put {} in {}", name(o), name(c)), "Done.".into()))
            }
        }
    }

    fn snapshot(&self) -> ObservationBundle {
        ObservationBundle {
            desc: self.room_text(),
            inv: self.inventory_text(),
            feed: self.state.feed.clone(),
            last_action: self.state.last_action.clone(),
            score: self.state.score,
            interactables: self.interactables(),
            inventory_items: self.inventory_items(),
            room_id: self.room_id().to_string(),
        }
    }

    /// Every template filled with every combination of world object ids.
    fn candidate_actions(&self) -> Vec<String> {
        let ids: Vec<&str> = self.spec.objects.iter().map(|o| o.id.as_str()).collect();
        let mut out = Vec::new();
        for t in self.templates.iter() {
            match t.slot_count() {
                0 => out.extend(t.render::<&str>(&[]).ok()),
                1 => out.extend(ids.iter().filter_map(|a| t.render(&[a]).ok())),
                _ => {
                    for a in &ids {
                        for b in &ids {
                            out.extend(t.render(&[a, b]).ok());
                        }
                    }
                }
            }
        }
        out
    }
}

fn initial_state(spec: &WorldSpec) -> WorldState {
    let locations = spec
        .objects
        .iter()
        .map(|o| {
            if o.location == INVENTORY {
                Location::Inventory
            } else if let Some(r) = spec.room_index(&o.location) {
                Location::Room(r)
            } else {
                Location::Inside(spec.object_index(&o.location).expect("validated location"))
            }
        })
        .collect();
    WorldState {
        room: spec.room_index(&spec.start).expect("validated start"),
        locations,
        open: spec.objects.iter().map(|o| o.open).collect(),
        locked: spec.objects.iter().map(|o| o.locked).collect(),
        fired: vec![false; spec.rules.len()],
        score: 0,
        feed: String::new(),
        last_action: "look".into(),
    }
}

pub fn bundled_templates() -> TemplateSet {
    TemplateSet::parse(include_str!("../../../../assets/miniquest/templates.txt"))
        .expect("bundled templates are valid")
}

/// Every string the world can show the agent, for building a vocabulary.
pub fn world_texts(spec: &WorldSpec, templates: &TemplateSet) -> Vec<String> {
    let mut texts = vec![
        EMPTY_HANDED.to_string(),
        NOTHING_HAPPENS.to_string(),
        "you are carrying: Taken. Dropped. Opened. Unlocked. Done. You see: (locked) (open) (closed)".to_string(),
        "look".to_string(),
    ];
    texts.extend(is_direction_words());
    for room in &spec.rooms {
        texts.push(format!("{} {} {}", room.id, room.title, room.description));
    }
    for obj in &spec.objects {
        texts.push(format!("{} {}", obj.id, obj.description));
    }
    for rule in &spec.rules {
        texts.push(rule.on.clone());
        texts.extend(rule.message.clone());
    }
    for t in templates.iter() {
        texts.extend(t.words().map(str::to_string));
    }
    texts
}

fn is_direction_words() -> impl Iterator<Item = String> {
    crate::env::DIRECTIONS.iter().map(|d| d.to_string())
}

/// Vocabulary covering everything MiniQuest can print, in sorted order.
pub fn miniquest_vocabulary() -> Vocabulary {
    Vocabulary::parse(include_str!("../../../../assets/miniquest/vocab.txt")).expect("bundled vocabulary is valid")
}

impl TextEnv for MiniQuest {
    fn reset(&mut self, _seed: u64) -> ObservationBundle {
        self.state = initial_state(&self.spec);
        self.state.feed = self.room_text();
        self.snapshot()
    }

    fn step(&mut self, action: &str) -> StepOutcome {
        let before = self.state.clone();
        let normalized = action.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let executed = self.parse(&normalized).and_then(|cmd| self.execute(&cmd));
        let (valid, reward) = match executed {
            None => {
                self.state = before;
                self.state.feed = NOTHING_HAPPENS.to_string();
                (false, 0)
            }
            Some((event, feed)) => {
                self.state.feed = feed;
                let mut reward = 0;
                for (i, rule) in self.spec.rules.iter().enumerate() {
                    let room_ok = rule
                        .requires_room
                        .as_ref()
                        .is_none_or(|r| *r == self.spec.rooms[self.state.room].id);
                    if !self.state.fired[i] && rule.on == event && room_ok {
                        self.state.fired[i] = true;
                        reward += rule.reward;
                        if let Some(m) = &rule.message {
                            self.state.feed = m.clone();
                        }
                    }
                }
                self.state.score += reward;
                (true, reward)
            }
        };
        self.state.last_action = normalized;
        StepOutcome {
            obs: self.snapshot(),
            reward: reward as f64,
            done: self.state.score >= self.spec.max_score(),
            valid,
        }
    }

    fn valid_actions(&self) -> BTreeSet<String> {
        self.candidate_actions()
            .into_iter()
            .filter(|a| {
                let mut probe = self.clone();
                probe.step(a).valid
            })
            .collect()
    }

    fn max_score(&self) -> i64 {
        self.spec.max_score()
    }

    fn observation(&self) -> ObservationBundle {
        self.snapshot()
    }
}

/// Replays the stored walkthrough and returns it if it reaches the maximum
/// score with every step valid.
pub fn walkthrough(spec: &WorldSpec, templates: &TemplateSet) -> Result<Vec<String>> {
    let mut env = MiniQuest::new(spec.clone(), templates.clone())?;
    env.reset(0);
    let mut prev = 0;
    for (i, action) in spec.walkthrough.iter().enumerate() {
        let out = env.step(action);
        if !out.valid {
            return Err(Error::Replay {
                step: i,
                reason: format!("`{action}` was rejected"),
            });
        }
        if out.obs.score < prev {
            return Err(Error::Replay {
                step: i,
                reason: "score decreased".into(),
            });
        }
        prev = out.obs.score;
        let last = i + 1 == spec.walkthrough.len();
        if out.done != last {
            return Err(Error::Replay {
                step: i,
                reason: format!("done = {} before the final action", out.done),
            });
        }
    }
    if prev != spec.max_score() {
        return Err(Error::Replay {
            step: spec.walkthrough.len(),
            reason: format!("final score {prev} != max {}", spec.max_score()),
        });
    }
    Ok(spec.walkthrough.clone())
}
