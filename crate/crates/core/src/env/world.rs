use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INVENTORY: &str = "inventory";

/// Static description of a text world, read from a TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub name: String,
    pub start: String,
    #[serde(default)]
    pub walkthrough: Vec<String>,
    pub rooms: Vec<RoomSpec>,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub id: String,
    pub title: String,
    pub description: String,
    #[serde(default)]
    pub exits: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    /// Room id, `"inventory"`, or the id of a containing object.
    pub location: String,
    pub description: String,
    #[serde(default)]
    pub portable: bool,
    #[serde(default)]
    pub container: bool,
    #[serde(default)]
    pub open: bool,
    #[serde(default)]
    pub locked: bool,
    #[serde(default)]
    pub key: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    /// Canonical event, e.g. `take key` or `unlock chest`.
    pub on: String,
    pub reward: i64,
    #[serde(default)]
    pub message: Option<String>,
    #[serde(default)]
    pub requires_room: Option<String>,
}

pub const DIRECTIONS: [&str; 10] = [
    "north",
    "south",
    "east",
    "west",
    "up",
    "down",
    "northeast",
    "northwest",
    "southeast",
    "southwest",
];

pub fn is_direction(word: &str) -> bool {
    DIRECTIONS.contains(&word)
}

impl WorldSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: WorldSpec = toml::from_str(text).map_err(|e| Error::World(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The bundled four-room world.
    pub fn miniquest() -> Self {
        Self::parse(include_str!("../../../../assets/miniquest/world.toml"))
            .expect("bundled MiniQuest world is valid")
    }

    pub fn max_score(&self) -> i64 {
        self.rules.iter().map(|r| r.reward).sum()
    }

    pub fn room_index(&self, id: &str) -> Option<usize> {
        self.rooms.iter().position(|r| r.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::World(m));
        let mut ids = BTreeSet::new();
        for r in &self.rooms {
            if !is_name(&r.id) || !ids.insert(r.id.as_str()) {
                return err(format!("bad or duplicate room id `{}`", r.id));
            }
        }
        if self.room_index(&self.start).is_none() {
            return err(format!("start room `{}` does not exist", self.start));
        }
        for r in &self.rooms {
            for (dir, to) in &r.exits {
                if !is_direction(dir) {
                    return err(format!("room `{}` has unknown direction `{dir}`", r.id));
                }
                if self.room_index(to).is_none() {
                    return err(format!("exit `{dir}` of `{}` leads to unknown room `{to}`", r.id));
                }
            }
        }
        for o in &self.objects {
            if !is_name(&o.id) || !ids.insert(o.id.as_str()) || o.id == INVENTORY {
                return err(format!("bad or duplicate object id `{}`", o.id));
            }
        }
        for o in &self.objects {
            let ok = o.location == INVENTORY
                || self.room_index(&o.location).is_some()
                || self
                    .objects
                    .iter()
                    .any(|c| c.id == o.location && c.container && c.id != o.id);
            if !ok {
                return err(format!("object `{}` has unknown location `{}`", o.id, o.location));
            }
            if o.locked {
                match &o.key {
                    Some(k) if self.object_index(k).is_some() => {}
                    _ => return err(format!("locked object `{}` needs an existing key", o.id)),
                }
                if o.open {
                    return err(format!("object `{}` cannot be both open and locked", o.id));
                }
            }
        }
        // containment must bottom out in a room or the inventory
        for o in &self.objects {
            let mut loc = o.location.as_str();
            let mut hops = 0;
            while let Some(parent) = self.objects.iter().find(|c| c.id == loc) {
                loc = parent.location.as_str();
                hops += 1;
                if hops > self.objects.len() {
                    return err(format!("containment cycle through `{}`", o.id));
                }
            }
        }
        for rule in &self.rules {
            if rule.reward < 0 {
                return err(format!("rule `{}` has a negative reward", rule.on));
            }
            if rule.on.trim().is_empty() {
                return err("rule with empty event".into());
            }
            if let Some(room) = &rule.requires_room {
                if self.room_index(room).is_none() {
                    return err(format!("rule `{}` requires unknown room `{room}`", rule.on));
                }
            }
        }
        Ok(())
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miniquest_shape() {
        let w = WorldSpec::miniquest();
        let rooms: Vec<&str> = w.rooms.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(rooms, ["cell", "vault", "hall", "garden"]);
        let objects: Vec<&str> = w.objects.iter().map(|o| o.id.as_str()).collect();
        assert_eq!(objects, ["key", "chest", "gem", "lamp"]);
        assert_eq!(w.max_score(), 20);
        assert_eq!(w.walkthrough.len(), 5);
    }

    #[test]
    fn dangling_exit_is_rejected() {
        let text = r#"
name = "x"
start = "a"
rooms = [{ id = "a", title = "A", description = "", exits = { east = "nowhere" } }]
objects = []
"#;
        assert!(matches!(WorldSpec::parse(text), Err(Error::World(_))));
    }

    #[test]
    fn negative_reward_is_rejected() {
        let text = r#"
name = "x"
start = "a"
rooms = [{ id = "a", title = "A", description = "" }]
objects = []
rules = [{ on = "look", reward = -1 }]
"#;
        assert!(WorldSpec::parse(text).is_err());
    }
}
