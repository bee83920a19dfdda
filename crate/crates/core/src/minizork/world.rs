//! Declarative world description, loaded from TOML.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ZorkError;

pub const WORLD_FORMAT: &str = "actelim-world";
pub const WORLD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dir {
    North,
    South,
    East,
    West,
    Up,
    Down,
}

impl Dir {
    pub const ALL: [Dir; 6] = [Dir::North, Dir::South, Dir::East, Dir::West, Dir::Up, Dir::Down];

    pub fn word(self) -> &'static str {
        match self {
            Dir::North => "north",
            Dir::South => "south",
            Dir::East => "east",
            Dir::West => "west",
            Dir::Up => "up",
            Dir::Down => "down",
        }
    }

    pub fn parse(word: &str) -> Option<Dir> {
        Some(match word {
            "north" | "n" => Dir::North,
            "south" | "s" => Dir::South,
            "east" | "e" => Dir::East,
            "west" | "w" => Dir::West,
            "up" | "u" => Dir::Up,
            "down" | "d" => Dir::Down,
            _ => return None,
        })
    }
}

/// Predicate over the world state, keyed by object or room id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Holding(String),
    Open(String),
    Lit(String),
    Moved(String),
    Defeated(String),
    InRoom(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exit {
    pub dir: Dir,
    pub to: String,
    #[serde(default)]
    pub requires: Vec<Condition>,
    #[serde(default)]
    pub blocked: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: String,
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub exits: Vec<Exit>,
    /// Per-step death probability while in this room.
    #[serde(default)]
    pub hazard: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Room(String),
    Inside(String),
    Inventory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Object {
    pub id: String,
    /// Word used in commands and in rendered text; defaults to the id.
    pub noun: String,
    pub description: String,
    pub location: Location,
    pub takeable: bool,
    pub openable: bool,
    pub open: bool,
    pub lightable: bool,
    pub movable: bool,
    /// Object that becomes visible once this one is moved.
    pub reveals: Option<String>,
    pub hidden: bool,
    pub weapon: bool,
    pub fightable: bool,
    /// Room entered by climbing this object.
    pub climb_to: Option<String>,
}

impl Default for Object {
    fn default() -> Self {
        Self {
            id: String::new(),
            noun: String::new(),
            description: String::new(),
            location: Location::Inventory,
            takeable: false,
            openable: false,
            open: false,
            lightable: false,
            movable: false,
            reveals: None,
            hidden: false,
            weapon: false,
            fightable: false,
            climb_to: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: String,
    pub when: Vec<Condition>,
    pub award: i64,
    #[serde(default)]
    pub terminal: bool,
    #[serde(default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub start_room: String,
    pub horizon: usize,
    #[serde(default = "default_penalty")]
    pub step_penalty: f64,
    pub verbs: Vec<String>,
    pub dictionary: Vec<String>,
    pub fixed_actions: Vec<String>,
    pub rooms: Vec<Room>,
    pub objects: Vec<Object>,
    pub events: Vec<Event>,
}

fn default_penalty() -> f64 {
    -1.0
}

const EGG_WORLD: &str = include_str!("../../worlds/egg.toml");
const TROLL_WORLD: &str = include_str!("../../worlds/troll.toml");

impl WorldSpec {
    pub fn from_toml(text: &str) -> Result<Self, ZorkError> {
        let mut spec: WorldSpec = toml::from_str(text).map_err(|e| ZorkError::Parse(e.to_string()))?;
        for o in &mut spec.objects {
            if o.noun.is_empty() {
                o.noun = o.id.clone();
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ZorkError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn egg() -> Self {
        Self::from_toml(EGG_WORLD).expect("bundled egg world is valid")
    }

    pub fn troll() -> Self {
        Self::from_toml(TROLL_WORLD).expect("bundled troll world is valid")
    }

    /// Bundled world by name ("egg" or "troll").
    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "egg" => Some(Self::egg()),
            "troll" => Some(Self::troll()),
            _ => None,
        }
    }

    pub fn room_index(&self, id: &str) -> Option<usize> {
        self.rooms.iter().position(|r| r.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn validate(&self) -> Result<(), ZorkError> {
        let bad = |m: String| Err(ZorkError::Spec(m));
        if self.format != WORLD_FORMAT {
            return bad(format!("format must be \"{WORLD_FORMAT}\", got \"{}\"", self.format));
        }
        if self.version != WORLD_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        let rooms: HashSet<&str> = self.rooms.iter().map(|r| r.id.as_str()).collect();
        let objects: HashSet<&str> = self.objects.iter().map(|o| o.id.as_str()).collect();
        if rooms.len() != self.rooms.len() || objects.len() != self.objects.len() {
            return bad("duplicate room or object id".into());
        }
        if !rooms.contains(self.start_room.as_str()) {
            return bad(format!("start room \"{}\" not declared", self.start_room));
        }
        let check = |c: &Condition| -> Result<(), ZorkError> {
            let ok = match c {
                Condition::InRoom(r) => rooms.contains(r.as_str()),
                Condition::Holding(o)
                | Condition::Open(o)
                | Condition::Lit(o)
                | Condition::Moved(o)
                | Condition::Defeated(o) => objects.contains(o.as_str()),
            };
            if ok {
                Ok(())
            } else {
                Err(ZorkError::Spec(format!("condition {c:?} references an undeclared id")))
            }
        };
        for room in &self.rooms {
            if !(0.0..=1.0).contains(&room.hazard) {
                return bad(format!("room {}: hazard must lie in [0, 1]", room.id));
            }
            let mut dirs = HashSet::new();
            for exit in &room.exits {
                if !rooms.contains(exit.to.as_str()) {
                    return bad(format!("room {}: exit to unknown room {}", room.id, exit.to));
                }
                if !dirs.insert(exit.dir) {
                    return bad(format!("room {}: duplicate exit {:?}", room.id, exit.dir));
                }
                exit.requires.iter().try_for_each(check)?;
            }
        }
        let mut nouns = HashMap::new();
        for o in &self.objects {
            if let Some(prev) = nouns.insert(o.noun.as_str(), o.id.as_str()) {
                return bad(format!("objects {prev} and {} share the noun \"{}\"", o.id, o.noun));
            }
            match &o.location {
                Location::Room(r) if !rooms.contains(r.as_str()) => {
                    return bad(format!("object {}: unknown room {r}", o.id));
                }
                Location::Inside(c) if !objects.contains(c.as_str()) || c == &o.id => {
                    return bad(format!("object {}: bad container {c}", o.id));
                }
                _ => {}
            }
            if let Some(r) = &o.reveals {
                if !objects.contains(r.as_str()) {
                    return bad(format!("object {}: reveals unknown object {r}", o.id));
                }
            }
            if let Some(r) = &o.climb_to {
                if !rooms.contains(r.as_str()) {
                    return bad(format!("object {}: climbs to unknown room {r}", o.id));
                }
            }
        }
        for e in &self.events {
            if e.when.is_empty() {
                return bad(format!("event {} has no conditions", e.id));
            }
            e.when.iter().try_for_each(check)?;
        }
        let mut seen = HashSet::new();
        for a in &self.fixed_actions {
            if a.trim().is_empty() || !seen.insert(a.as_str()) {
                return bad(format!("fixed action \"{a}\" is empty or duplicated"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_worlds_load() {
        let egg = WorldSpec::egg();
        assert_eq!(egg.fixed_actions.len(), 9);
        assert!(egg.dictionary.len() >= 300);
        let troll = WorldSpec::troll();
        assert_eq!(troll.fixed_actions.len(), 15);
    }

    #[test]
    fn validation_catches_bad_references() {
        let mut w = WorldSpec::egg();
        w.start_room = "nowhere".into();
        assert!(w.validate().is_err());
        let mut w = WorldSpec::egg();
        w.events[0].when.push(Condition::Holding("ghost".into()));
        assert!(w.validate().is_err());
        let mut w = WorldSpec::egg();
        w.format = "other".into();
        assert!(w.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let w = WorldSpec::troll();
        let text = toml::to_string(&w).unwrap();
        assert_eq!(WorldSpec::from_toml(&text).unwrap(), w);
    }
}
