//! Game state, command parser and interpreter.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use super::world::{Condition, Dir, Location, WorldSpec};

pub const PAD_TOKEN: &str = "<null>";
pub const DESCRIPTOR_TOKENS: usize = 50;
pub const INVENTORY_TOKENS: usize = 15;

const ARTICLES: [&str; 3] = ["the", "a", "an"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Place {
    Room(usize),
    Inside(usize),
    Inventory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObjectState {
    pub place: Place,
    pub open: bool,
    pub lit: bool,
    pub moved: bool,
    pub defeated: bool,
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    pub room: usize,
    pub objects: Vec<ObjectState>,
    pub score: i64,
    pub steps: usize,
    pub events_fired: Vec<bool>,
    pub dead: bool,
}

impl GameState {
    pub fn inventory(&self) -> impl Iterator<Item = usize> + '_ {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.place == Place::Inventory)
            .map(|(i, _)| i)
    }

    pub fn holding(&self, obj: usize) -> bool {
        self.objects[obj].place == Place::Inventory
    }

    /// Same position in the world, ignoring the step counter.
    pub fn same_position(&self, other: &GameState) -> bool {
        self.room == other.room
            && self.objects == other.objects
            && self.score == other.score
            && self.events_fired == other.events_fired
            && self.dead == other.dead
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub state: GameState,
    pub feedback: String,
    pub observation: String,
    pub reward: f64,
    pub elim: f64,
    pub done: bool,
    /// A terminal event fired or the player died; horizon cut-offs are not terminal.
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    Go(Dir),
    Take(usize),
    Drop(usize),
    Open(usize),
    Close(usize),
    Climb(usize),
    Light(usize),
    Move(usize),
    Fight(usize, Option<usize>),
    Examine(usize),
    Look,
    Inventory,
}

enum Parsed {
    Ok(Command),
    Fail(String),
}

/// Interpreter for one world.
#[derive(Debug, Clone)]
pub struct Game {
    spec: Arc<WorldSpec>,
    nouns: HashMap<String, usize>,
    known_words: HashSet<String>,
    rooms: HashMap<String, usize>,
    start: GameState,
}

impl Game {
    pub fn new(spec: WorldSpec) -> Self {
        Self::from_arc(Arc::new(spec))
    }

    pub fn from_arc(spec: Arc<WorldSpec>) -> Self {
        let rooms: HashMap<String, usize> =
            spec.rooms.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        let ids: HashMap<&str, usize> = spec.objects.iter().enumerate().map(|(i, o)| (o.id.as_str(), i)).collect();
        let nouns = spec.objects.iter().enumerate().map(|(i, o)| (o.noun.clone(), i)).collect();
        let known_words = spec.dictionary.iter().chain(&spec.verbs).cloned().collect();
        let objects = spec
            .objects
            .iter()
            .map(|o| ObjectState {
                place: match &o.location {
                    Location::Room(r) => Place::Room(rooms[r]),
                    Location::Inside(c) => Place::Inside(ids[c.as_str()]),
                    Location::Inventory => Place::Inventory,
                },
                open: o.open,
                lit: false,
                moved: false,
                defeated: false,
                hidden: o.hidden,
            })
            .collect();
        let start = GameState {
            room: rooms[&spec.start_room],
            objects,
            score: 0,
            steps: 0,
            events_fired: vec![false; spec.events.len()],
            dead: false,
        };
        Self {
            spec,
            nouns,
            known_words,
            rooms,
            start,
        }
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn initial_state(&self) -> GameState {
        self.start.clone()
    }

    fn obj_index(&self, id: &str) -> usize {
        self.spec.objects.iter().position(|o| o.id == id).expect("validated object id")
    }

    fn holds(&self, state: &GameState, c: &Condition) -> bool {
        match c {
            Condition::Holding(o) => state.holding(self.obj_index(o)),
            Condition::Open(o) => state.objects[self.obj_index(o)].open,
            Condition::Lit(o) => state.objects[self.obj_index(o)].lit,
            Condition::Moved(o) => state.objects[self.obj_index(o)].moved,
            Condition::Defeated(o) => state.objects[self.obj_index(o)].defeated,
            Condition::InRoom(r) => state.room == self.rooms[r],
        }
    }

    /// Visible in the current room, including inside open containers.
    pub fn visible_in_room(&self, state: &GameState, obj: usize) -> bool {
        let mut cur = obj;
        for _ in 0..=state.objects.len() {
            let o = &state.objects[cur];
            if o.hidden {
                return false;
            }
            match o.place {
                Place::Room(r) => return r == state.room,
                Place::Inventory => return cur != obj,
                Place::Inside(c) => {
                    if !state.objects[c].open {
                        return false;
                    }
                    cur = c;
                }
            }
        }
        false
    }

    fn accessible(&self, state: &GameState, obj: usize) -> bool {
        state.holding(obj) || self.visible_in_room(state, obj)
    }

    fn parse(&self, command: &str) -> Parsed {
        let words: Vec<String> = command
            .split_whitespace()
            .map(|w| {
                w.trim_matches(|c: char| !c.is_alphanumeric())
                    .to_lowercase()
            })
            .filter(|w| !w.is_empty() && !ARTICLES.contains(&w.as_str()))
            .collect();
        let w: Vec<&str> = words.iter().map(String::as_str).collect();
        let noun = |word: &str| -> Result<usize, String> {
            match self.nouns.get(word) {
                Some(&i) => Ok(i),
                None if self.known_words.contains(word) => Err(format!("You can't see any {word} here.")),
                None => Err(format!("I don't know the word \"{word}\".")),
            }
        };
        let unary = |verb: &str, rest: &[&str], make: fn(usize) -> Command| -> Parsed {
            match rest {
                [] => Parsed::Fail(format!("What do you want to {verb}?")),
                [x] => match noun(x) {
                    Ok(i) => Parsed::Ok(make(i)),
                    Err(m) => Parsed::Fail(m),
                },
                _ => Parsed::Fail("I didn't understand that sentence.".into()),
            }
        };
        match w.as_slice() {
            [] => Parsed::Fail("I beg your pardon?".into()),
            [d] if Dir::parse(d).is_some() => Parsed::Ok(Command::Go(Dir::parse(d).unwrap())),
            ["go", d] => match Dir::parse(d) {
                Some(d) => Parsed::Ok(Command::Go(d)),
                None => Parsed::Fail("You can't go that way.".into()),
            },
            ["look" | "l"] => Parsed::Ok(Command::Look),
            ["inventory" | "i"] => Parsed::Ok(Command::Inventory),
            ["pick", "up", rest @ ..] => unary("take", rest, Command::Take),
            ["take" | "get", rest @ ..] => unary("take", rest, Command::Take),
            ["drop", rest @ ..] => unary("drop", rest, Command::Drop),
            ["open", rest @ ..] => unary("open", rest, Command::Open),
            ["close", rest @ ..] => unary("close", rest, Command::Close),
            ["climb", rest @ ..] => unary("climb", rest, Command::Climb),
            ["light", rest @ ..] => unary("light", rest, Command::Light),
            ["move" | "push", rest @ ..] => unary("move", rest, Command::Move),
            ["examine" | "x", rest @ ..] => unary("examine", rest, Command::Examine),
            ["fight" | "attack" | "kill", rest @ ..] => match rest {
                [x] => match noun(x) {
                    Ok(i) => Parsed::Ok(Command::Fight(i, None)),
                    Err(m) => Parsed::Fail(m),
                },
                [x, "with", y] => match (noun(x), noun(y)) {
                    (Ok(i), Ok(j)) => Parsed::Ok(Command::Fight(i, Some(j))),
                    (Err(m), _) | (_, Err(m)) => Parsed::Fail(m),
                },
                [] => Parsed::Fail("What do you want to attack?".into()),
                _ => Parsed::Fail("I didn't understand that sentence.".into()),
            },
            [v, ..] if self.known_words.contains(*v) => Parsed::Fail(format!("You can't {v} that.")),
            [v, ..] => Parsed::Fail(format!("I don't know the word \"{v}\".")),
        }
    }

    /// Applies a command; returns feedback on success, `Err(feedback)` when
    /// the command is inapplicable.
    fn apply(&self, s: &mut GameState, cmd: Command) -> Result<String, String> {
        let noun = |i: usize| self.spec.objects[i].noun.as_str();
        match cmd {
            Command::Look => Ok(self.room_text(s)),
            Command::Inventory => Ok(self.inventory_text(s)),
            Command::Go(dir) => {
                let room = &self.spec.rooms[s.room];
                let exit = room
                    .exits
                    .iter()
                    .find(|e| e.dir == dir)
                    .ok_or_else(|| "You can't go that way.".to_string())?;
                if !exit.requires.iter().all(|c| self.holds(s, c)) {
                    return Err(exit.blocked.clone().unwrap_or_else(|| "The way is blocked.".into()));
                }
                s.room = self.rooms[&exit.to];
                Ok(self.room_text(s))
            }
            Command::Take(i) => {
                if s.holding(i) {
                    return Err("You already have that.".into());
                }
                if !self.visible_in_room(s, i) {
                    return Err(format!("You can't see any {} here.", noun(i)));
                }
                if !self.spec.objects[i].takeable {
                    return Err(format!("You can't take the {}.", noun(i)));
                }
                s.objects[i].place = Place::Inventory;
                Ok("Taken.".into())
            }
            Command::Drop(i) => {
                if !s.holding(i) {
                    return Err("You don't have that.".into());
                }
                s.objects[i].place = Place::Room(s.room);
                Ok("Dropped.".into())
            }
            Command::Open(i) | Command::Close(i) => {
                let opening = matches!(cmd, Command::Open(_));
                if !self.accessible(s, i) {
                    return Err(format!("You can't see any {} here.", noun(i)));
                }
                if !self.spec.objects[i].openable {
                    return Err(format!("You can't do that to the {}.", noun(i)));
                }
                if s.objects[i].open == opening {
                    return Err(format!("It is already {}.", if opening { "open" } else { "closed" }));
                }
                s.objects[i].open = opening;
                let mut msg = format!("The {} is now {}.", noun(i), if opening { "open" } else { "closed" });
                if opening {
                    let inside: Vec<&str> = (0..s.objects.len())
                        .filter(|&j| s.objects[j].place == Place::Inside(i) && !s.objects[j].hidden)
                        .map(noun)
                        .collect();
                    if !inside.is_empty() {
                        let _ = write!(msg, " Inside you see: {}.", inside.join(", "));
                    }
                }
                Ok(msg)
            }
            Command::Climb(i) => {
                if !self.visible_in_room(s, i) {
                    return Err(format!("There is no {} to climb here.", noun(i)));
                }
                let to = self.spec.objects[i]
                    .climb_to
                    .as_ref()
                    .ok_or_else(|| format!("You can't climb the {}.", noun(i)))?;
                s.room = self.rooms[to];
                Ok(self.room_text(s))
            }
            Command::Light(i) => {
                if !s.holding(i) {
                    return Err("You aren't holding that.".into());
                }
                if !self.spec.objects[i].lightable {
                    return Err(format!("You can't light the {}.", noun(i)));
                }
                if s.objects[i].lit {
                    return Err("It is already on.".into());
                }
                s.objects[i].lit = true;
                Ok(format!("The {} is now on.", noun(i)))
            }
            Command::Move(i) => {
                if !self.visible_in_room(s, i) {
                    return Err(format!("You can't see any {} here.", noun(i)));
                }
                if !self.spec.objects[i].movable || s.objects[i].moved {
                    return Err(format!("Moving the {} reveals nothing.", noun(i)));
                }
                s.objects[i].moved = true;
                let mut msg = format!("You move the {}.", noun(i));
                if let Some(r) = &self.spec.objects[i].reveals {
                    let j = self.obj_index(r);
                    s.objects[j].hidden = false;
                    let _ = write!(msg, " You uncover a {}.", noun(j));
                }
                Ok(msg)
            }
            Command::Fight(i, with) => {
                if !self.visible_in_room(s, i) {
                    return Err(format!("You can't see any {} here.", noun(i)));
                }
                if !self.spec.objects[i].fightable || s.objects[i].defeated {
                    return Err("Violence isn't the answer to this one.".into());
                }
                let weapon = match with {
                    Some(w) if s.holding(w) && self.spec.objects[w].weapon => Some(w),
                    Some(_) => None,
                    None => s.inventory().find(|&w| self.spec.objects[w].weapon),
                };
                let w = weapon.ok_or_else(|| format!("Attacking the {} with your bare hands is suicidal.", noun(i)))?;
                s.objects[i].defeated = true;
                Ok(format!("You defeat the {} with the {}.", noun(i), noun(w)))
            }
            Command::Examine(i) => {
                if !self.accessible(s, i) {
                    return Err(format!("You can't see any {} here.", noun(i)));
                }
                Ok(self.object_phrase(s, i))
            }
        }
    }

    /// Executes `command` from `state`.
    pub fn execute<R: Rng + ?Sized>(&self, state: &GameState, command: &str, rng: &mut R) -> Outcome {
        let mut next = state.clone();
        next.steps += 1;
        let (feedback, ok) = if state.dead {
            ("You are dead.".to_string(), false)
        } else {
            match self.parse(command) {
                Parsed::Fail(m) => (m, false),
                Parsed::Ok(cmd) => match self.apply(&mut next, cmd) {
                    Ok(m) => (m, true),
                    Err(m) => (m, false),
                },
            }
        };
        let mut feedback = feedback;
        let mut reward = self.spec.step_penalty;
        let mut terminal = false;
        for (k, event) in self.spec.events.iter().enumerate() {
            if !next.events_fired[k] && event.when.iter().all(|c| self.holds(&next, c)) {
                next.events_fired[k] = true;
                next.score += event.award;
                reward += event.award as f64;
                terminal |= event.terminal;
                if let Some(m) = &event.message {
                    feedback.push(' ');
                    feedback.push_str(m);
                }
            }
        }
        let hazard = self.spec.rooms[next.room].hazard;
        if !terminal && !next.dead && hazard > 0.0 && rng.gen::<f64>() < hazard {
            next.dead = true;
            feedback.push_str(" Something lunges from the shadows. You have died.");
        }
        terminal |= next.dead;
        let done = terminal || next.steps >= self.spec.horizon;
        let observation = format!("{feedback}\n{}\n{}", self.room_text(&next), self.inventory_text(&next));
        Outcome {
            state: next,
            feedback,
            observation,
            reward,
            elim: if ok { 0.0 } else { 1.0 },
            done,
            terminal,
        }
    }

    fn object_phrase(&self, s: &GameState, i: usize) -> String {
        let spec = &self.spec.objects[i];
        let o = &s.objects[i];
        let mut words = Vec::new();
        if spec.openable {
            words.push(if o.open { "open" } else { "closed" });
        }
        if spec.lightable {
            words.push(if o.lit { "lit" } else { "unlit" });
        }
        if spec.fightable && o.defeated {
            words.push("defeated");
        }
        if spec.movable && o.moved {
            words.push("moved");
        }
        words.push(&spec.noun);
        words.join(" ")
    }

    fn descriptor_parts(&self, s: &GameState) -> Vec<String> {
        let room = &self.spec.rooms[s.room];
        let mut parts = vec![format!("{}.", room.name), room.description.clone()];
        for i in 0..s.objects.len() {
            if self.visible_in_room(s, i) {
                let d = &self.spec.objects[i].description;
                if !d.is_empty() {
                    parts.push(d.clone());
                }
                parts.push(format!("({}).", self.object_phrase(s, i)));
            }
        }
        parts
    }

    /// Human-readable room text.
    pub fn room_text(&self, s: &GameState) -> String {
        self.descriptor_parts(s).join(" ")
    }

    pub fn inventory_text(&self, s: &GameState) -> String {
        let items: Vec<String> = s.inventory().map(|i| self.object_phrase(s, i)).collect();
        if items.is_empty() {
            "You are empty-handed.".into()
        } else {
            format!("You are carrying: {}.", items.join(", "))
        }
    }

    /// Fixed-width token view: 50 descriptor tokens then 15 inventory tokens.
    pub fn render_state_text(&self, s: &GameState) -> String {
        let descriptor = tokenize(&self.descriptor_parts(s).join(" "));
        let inventory: Vec<String> = s
            .inventory()
            .flat_map(|i| tokenize(&self.object_phrase(s, i)))
            .collect();
        render_tokens(&descriptor, &inventory)
    }
}

/// Lowercased words with surrounding punctuation removed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric() && c != '-').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Truncates/pads descriptor and inventory tokens to their fixed widths.
pub fn render_tokens(descriptor: &[String], inventory: &[String]) -> String {
    fn fit(tokens: &[String], n: usize) -> Vec<&str> {
        tokens
            .iter()
            .map(String::as_str)
            .chain(std::iter::repeat(PAD_TOKEN))
            .take(n)
            .collect()
    }
    let mut all = fit(descriptor, DESCRIPTOR_TOKENS);
    all.extend(fit(inventory, INVENTORY_TOKENS));
    all.join(" ")
}
