use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::world::WorldSpec;
use super::ZorkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fixed,
    Template,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet {
    pub commands: Vec<String>,
    pub provenance: Vec<Provenance>,
}

impl ActionSet {
    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn index_of(&self, command: &str) -> Option<usize> {
        self.commands.iter().position(|c| c == command)
    }

    fn push(&mut self, seen: &mut HashSet<String>, command: String, tag: Provenance) {
        if seen.insert(command.clone()) {
            self.commands.push(command);
            self.provenance.push(tag);
        }
    }
}

/// Builds the command list for a world.
///
/// Without templates: the fixed actions, `take` for every takeable object
/// named by a quest event, then `take` for the first `n_take_distractors`
/// dictionary words not already covered. With templates: every verb paired
/// with every world object noun and the first `n_take_distractors`
/// dictionary words, followed by the fixed actions.
pub fn build_action_set(spec: &WorldSpec, n_take_distractors: usize, template_mode: bool) -> Result<ActionSet, ZorkError> {
    let mut set = ActionSet {
        commands: Vec::new(),
        provenance: Vec::new(),
    };
    let mut seen = HashSet::new();
    let object_nouns: Vec<&str> = spec.objects.iter().map(|o| o.noun.as_str()).collect();
    let distractors = |exclude: &dyn Fn(&str) -> bool| -> Result<Vec<&str>, ZorkError> {
        let words: Vec<&str> = spec
            .dictionary
            .iter()
            .map(String::as_str)
            .filter(|w| !exclude(w))
            .take(n_take_distractors)
            .collect();
        if words.len() < n_take_distractors {
            return Err(ZorkError::Dictionary {
                requested: n_take_distractors,
                available: words.len(),
            });
        }
        Ok(words)
    };
    if template_mode {
        let extra = distractors(&|w| object_nouns.contains(&w))?;
        for verb in &spec.verbs {
            for noun in object_nouns.iter().chain(&extra) {
                set.push(&mut seen, format!("{verb} {noun}"), Provenance::Template);
            }
        }
        for a in &spec.fixed_actions {
            set.push(&mut seen, a.clone(), Provenance::Fixed);
        }
    } else {
        for a in &spec.fixed_actions {
            set.push(&mut seen, a.clone(), Provenance::Fixed);
        }
        if n_take_distractors > 0 {
            for o in spec.objects.iter().filter(|o| o.takeable && quest_relevant(spec, &o.id)) {
                set.push(&mut seen, format!("take {}", o.noun), Provenance::Template);
            }
        }
        let covered = seen.clone();
        for w in distractors(&|w| covered.contains(&format!("take {w}")))? {
            set.push(&mut seen, format!("take {w}"), Provenance::Template);
        }
    }
    Ok(set)
}

fn quest_relevant(spec: &WorldSpec, id: &str) -> bool {
    use super::world::Condition::*;
    spec.events.iter().flat_map(|e| &e.when).any(|c| match c {
        Holding(o) | Open(o) | Lit(o) | Moved(o) | Defeated(o) => o == id,
        InRoom(_) => false,
    })
}
