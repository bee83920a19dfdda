//! Miniature parser-based text adventure.
//!
//! Worlds are TOML files (see `worlds/egg.toml`): rooms with exits,
//! objects with a handful of boolean affordances, and scored events.
//! Every command is legal input; commands the parser rejects or that do not
//! apply in the current state produce an elimination signal of 1.

mod actions;
mod game;
mod repl;
mod search;
mod world;

use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use actions::{build_action_set, ActionSet, Provenance};
pub use game::{
    render_tokens, tokenize, Game, GameState, ObjectState, Outcome, Place, DESCRIPTOR_TOKENS, INVENTORY_TOKENS,
    PAD_TOKEN,
};
pub use repl::repl;
pub use search::{soundness_check, SoundnessReport, Violation};
pub use world::{Condition, Dir, Event, Exit, Location, Object, Room, WorldSpec, WORLD_FORMAT, WORLD_VERSION};

use crate::env::{EnvStep, TextEnvironment};

#[derive(Debug, Error)]
pub enum ZorkError {
    #[error("world file: {0}")]
    Parse(String),
    #[error("invalid world: {0}")]
    Spec(String),
    #[error("dictionary has {available} usable words, {requested} requested")]
    Dictionary { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A world plus a fixed action list, exposed as a text environment.
#[derive(Debug, Clone)]
pub struct MiniZorkEnv {
    game: Game,
    actions: Arc<ActionSet>,
    state: GameState,
    valid_cache: HashMap<GameState, Vec<usize>>,
}

impl MiniZorkEnv {
    pub fn new(spec: WorldSpec, actions: ActionSet) -> Self {
        let game = Game::new(spec);
        let state = game.initial_state();
        Self {
            game,
            actions: Arc::new(actions),
            state,
            valid_cache: HashMap::new(),
        }
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn observation(&self) -> String {
        self.game.render_state_text(&self.state)
    }

    fn compute_valid(&self, state: &GameState) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.actions
            .commands
            .iter()
            .enumerate()
            .filter(|(_, c)| self.game.execute(state, c, &mut rng).elim == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Actions with a zero elimination signal at the current state, cached
    /// per world position.
    pub fn valid_now(&mut self) -> Vec<usize> {
        let mut key = self.state.clone();
        key.steps = 0;
        if let Some(v) = self.valid_cache.get(&key) {
            return v.clone();
        }
        let v = self.compute_valid(&key);
        self.valid_cache.insert(key, v.clone());
        v
    }
}

impl TextEnvironment for MiniZorkEnv {
    fn num_actions(&self) -> usize {
        self.actions.len()
    }

    fn horizon(&self) -> usize {
        self.game.spec().horizon
    }

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> String {
        self.state = self.game.initial_state();
        self.observation()
    }

    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> EnvStep {
        let out = self.game.execute(&self.state, &self.actions.commands[action], rng);
        self.state = out.state;
        EnvStep {
            observation: self.game.render_state_text(&self.state),
            reward: out.reward,
            elim: out.elim,
            done: out.done,
            terminal: out.terminal,
        }
    }

    fn valid_actions(&mut self) -> Option<Vec<usize>> {
        Some(self.valid_now())
    }
}
