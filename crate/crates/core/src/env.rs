//! Step/reset surface shared by the text environments.

use rand_chacha::ChaCha8Rng;

use crate::gridworld::{GridConfig, GridError, GridWorld};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: String,
    pub reward: f64,
    pub elim: f64,
    pub done: bool,
    /// True end of the task; a horizon cut-off sets `done` only.
    pub terminal: bool,
}

pub trait TextEnvironment {
    fn num_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Starts a new episode and returns the first observation.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> String;
    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> EnvStep;
    /// Ground-truth valid actions at the current state, when known.
    fn valid_actions(&mut self) -> Option<Vec<usize>> {
        None
    }
}

/// Grid world rendered as short text, for smoke-testing text agents.
#[derive(Debug, Clone)]
pub struct GridTextEnv {
    world: GridWorld,
}

impl GridTextEnv {
    pub fn new(config: GridConfig) -> Result<Self, GridError> {
        Ok(Self {
            world: GridWorld::new(config)?,
        })
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    fn render(&self) -> String {
        let s = self.world.state();
        format!("row{} col{} category{}", s.cell.0, s.cell.1, s.category)
    }
}

impl TextEnvironment for GridTextEnv {
    fn num_actions(&self) -> usize {
        self.world.num_actions()
    }

    fn horizon(&self) -> usize {
        self.world.config().horizon
    }

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> String {
        self.world.reset();
        self.render()
    }

    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> EnvStep {
        let s = self.world.step(action, rng).expect("agent picks in-range actions");
        EnvStep {
            observation: self.render(),
            reward: s.reward,
            elim: s.elim,
            done: s.done,
            terminal: s.terminal,
        }
    }

    fn valid_actions(&mut self) -> Option<Vec<usize>> {
        Some(self.world.valid_actions(self.world.state().cell).to_vec())
    }
}
