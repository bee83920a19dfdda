//! K-category grid world with a category-mismatch elimination signal.
//!
//! Every traversable cell carries one of `K` categories, fixed for the whole
//! run. There are `4K` actions: a compass direction paired with a category.
//! An action whose category matches the current cell moves in its direction
//! with probability `p_correct_same`, otherwise with `p_correct_diff`; a
//! failed move goes in a uniformly drawn direction (possibly the intended
//! one). Each step costs −1; the episode ends at the goal or the horizon.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid config: {0}")]
    Config(String),
    #[error("map: {0}")]
    Map(String),
    #[error("goal {goal:?} unreachable from start {start:?}")]
    Unreachable {
        start: (usize, usize),
        goal: (usize, usize),
    },
    #[error("action {action} out of range (have {num_actions})")]
    InvalidAction { action: usize, num_actions: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::South => (1, 0),
            Direction::East => (0, 1),
            Direction::West => (0, -1),
        }
    }
}

/// Wall layout of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallLayout {
    Open,
    /// 3×3 lattice of rooms joined by one-cell doorways.
    Rooms,
    Custom(GridMap),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub k_categories: usize,
    pub p_correct_same: f64,
    pub p_correct_diff: f64,
    pub p_elim_invalid: f64,
    pub p_elim_valid: f64,
    pub horizon: usize,
    pub walls: WallLayout,
    pub category_seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 30,
            height: 30,
            k_categories: 10,
            p_correct_same: 0.75,
            p_correct_diff: 0.5,
            p_elim_invalid: 1.0,
            p_elim_valid: 0.0,
            horizon: 150,
            walls: WallLayout::Rooms,
            category_seed: 0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |m: &str| Err(GridError::Config(m.to_string()));
        if self.k_categories == 0 {
            return bad("k_categories must be positive");
        }
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        let probs = [
            self.p_correct_same,
            self.p_correct_diff,
            self.p_elim_invalid,
            self.p_elim_valid,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.p_elim_invalid <= self.p_elim_valid {
            return bad("p_elim_invalid must exceed p_elim_valid");
        }
        match &self.walls {
            WallLayout::Custom(_) => Ok(()),
            _ if self.width == 0 || self.height == 0 => bad("grid must be non-empty"),
            _ => Ok(()),
        }
    }
}

/// Character map: `.` floor, `#` wall, `S` start, `G` goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<bool>,
    pub start: Option<(usize, usize)>,
    pub goal: Option<(usize, usize)>,
}

impl GridMap {
    pub fn load(path: &Path) -> Result<Self, GridError> {
        std::fs::read_to_string(path)?.parse()
    }

    fn open(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            walls: vec![false; width * height],
            start: None,
            goal: None,
        }
    }

    /// 3×3 rooms: wall lines at the thirds with a doorway centred on every
    /// wall segment shared by two rooms.
    fn rooms(width: usize, height: usize) -> Self {
        let mut m = Self::open(width, height);
        if width < 8 || height < 8 {
            return m;
        }
        let rows = [height / 3, 2 * height / 3];
        let cols = [width / 3, 2 * width / 3];
        let segments = |n: usize, cuts: [usize; 2]| [(0, cuts[0]), (cuts[0] + 1, cuts[1]), (cuts[1] + 1, n)];
        for &r in &rows {
            for c in 0..width {
                m.walls[r * width + c] = true;
            }
            for (lo, hi) in segments(width, cols) {
                m.walls[r * width + (lo + hi) / 2] = false;
            }
        }
        for &c in &cols {
            for r in 0..height {
                m.walls[r * width + c] = true;
            }
            for (lo, hi) in segments(height, rows) {
                m.walls[((lo + hi) / 2) * width + c] = false;
            }
        }
        m
    }
}

impl FromStr for GridMap {
    type Err = GridError;

    fn from_str(text: &str) -> Result<Self, GridError> {
        let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(GridError::Map("empty map".into()));
        }
        let width = lines[0].chars().count();
        let mut m = Self::open(width, lines.len());
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != width {
                return Err(GridError::Map(format!(
                    "row {r} has {} cells, expected {width}",
                    line.chars().count()
                )));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => m.walls[r * width + c] = true,
                    'S' if m.start.is_none() => m.start = Some((r, c)),
                    'G' if m.goal.is_none() => m.goal = Some((r, c)),
                    'S' | 'G' => return Err(GridError::Map(format!("duplicate '{ch}' at ({r}, {c})"))),
                    other => return Err(GridError::Map(format!("unknown cell '{other}' at ({r}, {c})"))),
                }
            }
        }
        Ok(m)
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.height {
            for c in 0..self.width {
                let ch = if Some((r, c)) == self.start {
                    'S'
                } else if Some((r, c)) == self.goal {
                    'G'
                } else if self.walls[r * self.width + c] {
                    '#'
                } else {
                    '.'
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridState {
    pub cell: (usize, usize),
    pub steps_taken: usize,
    pub category: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStep {
    pub state: GridState,
    pub reward: f64,
    pub elim: f64,
    pub done: bool,
    /// True when the goal was reached (as opposed to hitting the horizon).
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    config: GridConfig,
    map: GridMap,
    categories: Vec<usize>,
    start: (usize, usize),
    goal: (usize, usize),
    state: GridState,
}

impl GridWorld {
    pub fn new(config: GridConfig) -> Result<Self, GridError> {
        config.validate()?;
        let map = match &config.walls {
            WallLayout::Open => GridMap::open(config.width, config.height),
            WallLayout::Rooms => GridMap::rooms(config.width, config.height),
            WallLayout::Custom(m) => m.clone(),
        };
        let (w, h) = (map.width, map.height);
        let start = map.start.unwrap_or((h / 2, w / 2));
        let goal = match map.goal {
            Some(g) => g,
            None => {
                let i = map
                    .walls
                    .iter()
                    .position(|&wall| !wall)
                    .ok_or_else(|| GridError::Map("no traversable cell".into()))?;
                (i / w, i % w)
            }
        };
        for (name, (r, c)) in [("start", start), ("goal", goal)] {
            if r >= h || c >= w || map.walls[r * w + c] {
                return Err(GridError::Map(format!("{name} ({r}, {c}) is not a floor cell")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.category_seed);
        let categories = (0..w * h).map(|_| rng.gen_range(0..config.k_categories)).collect();
        let mut world = Self {
            state: GridState {
                cell: start,
                steps_taken: 0,
                category: 0,
            },
            config,
            map,
            categories,
            start,
            goal,
        };
        if !world.reachable(start).contains(&goal) {
            return Err(GridError::Unreachable { start, goal });
        }
        world.reset();
        Ok(world)
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn width(&self) -> usize {
        self.map.width
    }

    pub fn height(&self) -> usize {
        self.map.height
    }

    pub fn num_cells(&self) -> usize {
        self.map.width * self.map.height
    }

    pub fn num_actions(&self) -> usize {
        4 * self.config.k_categories
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    pub fn state(&self) -> GridState {
        self.state
    }

    pub fn is_wall(&self, cell: (usize, usize)) -> bool {
        self.map.walls[cell.0 * self.map.width + cell.1]
    }

    pub fn category(&self, cell: (usize, usize)) -> usize {
        self.categories[cell.0 * self.map.width + cell.1]
    }

    /// Flat index of a cell, used as the tabular state id.
    pub fn cell_index(&self, cell: (usize, usize)) -> usize {
        cell.0 * self.map.width + cell.1
    }

    /// Action index → (direction, category).
    pub fn decode_action(&self, action: usize) -> Result<(Direction, usize), GridError> {
        if action >= self.num_actions() {
            return Err(GridError::InvalidAction {
                action,
                num_actions: self.num_actions(),
            });
        }
        Ok((Direction::ALL[action % 4], action / 4))
    }

    /// Actions whose category matches the category of `cell`.
    pub fn valid_actions(&self, cell: (usize, usize)) -> [usize; 4] {
        let c = self.category(cell);
        [4 * c, 4 * c + 1, 4 * c + 2, 4 * c + 3]
    }

    /// Cell reached by moving from `cell` in `dir`; walls and borders block.
    pub fn neighbor(&self, cell: (usize, usize), dir: Direction) -> (usize, usize) {
        let (dr, dc) = dir.delta();
        let r = cell.0 as isize + dr;
        let c = cell.1 as isize + dc;
        if r < 0 || c < 0 || r >= self.map.height as isize || c >= self.map.width as isize {
            return cell;
        }
        let next = (r as usize, c as usize);
        if self.is_wall(next) {
            cell
        } else {
            next
        }
    }

    /// Puts the agent back on the start cell.
    pub fn reset(&mut self) -> GridState {
        self.state = GridState {
            cell: self.start,
            steps_taken: 0,
            category: self.category(self.start),
        };
        self.state
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<GridStep, GridError> {
        let (dir, cat) = self.decode_action(action)?;
        let matches = cat == self.state.category;
        let p = if matches {
            self.config.p_correct_same
        } else {
            self.config.p_correct_diff
        };
        let moved = if rng.gen::<f64>() < p {
            dir
        } else {
            Direction::ALL[rng.gen_range(0..4)]
        };
        let p_elim = if matches {
            self.config.p_elim_valid
        } else {
            self.config.p_elim_invalid
        };
        let elim = if rng.gen::<f64>() < p_elim { 1.0 } else { 0.0 };
        let cell = self.neighbor(self.state.cell, moved);
        self.state = GridState {
            cell,
            steps_taken: self.state.steps_taken + 1,
            category: self.category(cell),
        };
        let terminal = cell == self.goal;
        Ok(GridStep {
            state: self.state,
            reward: -1.0,
            elim,
            done: terminal || self.state.steps_taken >= self.config.horizon,
            terminal,
        })
    }

    fn reachable(&self, from: (usize, usize)) -> Vec<(usize, usize)> {
        let mut seen = vec![false; self.num_cells()];
        let mut queue = VecDeque::from([from]);
        seen[self.cell_index(from)] = true;
        let mut out = Vec::new();
        while let Some(cell) = queue.pop_front() {
            out.push(cell);
            for dir in Direction::ALL {
                let n = self.neighbor(cell, dir);
                if !seen[self.cell_index(n)] {
                    seen[self.cell_index(n)] = true;
                    queue.push_back(n);
                }
            }
        }
        out
    }

    /// Traversable cells reachable from the start.
    pub fn reachable_cells(&self) -> Vec<(usize, usize)> {
        self.reachable(self.start)
    }
}
