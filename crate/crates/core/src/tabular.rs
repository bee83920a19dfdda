//! Tabular Q-learning with count-based action elimination.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{GridConfig, GridError, GridWorld};

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("invalid tabular config: {0}")]
    Config(String),
    #[error("oracle elimination needs a valid-action table")]
    MissingOracle,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EliminationMode {
    Off,
    CountConfidence,
    Oracle,
}

/// Width of the count-based confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceRadius {
    /// `sqrt(2 ln(sum N) / N)`.
    Uct,
    /// `sqrt(2 sum N / N)`, never small enough to eliminate.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    Constant { value: f64 },
    Linear { start: f64, end: f64, steps: u64 },
}

impl EpsilonSchedule {
    pub fn at(&self, step: u64) -> f64 {
        match *self {
            EpsilonSchedule::Constant { value } => value,
            EpsilonSchedule::Linear { start, end, steps } => {
                if steps == 0 || step >= steps {
                    end
                } else {
                    start + (end - start) * step as f64 / steps as f64
                }
            }
        }
    }

    fn validate(&self) -> bool {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        match *self {
            EpsilonSchedule::Constant { value } => ok(value),
            EpsilonSchedule::Linear { start, end, .. } => ok(start) && ok(end),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularConfig {
    pub ell: f64,
    pub epsilon: EpsilonSchedule,
    pub gamma: f64,
    pub lr_exponent: f64,
    pub elimination_mode: EliminationMode,
    pub radius: ConfidenceRadius,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            ell: 0.5,
            epsilon: EpsilonSchedule::Constant { value: 0.1 },
            gamma: 1.0,
            lr_exponent: 0.8,
            elimination_mode: EliminationMode::CountConfidence,
            radius: ConfidenceRadius::Uct,
        }
    }
}

impl TabularConfig {
    pub fn validate(&self) -> Result<(), TabularError> {
        let bad = |m: &str| Err(TabularError::Config(m.to_string()));
        if !(self.lr_exponent > 0.5 && self.lr_exponent <= 1.0) {
            return bad("lr_exponent must lie in (0.5, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !self.epsilon.validate() {
            return bad("epsilon must lie in [0, 1]");
        }
        if !self.ell.is_finite() {
            return bad("ell must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularTransition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub elim: f64,
    pub next_state: usize,
    /// True terminal; horizon truncation still bootstraps.
    pub terminal: bool,
}

/// Dense Q-table agent over `num_states × num_actions`.
#[derive(Debug, Clone)]
pub struct TabularAgent {
    config: TabularConfig,
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
    visits: Vec<u64>,
    elim_sum: Vec<f64>,
    state_visits: Vec<u64>,
    oracle: Option<Vec<Vec<usize>>>,
    step: u64,
}

impl TabularAgent {
    pub fn new(config: TabularConfig, num_states: usize, num_actions: usize) -> Result<Self, TabularError> {
        config.validate()?;
        if num_states == 0 || num_actions == 0 {
            return Err(TabularError::Config("empty state or action space".into()));
        }
        if config.elimination_mode == EliminationMode::Oracle {
            return Err(TabularError::MissingOracle);
        }
        Ok(Self::build(config, num_states, num_actions, None))
    }

    /// Agent whose oracle admissible set at state `s` is `valid[s]`.
    pub fn with_oracle(
        config: TabularConfig,
        num_actions: usize,
        valid: Vec<Vec<usize>>,
    ) -> Result<Self, TabularError> {
        config.validate()?;
        if valid.is_empty() || num_actions == 0 {
            return Err(TabularError::Config("empty state or action space".into()));
        }
        if valid.iter().any(|v| v.is_empty() || v.iter().any(|&a| a >= num_actions)) {
            return Err(TabularError::Config("oracle sets must be non-empty and in range".into()));
        }
        Ok(Self::build(config, valid.len(), num_actions, Some(valid)))
    }

    fn build(config: TabularConfig, num_states: usize, num_actions: usize, oracle: Option<Vec<Vec<usize>>>) -> Self {
        let n = num_states * num_actions;
        Self {
            config,
            num_states,
            num_actions,
            q: vec![0.0; n],
            visits: vec![0; n],
            elim_sum: vec![0.0; n],
            state_visits: vec![0; num_states],
            oracle,
            step: 0,
        }
    }

    pub fn config(&self) -> &TabularConfig {
        &self.config
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.num_actions + a]
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.num_actions + a]
    }

    /// Empirical mean elimination signal, `None` if never tried.
    pub fn elim_mean(&self, s: usize, a: usize) -> Option<f64> {
        let i = s * self.num_actions + a;
        (self.visits[i] > 0).then(|| self.elim_sum[i] / self.visits[i] as f64)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn confidence(&self, s: usize, a: usize) -> f64 {
        let n = self.visits(s, a);
        if n == 0 {
            return f64::INFINITY;
        }
        let total = self.state_visits[s] as f64;
        match self.config.radius {
            ConfidenceRadius::Uct => (2.0 * total.ln().max(0.0) / n as f64).sqrt(),
            ConfidenceRadius::Linear => (2.0 * total / n as f64).sqrt(),
        }
    }

    fn is_eliminated(&self, s: usize, a: usize) -> bool {
        match self.elim_mean(s, a) {
            Some(mean) => mean - self.confidence(s, a) > self.config.ell,
            None => false,
        }
    }

    /// Admissible actions at `s`, written into `out`; never empty.
    pub fn admissible_into(&self, s: usize, out: &mut Vec<usize>) {
        out.clear();
        match self.config.elimination_mode {
            EliminationMode::Off => out.extend(0..self.num_actions),
            EliminationMode::Oracle => {
                out.extend_from_slice(&self.oracle.as_ref().expect("oracle table present")[s]);
            }
            EliminationMode::CountConfidence => {
                out.extend((0..self.num_actions).filter(|&a| !self.is_eliminated(s, a)));
                if out.is_empty() {
                    out.extend(0..self.num_actions);
                }
            }
        }
    }

    pub fn admissible(&self, s: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_actions);
        self.admissible_into(s, &mut out);
        out
    }

    fn greedy<R: Rng + ?Sized>(&self, s: usize, admissible: &[usize], rng: &mut R) -> usize {
        let row = self.q_row(s);
        let best = admissible.iter().map(|&a| row[a]).fold(f64::NEG_INFINITY, f64::max);
        let ties = admissible.iter().filter(|&&a| row[a] == best).count();
        let pick = rng.gen_range(0..ties);
        admissible
            .iter()
            .copied()
            .filter(|&a| row[a] == best)
            .nth(pick)
            .expect("tie index in range")
    }

    /// Epsilon-greedy over the admissible set.
    pub fn select_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        let mut buf = Vec::with_capacity(self.num_actions);
        self.select_action_with(s, rng, &mut buf)
    }

    pub fn select_action_with<R: Rng + ?Sized>(&self, s: usize, rng: &mut R, buf: &mut Vec<usize>) -> usize {
        self.admissible_into(s, buf);
        if buf.len() == 1 {
            return buf[0];
        }
        let eps = self.config.epsilon.at(self.step);
        if rng.gen::<f64>() < eps {
            buf[rng.gen_range(0..buf.len())]
        } else {
            self.greedy(s, buf, rng)
        }
    }

    /// Maximum Q over the admissible set at `s`.
    pub fn admissible_max(&self, s: usize, buf: &mut Vec<usize>) -> f64 {
        self.admissible_into(s, buf);
        let row = self.q_row(s);
        buf.iter().map(|&a| row[a]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn update(&mut self, t: &TabularTransition) {
        let mut buf = Vec::with_capacity(self.num_actions);
        self.update_with(t, &mut buf);
    }

    pub fn update_with(&mut self, t: &TabularTransition, buf: &mut Vec<usize>) {
        let i = t.state * self.num_actions + t.action;
        self.visits[i] += 1;
        self.elim_sum[i] += t.elim;
        self.state_visits[t.state] += 1;
        self.step += 1;
        let alpha = (self.visits[i] as f64).powf(-self.config.lr_exponent);
        let bootstrap = if t.terminal {
            0.0
        } else {
            self.config.gamma * self.admissible_max(t.next_state, buf)
        };
        let target = t.reward + bootstrap;
        self.q[i] += alpha * (target - self.q[i]);
    }
}

/// Per-episode statistics from a tabular grid-world run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularEpisode {
    pub episode: usize,
    pub global_step: u64,
    pub train_return: f64,
    pub length: usize,
    pub mean_admissible: f64,
    pub eliminated_valid: u64,
}

/// Oracle valid-action table: matching-category actions per cell.
pub fn grid_oracle(world: &GridWorld) -> Vec<Vec<usize>> {
    (0..world.num_cells())
        .map(|i| world.valid_actions((i / world.width(), i % world.width())).to_vec())
        .collect()
}

pub fn grid_agent(world: &GridWorld, config: TabularConfig) -> Result<TabularAgent, TabularError> {
    if config.elimination_mode == EliminationMode::Oracle {
        TabularAgent::with_oracle(config, world.num_actions(), grid_oracle(world))
    } else {
        TabularAgent::new(config, world.num_cells(), world.num_actions())
    }
}

fn run_episode<R: Rng + ?Sized>(
    world: &mut GridWorld,
    agent: &mut TabularAgent,
    rng: &mut R,
    buf: &mut Vec<usize>,
    global: &mut u64,
    episode: usize,
) -> Result<TabularEpisode, TabularError> {
    let mut state = world.reset();
    let mut ret = 0.0;
    let mut len = 0usize;
    let mut admissible_total = 0usize;
    let mut eliminated_valid = 0u64;
    loop {
        let s = world.cell_index(state.cell);
        let a = agent.select_action_with(s, rng, buf);
        admissible_total += buf.len();
        let valid = world.valid_actions(state.cell);
        eliminated_valid += valid.iter().filter(|v| !buf.contains(v)).count() as u64;
        let step = world.step(a, rng)?;
        agent.update_with(
            &TabularTransition {
                state: s,
                action: a,
                reward: step.reward,
                elim: step.elim,
                next_state: world.cell_index(step.state.cell),
                terminal: step.terminal,
            },
            buf,
        );
        ret += step.reward;
        len += 1;
        *global += 1;
        state = step.state;
        if step.done {
            break;
        }
    }
    Ok(TabularEpisode {
        episode,
        global_step: *global,
        train_return: ret,
        length: len,
        mean_admissible: admissible_total as f64 / len as f64,
        eliminated_valid,
    })
}

/// Trains a fresh tabular agent on the grid world for `episodes` episodes.
pub fn run_tabular_gridworld<R: Rng + ?Sized>(
    grid: &GridConfig,
    config: &TabularConfig,
    episodes: usize,
    rng: &mut R,
) -> Result<Vec<TabularEpisode>, TabularError> {
    let mut world = GridWorld::new(grid.clone())?;
    let mut agent = grid_agent(&world, config.clone())?;
    let mut buf = Vec::with_capacity(agent.num_actions());
    let mut global = 0u64;
    (0..episodes)
        .map(|e| run_episode(&mut world, &mut agent, rng, &mut buf, &mut global, e))
        .collect()
}

/// A grid-world training run that can be advanced in chunks. Continuing a
/// run gives exactly the episodes a single long run would.
#[derive(Debug, Clone)]
pub struct TabularRun {
    world: GridWorld,
    agent: TabularAgent,
    rng: ChaCha8Rng,
    buf: Vec<usize>,
    global: u64,
    episodes: usize,
}

impl TabularRun {
    pub fn new(grid: &GridConfig, config: &TabularConfig, seed: u64) -> Result<Self, TabularError> {
        let world = GridWorld::new(grid.clone())?;
        let agent = grid_agent(&world, config.clone())?;
        Ok(Self {
            buf: Vec::with_capacity(agent.num_actions()),
            world,
            agent,
            rng: ChaCha8Rng::seed_from_u64(seed),
            global: 0,
            episodes: 0,
        })
    }

    pub fn agent(&self) -> &TabularAgent {
        &self.agent
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes
    }

    pub fn global_step(&self) -> u64 {
        self.global
    }

    pub fn run_episodes(&mut self, n: usize) -> Result<Vec<TabularEpisode>, TabularError> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let ep = run_episode(
                &mut self.world,
                &mut self.agent,
                &mut self.rng,
                &mut self.buf,
                &mut self.global,
                self.episodes,
            )?;
            self.episodes += 1;
            out.push(ep);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(mode: EliminationMode, eps: f64) -> TabularConfig {
        TabularConfig {
            elimination_mode: mode,
            epsilon: EpsilonSchedule::Constant { value: eps },
            ..Default::default()
        }
    }

    fn record(agent: &mut TabularAgent, s: usize, a: usize, e: f64, times: u64) {
        for _ in 0..times {
            agent.update(&TabularTransition {
                state: s,
                action: a,
                reward: 0.0,
                elim: e,
                next_state: s,
                terminal: true,
            });
        }
    }

    #[test]
    fn fresh_agent_admits_everything() {
        let agent = TabularAgent::new(TabularConfig::default(), 3, 5).unwrap();
        assert_eq!(agent.admissible(1), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn uct_radius_example() {
        let mut agent = TabularAgent::new(TabularConfig::default(), 1, 4).unwrap();
        record(&mut agent, 0, 0, 1.0, 50);
        record(&mut agent, 0, 1, 0.0, 150);
        let conf = agent.confidence(0, 0);
        assert!((conf - (2.0 * 200f64.ln() / 50.0).sqrt()).abs() < 1e-12);
        assert!((conf - 0.4605).abs() < 1e-3);
        assert_eq!(agent.admissible(0), vec![1, 2, 3]);
    }

    #[test]
    fn linear_radius_never_eliminates() {
        let mut c = TabularConfig::default();
        c.radius = ConfidenceRadius::Linear;
        let mut agent = TabularAgent::new(c, 1, 3).unwrap();
        record(&mut agent, 0, 0, 1.0, 500);
        record(&mut agent, 0, 1, 0.0, 10);
        assert_eq!(agent.admissible(0).len(), 3);
    }

    #[test]
    fn fallback_to_full_set() {
        let mut agent = TabularAgent::new(TabularConfig::default(), 1, 2).unwrap();
        record(&mut agent, 0, 0, 1.0, 500);
        record(&mut agent, 0, 1, 1.0, 500);
        assert_eq!(agent.admissible(0), vec![0, 1]);
    }

    #[test]
    fn elim_mean_matches_history() {
        let mut agent = TabularAgent::new(TabularConfig::default(), 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hist = Vec::new();
        for _ in 0..300 {
            let e = if rng.gen::<f64>() < 0.3 { 1.0 } else { 0.0 };
            hist.push(e);
            record(&mut agent, 1, 0, e, 1);
        }
        let mean = hist.iter().sum::<f64>() / hist.len() as f64;
        assert_eq!(agent.elim_mean(1, 0), Some(mean));
        assert_eq!(agent.elim_mean(0, 0), None);
    }

    #[test]
    fn oracle_mode_uses_table() {
        let agent = TabularAgent::with_oracle(
            cfg(EliminationMode::Oracle, 0.1),
            4,
            vec![vec![0, 1], vec![3]],
        )
        .unwrap();
        assert_eq!(agent.admissible(0), vec![0, 1]);
        assert_eq!(agent.admissible(1), vec![3]);
        assert!(TabularAgent::new(cfg(EliminationMode::Oracle, 0.1), 2, 4).is_err());
    }

    #[test]
    fn grid_oracle_matches_category() {
        let world = GridWorld::new(GridConfig::default()).unwrap();
        let agent = grid_agent(&world, cfg(EliminationMode::Oracle, 0.1)).unwrap();
        for cell in [(15, 15), (0, 0), (29, 3)] {
            let c = world.category(cell);
            assert_eq!(
                agent.admissible(world.cell_index(cell)),
                vec![4 * c, 4 * c + 1, 4 * c + 2, 4 * c + 3]
            );
        }
    }

    #[test]
    fn greedy_ties_are_uniform() {
        let agent = TabularAgent::new(cfg(EliminationMode::Off, 0.0), 1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0u32; 4];
        for _ in 0..4000 {
            counts[agent.select_action(0, &mut rng)] += 1;
        }
        assert!(counts.iter().all(|&c| c > 850 && c < 1150), "{counts:?}");
    }

    #[test]
    fn epsilon_one_is_uniform_over_admissible() {
        let mut agent = TabularAgent::new(cfg(EliminationMode::CountConfidence, 1.0), 1, 5).unwrap();
        record(&mut agent, 0, 4, 1.0, 400);
        record(&mut agent, 0, 0, 0.0, 1);
        agent.q[0] = 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 10_000;
        let mut counts = [0u32; 5];
        for _ in 0..n {
            counts[agent.select_action(0, &mut rng)] += 1;
        }
        assert_eq!(counts[4], 0);
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts[..4] {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn single_admissible_action_always_chosen() {
        let agent =
            TabularAgent::with_oracle(cfg(EliminationMode::Oracle, 1.0), 6, vec![vec![2]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!((0..100).all(|_| agent.select_action(0, &mut rng) == 2));
    }

    #[test]
    fn terminal_update_ignores_bootstrap() {
        let mut agent = TabularAgent::new(TabularConfig::default(), 2, 2).unwrap();
        agent.q[2] = 50.0;
        agent.update(&TabularTransition {
            state: 0,
            action: 0,
            reward: 0.0,
            elim: 0.0,
            next_state: 1,
            terminal: true,
        });
        assert_eq!(agent.q(0, 0), 0.0);
    }

    #[test]
    fn eliminated_action_excluded_from_bootstrap() {
        let mut agent = TabularAgent::new(TabularConfig::default(), 2, 2).unwrap();
        record(&mut agent, 1, 0, 1.0, 400);
        record(&mut agent, 1, 1, 0.0, 1);
        assert_eq!(agent.admissible(1), vec![1]);
        agent.q[2] = 1e6;
        agent.q[3] = 1.0;
        agent.update(&TabularTransition {
            state: 0,
            action: 0,
            reward: -1.0,
            elim: 0.0,
            next_state: 1,
            terminal: false,
        });
        assert_eq!(agent.q(0, 0), 0.0);
    }

    #[test]
    fn two_state_chain_converges() {
        // s0 --right--> s1 --right--> goal, r = -1 each; "left" stays put.
        let mut agent = TabularAgent::new(cfg(EliminationMode::Off, 0.5), 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = 0usize;
        for _ in 0..100_000 {
            let a = agent.select_action(s, &mut rng);
            let (next, terminal) = match (s, a) {
                (0, 1) => (1, false),
                (1, 1) => (0, true),
                (s, _) => (s, false),
            };
            agent.update(&TabularTransition {
                state: s,
                action: a,
                reward: -1.0,
                elim: 0.0,
                next_state: next,
                terminal,
            });
            s = next;
        }
        assert!((agent.q(0, 1) + 2.0).abs() < 0.05, "{}", agent.q(0, 1));
        assert!((agent.q(1, 1) + 1.0).abs() < 0.05);
    }

    #[test]
    fn schedule_interpolates() {
        let s = EpsilonSchedule::Linear {
            start: 1.0,
            end: 0.1,
            steps: 10,
        };
        assert_eq!(s.at(0), 1.0);
        assert!((s.at(5) - 0.55).abs() < 1e-12);
        assert_eq!(s.at(50), 0.1);
    }

    #[test]
    fn config_validation() {
        let mut c = TabularConfig::default();
        c.lr_exponent = 0.5;
        assert!(c.validate().is_err());
        c.lr_exponent = 1.0;
        assert!(c.validate().is_ok());
        c.epsilon = EpsilonSchedule::Constant { value: 1.5 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn chunked_run_matches_single_run() {
        let grid = GridConfig {
            height: 10,
            width: 10,
            k_categories: 3,
            ..Default::default()
        };
        let config = TabularConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let whole = run_tabular_gridworld(&grid, &config, 40, &mut rng).unwrap();
        let mut run = TabularRun::new(&grid, &config, 9).unwrap();
        let mut chunked = run.run_episodes(15).unwrap();
        chunked.extend(run.run_episodes(25).unwrap());
        assert_eq!(chunked, whole);
        assert_eq!(run.episodes_done(), 40);
        assert_eq!(run.global_step(), whole.last().unwrap().global_step);
    }
}
