//! AE-DQN: a Q-network plus an action-elimination network whose last hidden
//! layer feeds per-action linear bandits.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{FeatureEncoder, Features};
use super::mlp::{Mlp, Workspace};
use super::replay::{ReplayBuffer, Transition};
use super::NeuralError;
use crate::eliminator::{admissible_into, score, ArmModel, EliminationConfig, EliminationScore};
use crate::linalg::SpdMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DqnVariant {
    /// Plain DQN; no elimination network is built or trained.
    Vanilla,
    Ae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub variant: DqnVariant,
    pub hash_dim: usize,
    pub q_hidden: Vec<usize>,
    pub aen_hidden: Vec<usize>,
    pub gamma_train: f64,
    pub gamma_eval: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the run over which ε is annealed linearly.
    pub epsilon_decay_fraction: f64,
    pub minibatch: usize,
    /// Gradient steps begin once the replay holds this many transitions
    /// (never fewer than `minibatch`).
    pub learning_starts: usize,
    pub target_sync: u64,
    pub bandit_refresh: u64,
    pub replay_capacity: usize,
    pub lambda: f64,
    /// Fixed confidence multiplier; `inf` disables elimination.
    #[serde(with = "crate::serde_inf")]
    pub beta: f64,
    pub ell: f64,
    pub lr_q: f64,
    pub lr_aen: f64,
    pub clip_norm: f64,
    /// Steps between greedy evaluation episodes; 0 disables evaluation.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Count steps where the admissible set drops a ground-truth valid action.
    pub track_valid: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            variant: DqnVariant::Ae,
            hash_dim: 512,
            q_hidden: vec![128, 128],
            aen_hidden: vec![128, 32],
            gamma_train: 0.8,
            gamma_eval: 1.0,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_fraction: 0.2,
            minibatch: 32,
            learning_starts: 32,
            target_sync: 500,
            bandit_refresh: 2500,
            replay_capacity: 50_000,
            lambda: 0.1,
            beta: 0.5,
            ell: 0.6,
            lr_q: 1e-2,
            lr_aen: 5e-2,
            clip_norm: 10.0,
            eval_interval: 1000,
            eval_episodes: 1,
            track_valid: true,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if !(self.gamma_train > 0.0 && self.gamma_train < 1.0) {
            return bad("gamma_train must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gamma_eval) {
            return bad("gamma_eval must lie in [0, 1]");
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.epsilon_start) || !prob(self.epsilon_end) || !prob(self.epsilon_decay_fraction) {
            return bad("epsilon_start, epsilon_end and epsilon_decay_fraction must lie in [0, 1]");
        }
        if self.minibatch == 0 || self.target_sync == 0 || self.bandit_refresh == 0 {
            return bad("minibatch, target_sync and bandit_refresh must be positive");
        }
        if self.replay_capacity < self.minibatch {
            return bad("replay_capacity must be at least minibatch");
        }
        if self.hash_dim == 0 || self.q_hidden.contains(&0) || self.aen_hidden.contains(&0) {
            return bad("layer sizes must be positive");
        }
        if self.aen_hidden.is_empty() {
            return bad("aen_hidden needs at least one layer to provide features");
        }
        if !(self.lambda > 0.0) || !(self.beta >= 0.0) || self.ell.is_nan() {
            return bad("lambda must be positive, beta nonnegative and ell a number");
        }
        if !(self.lr_q >= 0.0) || !(self.lr_aen >= 0.0) || !(self.clip_norm > 0.0) {
            return bad("learning rates must be nonnegative and clip_norm positive");
        }
        if self.eval_interval > 0 && self.eval_episodes == 0 {
            return bad("eval_episodes must be positive when evaluation is enabled");
        }
        Ok(())
    }

    pub fn epsilon_at(&self, step: u64, total_steps: u64) -> f64 {
        let span = (self.epsilon_decay_fraction * total_steps as f64).round() as u64;
        if span == 0 || step >= span {
            self.epsilon_end
        } else {
            self.epsilon_start + (self.epsilon_end - self.epsilon_start) * step as f64 / span as f64
        }
    }

    pub fn q_sizes(&self, num_actions: usize) -> Vec<usize> {
        let mut s = vec![self.hash_dim];
        s.extend(&self.q_hidden);
        s.push(num_actions);
        s
    }

    pub fn aen_sizes(&self, num_actions: usize) -> Vec<usize> {
        let mut s = vec![self.hash_dim];
        s.extend(&self.aen_hidden);
        s.push(num_actions);
        s
    }

    pub fn elimination(&self, num_actions: usize) -> EliminationConfig {
        EliminationConfig::fixed(num_actions, self.lambda, self.beta, self.ell)
    }
}

/// Frozen copy of the elimination network whose head was replaced by the
/// bandit estimates, together with those bandits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EliminationSnapshot {
    pub aen_target: Mlp,
    pub config: EliminationConfig,
    pub arms: Vec<ArmModel>,
    /// Transitions the snapshot was built from.
    pub samples: usize,
}

impl EliminationSnapshot {
    /// Features `φ(s)`: last hidden activations of the frozen network.
    pub fn phi(&self, x: &Features) -> Vec<f64> {
        self.aen_target.hidden(x)
    }

    pub fn scores(&self, x: &Features) -> Vec<EliminationScore> {
        let phi = self.phi(x);
        self.arms
            .iter()
            .map(|arm| score(&self.config, arm, &phi).expect("arm dimension matches features"))
            .collect()
    }

    pub fn admissible(&self, x: &Features) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.arms.len());
        admissible_into(&self.config, &self.arms, &self.phi(x), &mut out).expect("arm count matches config");
        out
    }
}

/// Admissible actions at `x`; every action before the first snapshot exists.
pub fn admissible(x: &Features, snapshot: Option<&EliminationSnapshot>, num_actions: usize) -> Vec<usize> {
    match snapshot {
        Some(s) => s.admissible(x),
        None => (0..num_actions).collect(),
    }
}

/// Highest-valued action among `allowed`; ties go to the lowest index.
pub fn argmax_over(q: &[f64], allowed: &[usize]) -> usize {
    let mut best = allowed[0];
    for &a in &allowed[1..] {
        if q[a] > q[best] {
            best = a;
        }
    }
    best
}

/// ε-greedy choice over an admissible set. Always draws one uniform number
/// first, then an index only when exploring.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], allowed: &[usize], epsilon: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    if u < epsilon {
        allowed[rng.gen_range(0..allowed.len())]
    } else {
        argmax_over(q, allowed)
    }
}

pub fn act<R: Rng + ?Sized>(
    x: &Features,
    q: &Mlp,
    snapshot: Option<&EliminationSnapshot>,
    epsilon: f64,
    rng: &mut R,
) -> usize {
    let allowed = admissible(x, snapshot, q.output_dim());
    epsilon_greedy(&q.forward(x), &allowed, epsilon, rng)
}

/// `y = r` for terminal transitions, otherwise `r + γ max_{a∈A′(s′)} Q⁻(s′, a)`.
pub fn compute_targets(
    batch: &[&Transition],
    q_target: &Mlp,
    snapshot: Option<&EliminationSnapshot>,
    gamma: f64,
) -> Vec<f64> {
    assert!(!batch.is_empty(), "empty batch");
    batch
        .iter()
        .map(|t| {
            if t.done {
                t.r
            } else {
                let q = q_target.forward(&t.s_next);
                let allowed = admissible(&t.s_next, snapshot, q.len());
                t.r + gamma * allowed.iter().map(|&a| q[a]).fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

/// One SGD step on the Q-network towards `targets` and, when given, one on
/// the elimination network towards the stored signals. Returns both losses.
pub fn train_step(
    q: &mut Mlp,
    aen: Option<&mut Mlp>,
    batch: &[&Transition],
    targets: &[f64],
    config: &AgentConfig,
    ws: &mut TrainWorkspace,
) -> Result<(f64, Option<f64>), NeuralError> {
    if targets.len() != batch.len() {
        return Err(NeuralError::Shape(format!(
            "{} targets for a batch of {}",
            targets.len(),
            batch.len()
        )));
    }
    ws.xs.clear();
    ws.actions.clear();
    ws.signals.clear();
    for t in batch {
        ws.xs.push(Arc::clone(&t.s));
        ws.actions.push(t.a);
        ws.signals.push(t.e);
    }
    let xs: Vec<&Features> = ws.xs.iter().map(|x| x.as_ref()).collect();
    let lq = q.train_step(&xs, &ws.actions, targets, config.lr_q, config.clip_norm, &mut ws.q)?;
    let le = match aen {
        Some(e) => Some(e.train_step(&xs, &ws.actions, &ws.signals, config.lr_aen, config.clip_norm, &mut ws.aen)?),
        None => None,
    };
    Ok((lq, le))
}

#[derive(Debug, Default)]
pub struct TrainWorkspace {
    q: Workspace,
    aen: Workspace,
    xs: Vec<Arc<Features>>,
    actions: Vec<usize>,
    signals: Vec<f64>,
}

/// Freezes a copy of `aen`, fits one ridge regression per action on the
/// copy's last hidden features over the whole replay, and writes each
/// solution `θ_a = V_a⁻¹ b_a` into the copy's output unit `a` (bias 0).
pub fn aen_update(aen: &Mlp, replay: &ReplayBuffer, config: &AgentConfig) -> Result<EliminationSnapshot, NeuralError> {
    let num_actions = aen.output_dim();
    let mut target = aen.clone();
    let dim = aen.layers().last().unwrap().inputs;

    // φ per distinct state, then (multiplicity, Σe) per (action, state), in
    // replay order so the result does not depend on hash iteration order.
    let mut state_ix: HashMap<u64, usize> = HashMap::new();
    let mut phis: Vec<Vec<f64>> = Vec::new();
    let mut pair_ix: HashMap<(usize, usize), usize> = HashMap::new();
    let mut per_action: Vec<Vec<(usize, u64, f64)>> = vec![Vec::new(); num_actions];
    for t in replay.iter() {
        let s = *state_ix.entry(t.s.key).or_insert_with(|| {
            phis.push(target.hidden(&t.s));
            phis.len() - 1
        });
        let slot = *pair_ix.entry((t.a, s)).or_insert_with(|| {
            per_action[t.a].push((s, 0, 0.0));
            per_action[t.a].len() - 1
        });
        let entry = &mut per_action[t.a][slot];
        entry.1 += 1;
        entry.2 += t.e;
    }

    let mut arms = Vec::with_capacity(num_actions);
    for (a, entries) in per_action.iter().enumerate() {
        let design = SpdMatrix::from_weighted_outer(
            dim,
            config.lambda,
            entries.iter().map(|&(s, n, _)| (phis[s].as_slice(), n)),
        )?;
        let mut b = vec![0.0; dim];
        for &(s, _, e_sum) in entries {
            for (bi, p) in b.iter_mut().zip(&phis[s]) {
                *bi += e_sum * p;
            }
        }
        let arm = ArmModel::from_parts(design, b)?;
        target.set_output_unit(a, arm.theta_hat(), 0.0);
        arms.push(arm);
    }
    Ok(EliminationSnapshot {
        aen_target: target,
        config: config.elimination(num_actions),
        arms,
        samples: replay.len(),
    })
}

const CACHE_LIMIT: usize = 1 << 17;

/// The learner state of Algorithm-1 style training: networks, replay,
/// snapshot and per-snapshot caches of next-state quantities.
#[derive(Debug)]
pub struct DqnAgent {
    config: AgentConfig,
    num_actions: usize,
    encoder: FeatureEncoder,
    q: Mlp,
    q_target: Mlp,
    aen: Option<Mlp>,
    snapshot: Option<Arc<EliminationSnapshot>>,
    replay: ReplayBuffer,
    ws: TrainWorkspace,
    q_target_cache: HashMap<u64, Arc<Vec<f64>>>,
    admissible_cache: HashMap<u64, Arc<Vec<usize>>>,
    steps: u64,
    gradient_steps: u64,
    last_losses: (f64, Option<f64>),
}

impl DqnAgent {
    /// Networks are initialized from two independent generators so that the
    /// Q-network does not depend on whether an elimination network exists.
    pub fn new<R: Rng + ?Sized>(
        config: AgentConfig,
        num_actions: usize,
        q_rng: &mut R,
        aen_rng: &mut R,
    ) -> Result<Self, NeuralError> {
        config.validate()?;
        if num_actions == 0 {
            return Err(NeuralError::Config("at least one action is required".into()));
        }
        let q = Mlp::new(&config.q_sizes(num_actions), q_rng);
        let aen = match config.variant {
            DqnVariant::Ae => Some(Mlp::new(&config.aen_sizes(num_actions), aen_rng)),
            DqnVariant::Vanilla => None,
        };
        Ok(Self {
            encoder: FeatureEncoder::new(config.hash_dim),
            q_target: q.clone(),
            q,
            aen,
            snapshot: None,
            replay: ReplayBuffer::new(config.replay_capacity),
            ws: TrainWorkspace::default(),
            q_target_cache: HashMap::new(),
            admissible_cache: HashMap::new(),
            steps: 0,
            gradient_steps: 0,
            last_losses: (f64::NAN, None),
            num_actions,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    pub fn q(&self) -> &Mlp {
        &self.q
    }

    pub fn q_target(&self) -> &Mlp {
        &self.q_target
    }

    pub fn aen(&self) -> Option<&Mlp> {
        self.aen.as_ref()
    }

    pub fn snapshot(&self) -> Option<&Arc<EliminationSnapshot>> {
        self.snapshot.as_ref()
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn gradient_steps(&self) -> u64 {
        self.gradient_steps
    }

    pub fn last_losses(&self) -> (f64, Option<f64>) {
        self.last_losses
    }

    pub fn encode<S: AsRef<str>>(&self, frames: &[S]) -> Features {
        self.encoder.encode(frames)
    }

    /// Admissible set at `x` under the current snapshot (cached per state).
    pub fn admissible(&mut self, x: &Features) -> Arc<Vec<usize>> {
        let Some(snap) = &self.snapshot else {
            return Arc::new((0..self.num_actions).collect());
        };
        if let Some(a) = self.admissible_cache.get(&x.key) {
            return Arc::clone(a);
        }
        if self.admissible_cache.len() >= CACHE_LIMIT {
            self.admissible_cache.clear();
        }
        let a = Arc::new(snap.admissible(x));
        self.admissible_cache.insert(x.key, Arc::clone(&a));
        a
    }

    fn target_values(&mut self, x: &Features) -> Arc<Vec<f64>> {
        if let Some(q) = self.q_target_cache.get(&x.key) {
            return Arc::clone(q);
        }
        if self.q_target_cache.len() >= CACHE_LIMIT {
            self.q_target_cache.clear();
        }
        let q = Arc::new(self.q_target.forward(x));
        self.q_target_cache.insert(x.key, Arc::clone(&q));
        q
    }

    /// ε-greedy over the admissible set; returns the action and the set size.
    pub fn act<R: Rng + ?Sized>(&mut self, x: &Features, epsilon: f64, rng: &mut R) -> (usize, usize) {
        let allowed = self.admissible(x);
        let q = self.q.forward(x);
        (epsilon_greedy(&q, &allowed, epsilon, rng), allowed.len())
    }

    pub fn greedy(&mut self, x: &Features) -> usize {
        let allowed = self.admissible(x);
        argmax_over(&self.q.forward(x), &allowed)
    }

    /// Same values as [`compute_targets`], reusing cached next-state work.
    pub fn targets(&mut self, batch: &[&Transition]) -> Vec<f64> {
        let gamma = self.config.gamma_train;
        batch
            .iter()
            .map(|t| {
                if t.done {
                    t.r
                } else {
                    let q = self.target_values(&t.s_next);
                    let allowed = self.admissible(&t.s_next);
                    t.r + gamma * allowed.iter().map(|&a| q[a]).fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect()
    }

    /// Stores a transition, performs a gradient step when the replay is warm,
    /// and runs the periodic target sync and bandit refresh.
    pub fn observe<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<(), NeuralError> {
        self.replay.push(t);
        self.steps += 1;
        let warm = self.config.learning_starts.max(self.config.minibatch);
        if self.replay.len() >= warm {
            let picks = index::sample(rng, self.replay.len(), self.config.minibatch);
            let batch: Vec<Transition> = picks.iter().map(|i| self.replay.get(i).clone()).collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            let targets = self.targets(&refs);
            self.last_losses = train_step(&mut self.q, self.aen.as_mut(), &refs, &targets, &self.config, &mut self.ws)?;
            self.gradient_steps += 1;
        }
        if self.steps % self.config.target_sync == 0 {
            self.sync_target();
        }
        if self.steps % self.config.bandit_refresh == 0 {
            self.refresh_bandits()?;
        }
        Ok(())
    }

    pub fn sync_target(&mut self) {
        self.q_target = self.q.clone();
        self.q_target_cache.clear();
    }

    /// Rebuilds the snapshot from the replay; a no-op for vanilla agents.
    pub fn refresh_bandits(&mut self) -> Result<(), NeuralError> {
        if let Some(aen) = &self.aen {
            if !self.replay.is_empty() {
                self.snapshot = Some(Arc::new(aen_update(aen, &self.replay, &self.config)?));
                self.admissible_cache.clear();
            }
        }
        Ok(())
    }

    pub(crate) fn restore(
        &mut self,
        q: Mlp,
        q_target: Mlp,
        aen: Option<Mlp>,
        snapshot: Option<EliminationSnapshot>,
        steps: u64,
        gradient_steps: u64,
    ) {
        self.q = q;
        self.q_target = q_target;
        self.aen = aen;
        self.snapshot = snapshot.map(Arc::new);
        self.steps = steps;
        self.gradient_steps = gradient_steps;
        self.q_target_cache.clear();
        self.admissible_cache.clear();
    }
}
