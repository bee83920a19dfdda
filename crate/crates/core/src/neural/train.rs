//! Training loop, greedy evaluation and checkpoints.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{AgentConfig, DqnAgent, EliminationSnapshot};
use super::encoder::FrameHistory;
use super::mlp::Mlp;
use super::replay::{ReplayMeta, Transition};
use super::NeuralError;
use crate::env::TextEnvironment;
use crate::record::EpisodeRecord;

/// Independent generators derived from one seed. Each consumer owns a
/// stream, so for example building an elimination network never shifts the
/// exploration draws.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub q_init: ChaCha8Rng,
    pub aen_init: ChaCha8Rng,
    pub env: ChaCha8Rng,
    /// Exploration draws and minibatch sampling.
    pub agent: ChaCha8Rng,
    pub eval: ChaCha8Rng,
}

impl RngStreams {
    pub fn from_seed(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self {
            q_init: stream(0),
            aen_init: stream(1),
            env: stream(2),
            agent: stream(3),
            eval: stream(4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub global_step: u64,
    pub eval_return: f64,
    pub length: f64,
    pub mean_admissible: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeRecord>,
    pub evals: Vec<EvalPoint>,
    /// Actions taken during training, in order.
    pub actions: Vec<usize>,
}

/// Greedy episodes over the admissible set, discounting by `gamma_eval`.
pub fn evaluate<E: TextEnvironment>(
    agent: &mut DqnAgent,
    env: &mut E,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64, f64) {
    let gamma = agent.config().gamma_eval;
    let (mut ret, mut len, mut adm, mut steps) = (0.0, 0.0, 0.0, 0usize);
    for _ in 0..episodes {
        let mut hist = FrameHistory::start(env.reset(rng));
        let mut discount = 1.0;
        loop {
            let x = agent.encode(hist.frames());
            adm += agent.admissible(&x).len() as f64;
            let a = agent.greedy(&x);
            let s = env.step(a, rng);
            ret += discount * s.reward;
            discount *= gamma;
            len += 1.0;
            steps += 1;
            hist.push(s.observation);
            if s.done {
                break;
            }
        }
    }
    let n = episodes as f64;
    (ret / n, len / n, adm / steps.max(1) as f64)
}

/// Runs `total_steps` environment steps of (AE-)DQN training.
///
/// Per step: encode the last four observations, pick an ε-greedy action
/// over the admissible set, step the environment, store the transition,
/// take one gradient step on each network once the replay is warm, then
/// sync the target network every `target_sync` steps and rebuild the
/// bandits every `bandit_refresh` steps. Every `eval_interval` steps a
/// greedy evaluation runs on a separate copy of the environment.
pub fn run_training<E: TextEnvironment + Clone>(
    env: E,
    config: &AgentConfig,
    seed: u64,
    total_steps: u64,
) -> Result<TrainingLog, NeuralError> {
    let mut rngs = RngStreams::from_seed(seed);
    let mut env = env;
    let mut eval_env = env.clone();
    let mut agent = DqnAgent::new(config.clone(), env.num_actions(), &mut rngs.q_init, &mut rngs.aen_init)?;
    let mut log = TrainingLog::default();
    let track = config.track_valid;

    let mut hist = FrameHistory::start(env.reset(&mut rngs.env));
    let mut x = Arc::new(agent.encode(hist.frames()));
    let (mut ret, mut len, mut adm_sum, mut missed) = (0.0, 0usize, 0.0, 0u64);
    let mut eval_in_episode = None;
    let mut has_truth = true;
    while agent.steps() < total_steps {
        let eps = config.epsilon_at(agent.steps(), total_steps);
        let (a, n_adm) = agent.act(&x, eps, &mut rngs.agent);
        adm_sum += n_adm as f64;
        if track && agent.snapshot().is_some() {
            if let Some(valid) = env.valid_actions() {
                let allowed = agent.admissible(&x);
                missed += valid.iter().filter(|v| allowed.binary_search(v).is_err()).count() as u64;
            } else {
                has_truth = false;
            }
        }
        let s = env.step(a, &mut rngs.env);
        log.actions.push(a);
        hist.push(s.observation);
        let x_next = Arc::new(agent.encode(hist.frames()));
        agent.observe(
            Transition {
                s: Arc::clone(&x),
                a,
                r: s.reward,
                e: s.elim,
                s_next: Arc::clone(&x_next),
                done: s.terminal,
            },
            &mut rngs.agent,
        )?;
        ret += s.reward;
        len += 1;
        x = x_next;

        if config.eval_interval > 0 && agent.steps() % config.eval_interval == 0 {
            let (r, l, m) = evaluate(&mut agent, &mut eval_env, config.eval_episodes, &mut rngs.eval);
            log.evals.push(EvalPoint {
                global_step: agent.steps(),
                eval_return: r,
                length: l,
                mean_admissible: m,
            });
            eval_in_episode = Some(r);
        }

        if s.done {
            log.episodes.push(EpisodeRecord {
                seed,
                episode: log.episodes.len(),
                global_step: agent.steps(),
                train_return: ret,
                eval_return: eval_in_episode.take(),
                length: len,
                mean_admissible: adm_sum / len as f64,
                eliminated_valid: (track && has_truth).then_some(missed),
            });
            if !ret.is_finite() {
                return Err(NeuralError::NonFinite(format!("episode return {ret}")));
            }
            hist = FrameHistory::start(env.reset(&mut rngs.env));
            x = Arc::new(agent.encode(hist.frames()));
            (ret, len, adm_sum, missed) = (0.0, 0, 0.0, 0);
        }
    }
    Ok(log)
}

const CHECKPOINT_FORMAT: &str = "actelim-dqn";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: AgentConfig,
    pub num_actions: usize,
    pub steps: u64,
    pub gradient_steps: u64,
    pub q: Mlp,
    pub q_target: Mlp,
    pub aen: Option<Mlp>,
    pub snapshot: Option<EliminationSnapshot>,
    /// Replay contents are not stored, only their extent.
    pub replay: ReplayMeta,
}

impl Checkpoint {
    /// Rebuilds an agent with the saved networks and snapshot and an empty
    /// replay.
    pub fn into_agent(self) -> Result<DqnAgent, NeuralError> {
        let mut dummy = ChaCha8Rng::seed_from_u64(0);
        let mut dummy2 = ChaCha8Rng::seed_from_u64(0);
        let mut agent = DqnAgent::new(self.config, self.num_actions, &mut dummy, &mut dummy2)?;
        agent.restore(self.q, self.q_target, self.aen, self.snapshot, self.steps, self.gradient_steps);
        Ok(agent)
    }
}

/// Writes networks, snapshot and replay extent as versioned JSON. Floats
/// round-trip exactly.
pub fn save_checkpoint<W: Write>(agent: &DqnAgent, writer: W) -> Result<(), NeuralError> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: agent.config().clone(),
        num_actions: agent.num_actions(),
        steps: agent.steps(),
        gradient_steps: agent.gradient_steps(),
        q: agent.q().clone(),
        q_target: agent.q_target().clone(),
        aen: agent.aen().cloned(),
        snapshot: agent.snapshot().map(|s| s.as_ref().clone()),
        replay: agent.replay().meta(),
    };
    serde_json::to_writer(writer, &ck).map_err(|e| NeuralError::Checkpoint(e.to_string()))
}

pub fn load_checkpoint<R: Read>(reader: R) -> Result<Checkpoint, NeuralError> {
    let ck: Checkpoint = serde_json::from_reader(reader).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(NeuralError::Checkpoint(format!("unexpected format tag {:?}", ck.format)));
    }
    if ck.version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {}", ck.version)));
    }
    Ok(ck)
}
