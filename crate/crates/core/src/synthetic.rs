//! Synthetic realizable elimination problems with a known ground truth.
//!
//! A trial draws a finite set of state contexts and, for every arm, a
//! parameter vector `θ*` such that valid arms have expected signal in
//! `[0.1, 0.3]` and invalid arms in `[0.8, 0.9]` at every context. The
//! learner plays uniformly over its current admissible set; the harness
//! records false eliminations of valid arms, confidence-interval failures,
//! and per-(state, arm) visit counts of invalid arms against the bound
//! `T(t) ≤ 4β_t/(u−ℓ)² + 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eliminator::{admissible_into, beta, score, ArmModel, BetaMode, ElimError, EliminationConfig};

/// First coordinate shared by every context.
const CONTEXT_LEAD: f64 = 0.8;
/// Half-width of the remaining context coordinates.
const CONTEXT_SPREAD: f64 = 0.04;
/// Half-width of the non-leading `θ*` coordinates.
const THETA_SPREAD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub num_arms: usize,
    pub num_valid: usize,
    pub num_states: usize,
    /// Noise scale `R`; the noise is uniform on `[−R, R]`.
    pub noise: f64,
    pub delta: f64,
    pub lambda: f64,
    pub s_bound: f64,
    pub ell: f64,
    pub u: f64,
    pub steps: usize,
    /// Steps after which visit counts are checked and recorded.
    pub checkpoints: Vec<usize>,
    pub beta_mode: BetaMode,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dim: 8,
            num_arms: 20,
            num_valid: 5,
            num_states: 16,
            noise: 0.1,
            delta: 0.1,
            lambda: 1.0,
            s_bound: 1.25,
            ell: 0.4,
            u: 0.8,
            steps: 5000,
            checkpoints: vec![500, 1000, 2000, 5000],
            beta_mode: BetaMode::ExactDet,
        }
    }
}

impl SyntheticConfig {
    pub fn elimination_config(&self) -> EliminationConfig {
        EliminationConfig {
            lambda: self.lambda,
            delta: self.delta,
            r_subgauss: self.noise,
            s_bound: self.s_bound,
            l_context: 1.0,
            ell: self.ell,
            u: Some(self.u),
            num_actions: self.num_arms,
            beta_mode: self.beta_mode,
        }
    }

    pub fn validate(&self) -> Result<(), ElimError> {
        self.elimination_config().validate()?;
        if self.dim < 2 || self.num_valid > self.num_arms || self.num_states == 0 {
            return Err(ElimError::Config(
                "need dim ≥ 2, num_valid ≤ num_arms and at least one state".into(),
            ));
        }
        // The generator's θ* ranges are built around ℓ = 0.4 and u = 0.8.
        if self.ell < 0.3 || self.u > 0.8 {
            return Err(ElimError::Config(
                "generator guarantees valid means ≤ 0.3 and invalid means ≥ 0.8".into(),
            ));
        }
        Ok(())
    }
}

/// Ground truth for one trial.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub contexts: Vec<Vec<f64>>,
    pub thetas: Vec<Vec<f64>>,
    pub valid: Vec<bool>,
}

impl SyntheticWorld {
    pub fn generate<R: Rng + ?Sized>(config: &SyntheticConfig, rng: &mut R) -> Self {
        let d = config.dim;
        let contexts = (0..config.num_states)
            .map(|_| {
                let mut x = vec![CONTEXT_LEAD];
                x.extend((1..d).map(|_| rng.gen_range(-CONTEXT_SPREAD..CONTEXT_SPREAD)));
                x
            })
            .collect();
        let valid: Vec<bool> = (0..config.num_arms).map(|a| a < config.num_valid).collect();
        let thetas = valid
            .iter()
            .map(|&ok| {
                let level = if ok {
                    rng.gen_range(0.12..0.28)
                } else {
                    rng.gen_range(0.82..0.88)
                };
                let mut th = vec![level / CONTEXT_LEAD];
                th.extend((1..d).map(|_| rng.gen_range(-THETA_SPREAD..THETA_SPREAD)));
                th
            })
            .collect();
        Self {
            contexts,
            thetas,
            valid,
        }
    }

    pub fn expected_signal(&self, state: usize, arm: usize) -> f64 {
        dot(&self.contexts[state], &self.thetas[arm])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub step: usize,
    /// Aggregate pulls of every invalid arm.
    pub invalid_pulls: Vec<u64>,
    /// Largest `T_{s,a}(t) / (4β_t/(u−ℓ)² + 1)` over invalid (state, arm) pairs.
    pub max_bound_ratio: f64,
    pub bound_violations: usize,
    /// Whether every valid arm was admissible in every state at this step.
    pub valid_all_admissible: bool,
    pub confidence_failure_so_far: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    /// First step at which some valid arm was eliminated in the current state.
    pub first_false_elimination: Option<usize>,
    /// First step at which some arm's confidence interval missed `θ*ᵀx`.
    pub first_confidence_failure: Option<usize>,
    pub checkpoints: Vec<CheckpointStats>,
}

impl TrialOutcome {
    pub fn checkpoint(&self, step: usize) -> Option<&CheckpointStats> {
        self.checkpoints.iter().find(|c| c.step == step)
    }
}

/// Runs one seeded trial of uniform play over the admissible set.
pub fn run_trial(config: &SyntheticConfig, seed: u64) -> Result<TrialOutcome, ElimError> {
    config.validate()?;
    let elim = config.elimination_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = SyntheticWorld::generate(config, &mut rng);
    let k = config.num_arms;
    let mut arms: Vec<ArmModel> = (0..k)
        .map(|_| ArmModel::new(config.dim, config.lambda))
        .collect::<Result<_, _>>()?;
    let mut visits = vec![0u64; config.num_states * k];
    let mut outcome = TrialOutcome {
        seed,
        first_false_elimination: None,
        first_confidence_failure: None,
        checkpoints: Vec::new(),
    };
    let gap = config.u - config.ell;
    let mut admissible = Vec::with_capacity(k);

    for t in 1..=config.steps {
        let s = rng.gen_range(0..config.num_states);
        let x = &world.contexts[s];
        for (a, arm) in arms.iter().enumerate() {
            let sc = score(&elim, arm, x)?;
            if world.valid[a] && sc.eliminated && outcome.first_false_elimination.is_none() {
                outcome.first_false_elimination = Some(t);
            }
            if (sc.mean - world.expected_signal(s, a)).abs() > sc.width
                && outcome.first_confidence_failure.is_none()
            {
                outcome.first_confidence_failure = Some(t);
            }
        }
        admissible_into(&elim, &arms, x, &mut admissible)?;
        let a = admissible[rng.gen_range(0..admissible.len())];
        let noise = if config.noise > 0.0 {
            rng.gen_range(-config.noise..=config.noise)
        } else {
            0.0
        };
        let e = world.expected_signal(s, a) + noise;
        arms[a].observe(&elim, x, e)?;
        visits[s * k + a] += 1;

        if config.checkpoints.contains(&t) {
            let mut max_ratio: f64 = 0.0;
            let mut violations = 0;
            for (a, arm) in arms.iter().enumerate().filter(|(a, _)| !world.valid[*a]) {
                let bound = 4.0 * beta(&elim, arm, t as u64) / (gap * gap) + 1.0;
                for st in 0..config.num_states {
                    let n = visits[st * k + a] as f64;
                    max_ratio = max_ratio.max(n / bound);
                    if n > bound {
                        violations += 1;
                    }
                }
            }
            let mut valid_ok = true;
            for ctx in &world.contexts {
                for (arm, _) in arms.iter().zip(&world.valid).filter(|(_, ok)| **ok) {
                    if score(&elim, arm, ctx)?.eliminated {
                        valid_ok = false;
                    }
                }
            }
            outcome.checkpoints.push(CheckpointStats {
                step: t,
                invalid_pulls: (0..k).filter(|&a| !world.valid[a]).map(|a| arms[a].pulls()).collect(),
                max_bound_ratio: max_ratio,
                bound_violations: violations,
                valid_all_admissible: valid_ok,
                confidence_failure_so_far: outcome.first_confidence_failure.is_some(),
            });
        }
    }
    Ok(outcome)
}

/// Aggregate verdicts over many trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSummary {
    pub trials: usize,
    pub false_elimination_rate: f64,
    pub confidence_failure_rate: f64,
    /// Visit-bound violations counted over trials without a confidence failure.
    pub visit_bound_violations: usize,
    pub trials_checked_for_bound: usize,
    pub max_bound_ratio: f64,
    pub visit_bound_holds: bool,
}

impl SimSummary {
    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        let n = outcomes.len().max(1) as f64;
        let false_elims = outcomes.iter().filter(|o| o.first_false_elimination.is_some()).count();
        let failures = outcomes.iter().filter(|o| o.first_confidence_failure.is_some()).count();
        let clean: Vec<_> = outcomes.iter().filter(|o| o.first_confidence_failure.is_none()).collect();
        let violations = clean
            .iter()
            .flat_map(|o| &o.checkpoints)
            .map(|c| c.bound_violations)
            .sum();
        let max_ratio = clean
            .iter()
            .flat_map(|o| &o.checkpoints)
            .map(|c| c.max_bound_ratio)
            .fold(0.0, f64::max);
        Self {
            trials: outcomes.len(),
            false_elimination_rate: false_elims as f64 / n,
            confidence_failure_rate: failures as f64 / n,
            visit_bound_violations: violations,
            trials_checked_for_bound: clean.len(),
            max_bound_ratio: max_ratio,
            visit_bound_holds: violations == 0,
        }
    }
}

/// Runs trials for the given seeds in parallel; results are in seed order.
pub fn run_trials(config: &SyntheticConfig, seeds: &[u64]) -> Result<Vec<TrialOutcome>, ElimError> {
    seeds.par_iter().map(|&s| run_trial(config, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_respects_signal_ranges_and_norms() {
        let cfg = SyntheticConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let w = SyntheticWorld::generate(&cfg, &mut rng);
            for (s, x) in w.contexts.iter().enumerate() {
                assert!(dot(x, x).sqrt() <= 1.0);
                for a in 0..cfg.num_arms {
                    let m = w.expected_signal(s, a);
                    if w.valid[a] {
                        assert!((0.1..=0.3).contains(&m), "{m}");
                    } else {
                        assert!((0.8..=0.9).contains(&m), "{m}");
                    }
                    assert!(m - cfg.noise >= 0.0 && m + cfg.noise <= 1.0);
                }
            }
            for th in &w.thetas {
                assert!(dot(th, th).sqrt() <= cfg.s_bound);
            }
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = SyntheticConfig {
            steps: 400,
            checkpoints: vec![200, 400],
            ..Default::default()
        };
        let a = run_trial(&cfg, 9).unwrap();
        let b = run_trial(&cfg, 9).unwrap();
        assert_eq!(a.first_false_elimination, b.first_false_elimination);
        assert_eq!(a.checkpoints[1].invalid_pulls, b.checkpoints[1].invalid_pulls);
    }

    #[test]
    fn noisy_trial_shrinks_parameter_error() {
        // ‖θ̂ − θ*‖ along the observed directions trends down with more data.
        let cfg = SyntheticConfig {
            num_arms: 1,
            num_valid: 1,
            ..Default::default()
        };
        let elim = cfg.elimination_config();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let world = SyntheticWorld::generate(&cfg, &mut rng);
        let mut arm = ArmModel::new(cfg.dim, cfg.lambda).unwrap();
        let err = |arm: &ArmModel| {
            world
                .contexts
                .iter()
                .map(|x| (dot(arm.theta_hat(), x) - dot(&world.thetas[0], x)).abs())
                .fold(0.0, f64::max)
        };
        let mut errs = Vec::new();
        for t in 1..=1000 {
            let s = rng.gen_range(0..cfg.num_states);
            let e = world.expected_signal(s, 0) + rng.gen_range(-0.1..=0.1);
            arm.observe(&elim, &world.contexts[s], e).unwrap();
            if t % 250 == 0 {
                errs.push(err(&arm));
            }
        }
        assert!(errs[3] < errs[0], "{errs:?}");
        assert!(errs[3] < 0.05, "{errs:?}");
    }
}
