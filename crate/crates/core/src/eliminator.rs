//! Linear contextual-bandit action eliminator.
//!
//! Every action owns a ridge-regression model of its expected elimination
//! signal as a function of the state context. An action is eliminated in a
//! context `x` when the lower end of its confidence interval already exceeds
//! the valid-action threshold:
//!
//! ```text
//! θ̂ᵀx − √(β · xᵀ V̄⁻¹ x) > ℓ
//! ```
//!
//! `β` is either one of the two theoretical confidence radii (union-bounded
//! over all actions) or a fixed constant.

use std::io::{Read, Write};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, SpdMatrix};

#[derive(Debug, Error)]
pub enum ElimError {
    #[error("invalid elimination config: {0}")]
    Config(String),
    #[error("context norm {norm} exceeds the bound {bound}")]
    ContextNorm { norm: f64, bound: f64 },
    #[error("elimination signal {0} outside [0, 1]")]
    Signal(f64),
    #[error("expected {expected} arms, got {actual}")]
    ArmCount { expected: usize, actual: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the confidence multiplier `β` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// Self-normalized bound using the arm's actual `log det V̄`.
    ExactDet,
    /// Dimension-based upper bound using the context-norm bound `L`.
    SimplifiedDim,
    /// A constant `β`; `f64::INFINITY` disables elimination entirely.
    Fixed(#[serde(with = "crate::serde_inf")] f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationConfig {
    pub lambda: f64,
    pub delta: f64,
    pub r_subgauss: f64,
    pub s_bound: f64,
    #[serde(with = "crate::serde_inf")]
    pub l_context: f64,
    pub ell: f64,
    /// Lower bound on the expected signal of invalid actions. Only bound
    /// checks use it; elimination never does.
    pub u: Option<f64>,
    pub num_actions: usize,
    pub beta_mode: BetaMode,
}

impl EliminationConfig {
    /// Constant-`β` configuration.
    pub fn fixed(num_actions: usize, lambda: f64, beta: f64, ell: f64) -> Self {
        Self {
            lambda,
            delta: 0.1,
            r_subgauss: 0.0,
            s_bound: 1.0,
            l_context: f64::INFINITY,
            ell,
            u: None,
            num_actions,
            beta_mode: BetaMode::Fixed(beta),
        }
    }

    pub fn validate(&self) -> Result<(), ElimError> {
        let bad = |msg: String| Err(ElimError::Config(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(0.0..=1.0).contains(&self.r_subgauss) {
            return bad(format!("r_subgauss must lie in [0,1], got {}", self.r_subgauss));
        }
        if !(self.s_bound > 0.0) {
            return bad(format!("s_bound must be positive, got {}", self.s_bound));
        }
        if !(self.l_context > 0.0) {
            return bad(format!("l_context must be positive, got {}", self.l_context));
        }
        if !(0.0..=1.0).contains(&self.ell) {
            return bad(format!("ell must lie in [0,1], got {}", self.ell));
        }
        if let Some(u) = self.u {
            if !(u > self.ell && u <= 1.0) {
                return bad(format!("u must lie in (ell, 1], got {u}"));
            }
        }
        if self.num_actions == 0 {
            return bad("num_actions must be positive".into());
        }
        if let BetaMode::Fixed(b) = self.beta_mode {
            if b.is_nan() || b < 0.0 {
                return bad(format!("fixed beta must be nonnegative, got {b}"));
            }
        }
        Ok(())
    }

    /// Per-action failure probability `δ / k`.
    pub fn delta_tilde(&self) -> f64 {
        self.delta / self.num_actions as f64
    }
}

/// Ridge-regression state for one action.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmModel {
    design: SpdMatrix,
    b: Vec<f64>,
    #[serde(skip)]
    theta: OnceLock<Vec<f64>>,
}

impl ArmModel {
    pub fn new(dim: usize, lambda: f64) -> Result<Self, ElimError> {
        Self::from_parts(SpdMatrix::new(dim, lambda)?, vec![0.0; dim])
    }

    /// Assembles an arm from an already accumulated design and `Xᵀe` vector.
    pub fn from_parts(design: SpdMatrix, b: Vec<f64>) -> Result<Self, ElimError> {
        if b.len() != design.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: design.dim(),
                actual: b.len(),
            }
            .into());
        }
        Ok(Self {
            design,
            b,
            theta: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    pub fn design(&self) -> &SpdMatrix {
        &self.design
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn pulls(&self) -> u64 {
        self.design.update_count()
    }

    /// Ridge estimate `V̄⁻¹ b`, computed on first use after each observation.
    pub fn theta_hat(&self) -> &[f64] {
        self.theta
            .get_or_init(|| self.design.solve(&self.b).expect("b matches design dimension"))
    }

    /// Records signal `e` observed in context `x`.
    pub fn observe(&mut self, config: &EliminationConfig, x: &[f64], e: f64) -> Result<(), ElimError> {
        if !(0.0..=1.0).contains(&e) {
            return Err(ElimError::Signal(e));
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > config.l_context * (1.0 + 1e-12) {
            return Err(ElimError::ContextNorm {
                norm,
                bound: config.l_context,
            });
        }
        self.observe_unchecked(x, e)
    }

    /// Like [`observe`](Self::observe) but without the context-norm and
    /// signal-range validation. Used for noisy synthetic signals.
    pub fn observe_unchecked(&mut self, x: &[f64], e: f64) -> Result<(), ElimError> {
        self.design.rank1_update(x)?;
        for (bi, xi) in self.b.iter_mut().zip(x) {
            *bi += e * xi;
        }
        self.theta = OnceLock::new();
        Ok(())
    }
}

/// Confidence multiplier `β` for `arm` after `t` rounds.
///
/// `t` only matters for [`BetaMode::SimplifiedDim`]; callers pass the
/// number of observations behind the arm's design (`t ≥ arm.pulls()`).
pub fn beta(config: &EliminationConfig, arm: &ArmModel, t: u64) -> f64 {
    let delta = config.delta_tilde();
    let ridge = config.lambda.sqrt() * config.s_bound;
    let root = match config.beta_mode {
        BetaMode::Fixed(b) => return b,
        BetaMode::ExactDet => {
            let d = arm.dim() as f64;
            // 2·log(det(V̄)^{1/2} det(λI)^{-1/2} / δ̃)
            let inner = arm.design.log_det() - d * config.lambda.ln() - 2.0 * delta.ln();
            config.r_subgauss * inner.max(0.0).sqrt() + ridge
        }
        BetaMode::SimplifiedDim => {
            let d = arm.dim() as f64;
            let l2 = config.l_context * config.l_context;
            let inner = d * ((1.0 + t as f64 * l2 / config.lambda) / delta).ln();
            config.r_subgauss * inner.max(0.0).sqrt() + ridge
        }
    };
    root * root
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminationScore {
    pub mean: f64,
    pub width: f64,
    pub eliminated: bool,
}

impl EliminationScore {
    pub fn new(mean: f64, width: f64, ell: f64) -> Self {
        Self {
            mean,
            width,
            eliminated: mean - width > ell,
        }
    }

    /// Lower end of the confidence interval.
    pub fn lower(&self) -> f64 {
        self.mean - self.width
    }
}

/// Scores `arm` in context `x` using all of its observations so far.
pub fn score(config: &EliminationConfig, arm: &ArmModel, x: &[f64]) -> Result<EliminationScore, ElimError> {
    let q = arm.design.quad_form(x)?;
    let mean: f64 = arm.theta_hat().iter().zip(x).map(|(t, v)| t * v).sum();
    let b = beta(config, arm, arm.pulls());
    let width = if q == 0.0 { 0.0 } else { (b * q).sqrt() };
    Ok(EliminationScore::new(mean, width, config.ell))
}

/// Indices of the actions not eliminated in context `x`.
///
/// Never empty: when every action is eliminated, the one with the smallest
/// lower confidence bound is returned on its own.
pub fn admissible_set(config: &EliminationConfig, arms: &[ArmModel], x: &[f64]) -> Result<Vec<usize>, ElimError> {
    let mut out = Vec::with_capacity(arms.len());
    admissible_into(config, arms, x, &mut out)?;
    Ok(out)
}

/// Buffer-reusing form of [`admissible_set`].
pub fn admissible_into(
    config: &EliminationConfig,
    arms: &[ArmModel],
    x: &[f64],
    out: &mut Vec<usize>,
) -> Result<(), ElimError> {
    if arms.len() != config.num_actions {
        return Err(ElimError::ArmCount {
            expected: config.num_actions,
            actual: arms.len(),
        });
    }
    out.clear();
    let mut fallback = (f64::INFINITY, 0usize);
    for (a, arm) in arms.iter().enumerate() {
        let s = score(config, arm, x)?;
        if !s.eliminated {
            out.push(a);
        } else if s.lower() < fallback.0 {
            fallback = (s.lower(), a);
        }
    }
    if out.is_empty() {
        out.push(fallback.1);
    }
    Ok(())
}

const CHECKPOINT_FORMAT: &str = "actelim-arms";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ArmCheckpoint {
    format: String,
    version: u32,
    arms: Vec<ArmModel>,
}

/// Writes a set of arms as versioned JSON. Floats round-trip exactly.
pub fn save_arms<W: Write>(arms: &[ArmModel], writer: W) -> Result<(), ElimError> {
    let ck = ArmCheckpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        arms: arms.to_vec(),
    };
    serde_json::to_writer(writer, &ck).map_err(|e| ElimError::Checkpoint(e.to_string()))
}

pub fn load_arms<R: Read>(reader: R) -> Result<Vec<ArmModel>, ElimError> {
    let ck: ArmCheckpoint =
        serde_json::from_reader(reader).map_err(|e| ElimError::Checkpoint(e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(ElimError::Checkpoint(format!("unexpected format tag {:?}", ck.format)));
    }
    if ck.version != CHECKPOINT_VERSION {
        return Err(ElimError::Checkpoint(format!("unsupported version {}", ck.version)));
    }
    Ok(ck.arms)
}
