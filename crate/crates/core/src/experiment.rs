//! Seeded experiment runner, CSV logs, moving-average curves and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::GridConfig;
use crate::minizork::{build_action_set, MiniZorkEnv, WorldSpec, ZorkError};
use crate::neural::{run_training, AgentConfig, DqnVariant, EvalPoint, NeuralError};
use crate::record::EpisodeRecord;
use crate::synthetic::{run_trials, SimSummary, SyntheticConfig};
use crate::tabular::{EliminationMode, TabularConfig, TabularEpisode, TabularError, TabularRun};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("mismatched axes: {0}")]
    Axis(String),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Zork(#[from] ZorkError),
    #[error(transparent)]
    Elim(#[from] crate::eliminator::ElimError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GridworldTabular,
    MinizorkDqn,
    BanditSim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Vanilla,
    Ae,
    OracleElim,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Ae => "ae",
            Variant::OracleElim => "oracle-elim",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vanilla" => Some(Variant::Vanilla),
            "ae" => Some(Variant::Ae),
            "oracle-elim" => Some(Variant::OracleElim),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiniZorkConfig {
    /// `egg`, `troll`, or a path to a world file.
    pub world: String,
    pub n_take_distractors: usize,
    pub template_mode: bool,
    /// Overrides the world's own horizon when set.
    pub horizon: Option<usize>,
}

impl Default for MiniZorkConfig {
    fn default() -> Self {
        Self {
            world: "egg".into(),
            n_take_distractors: 100,
            template_mode: false,
            horizon: None,
        }
    }
}

impl MiniZorkConfig {
    pub fn load_world(&self) -> Result<WorldSpec, ZorkError> {
        let mut spec = match WorldSpec::bundled(&self.world) {
            Some(s) => s,
            None => WorldSpec::load(Path::new(&self.world))?,
        };
        if let Some(h) = self.horizon {
            spec.horizon = h;
        }
        Ok(spec)
    }

    pub fn build_env(&self) -> Result<MiniZorkEnv, ZorkError> {
        let spec = self.load_world()?;
        let actions = build_action_set(&spec, self.n_take_distractors, self.template_mode)?;
        Ok(MiniZorkEnv::new(spec, actions))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditSimConfig {
    pub trials: usize,
    pub synthetic: SyntheticConfig,
}

impl Default for BanditSimConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            synthetic: SyntheticConfig::default(),
        }
    }
}

/// One experiment: a kind, a variant, seeds, a budget and the settings of
/// every module involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub total_episodes: Option<u64>,
    pub total_steps: Option<u64>,
    pub output_dir: PathBuf,
    pub smoothing_window: usize,
    pub gridworld: GridConfig,
    pub tabular: TabularConfig,
    pub minizork: MiniZorkConfig,
    pub dqn: AgentConfig,
    pub bandit: BanditSimConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::GridworldTabular,
            variant: Variant::Ae,
            seeds: vec![0, 1, 2, 3, 4],
            total_episodes: None,
            total_steps: None,
            output_dir: PathBuf::from("runs/out"),
            smoothing_window: 200,
            gridworld: GridConfig::default(),
            tabular: TabularConfig::default(),
            minizork: MiniZorkConfig::default(),
            dqn: AgentConfig::default(),
            bandit: BanditSimConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let c: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |field: &str, m: &str| Err(ExperimentError::Config(format!("{field}: {m}")));
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed is required");
        }
        if self.smoothing_window == 0 {
            return bad("smoothing_window", "must be at least 1");
        }
        match self.kind {
            ExperimentKind::GridworldTabular => {
                if self.total_episodes.is_some() && self.total_steps.is_some() {
                    return bad("total_episodes", "set either total_episodes or total_steps, not both");
                }
                self.gridworld
                    .validate()
                    .map_err(|e| ExperimentError::Config(format!("gridworld: {e}")))?;
                self.tabular
                    .validate()
                    .map_err(|e| ExperimentError::Config(format!("tabular: {e}")))?;
            }
            ExperimentKind::MinizorkDqn => {
                if self.variant == Variant::OracleElim {
                    return bad("variant", "oracle-elim is only available for gridworld-tabular");
                }
                if self.total_episodes.is_some() {
                    return bad("total_episodes", "minizork-dqn runs are sized by total_steps");
                }
                self.dqn
                    .validate()
                    .map_err(|e| ExperimentError::Config(format!("dqn: {e}")))?;
                self.minizork
                    .load_world()
                    .map_err(|e| ExperimentError::Config(format!("minizork.world: {e}")))?;
            }
            ExperimentKind::BanditSim => {
                if self.variant != Variant::Ae {
                    return bad("variant", "bandit-sim only runs the eliminator (variant = \"ae\")");
                }
                if self.bandit.trials == 0 {
                    return bad("bandit.trials", "must be positive");
                }
                self.bandit
                    .synthetic
                    .validate()
                    .map_err(|e| ExperimentError::Config(format!("bandit: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn tabular_for_variant(&self) -> TabularConfig {
        TabularConfig {
            elimination_mode: match self.variant {
                Variant::Vanilla => EliminationMode::Off,
                Variant::Ae => EliminationMode::CountConfidence,
                Variant::OracleElim => EliminationMode::Oracle,
            },
            ..self.tabular.clone()
        }
    }

    pub fn dqn_for_variant(&self) -> AgentConfig {
        AgentConfig {
            variant: match self.variant {
                Variant::Vanilla => DqnVariant::Vanilla,
                _ => DqnVariant::Ae,
            },
            ..self.dqn.clone()
        }
    }
}

pub const DEFAULT_EPISODES: u64 = 30_000;
pub const DEFAULT_STEPS: u64 = 200_000;

pub fn tabular_records(seed: u64, episodes: &[TabularEpisode]) -> Vec<EpisodeRecord> {
    episodes
        .iter()
        .map(|e| EpisodeRecord {
            seed,
            episode: e.episode,
            global_step: e.global_step,
            train_return: e.train_return,
            eval_return: None,
            length: e.length,
            mean_admissible: e.mean_admissible,
            eliminated_valid: Some(e.eliminated_valid),
        })
        .collect()
}

/// Runs one grid-world seed until the episode or step budget is used.
pub fn run_gridworld_seed(config: &ExperimentConfig, seed: u64) -> Result<Vec<EpisodeRecord>, ExperimentError> {
    let mut run = TabularRun::new(&config.gridworld, &config.tabular_for_variant(), seed)?;
    let episodes = match (config.total_episodes, config.total_steps) {
        (_, Some(steps)) => {
            let mut out = Vec::new();
            while run.global_step() < steps {
                out.extend(run.run_episodes(1)?);
            }
            out
        }
        (e, None) => run.run_episodes(e.unwrap_or(DEFAULT_EPISODES) as usize)?,
    };
    Ok(tabular_records(seed, &episodes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    pub evals: Vec<EvalPoint>,
}

pub fn run_minizork_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedRun, ExperimentError> {
    let env = config.minizork.build_env()?;
    let log = run_training(env, &config.dqn_for_variant(), seed, config.total_steps.unwrap_or(DEFAULT_STEPS))?;
    let episodes = log.episodes.into_iter().map(|r| EpisodeRecord { seed, ..r }).collect();
    Ok(SeedRun {
        seed,
        episodes,
        evals: log.evals,
    })
}

/// Mean over seeds of one aggregated row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub episode: usize,
    pub seeds: usize,
    pub global_step: f64,
    pub train_return: f64,
    pub train_return_std: f64,
    pub eval_return: Option<f64>,
    pub length: f64,
    pub mean_admissible: f64,
    pub eliminated_valid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalAggregate {
    pub global_step: u64,
    pub seeds: usize,
    pub eval_return: f64,
    pub eval_return_std: f64,
    pub mean_admissible: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Row-wise means over the common episode prefix of all seeds.
pub fn aggregate_episodes(runs: &[Vec<EpisodeRecord>]) -> Vec<AggregateRecord> {
    let n = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let col = |f: &dyn Fn(&EpisodeRecord) -> f64| runs.iter().map(|r| f(&r[i])).collect::<Vec<f64>>();
            let opt = |f: &dyn Fn(&EpisodeRecord) -> Option<f64>| {
                let v: Option<Vec<f64>> = runs.iter().map(|r| f(&r[i])).collect();
                v.map(|v| mean(&v))
            };
            let ret = col(&|r| r.train_return);
            AggregateRecord {
                episode: i,
                seeds: runs.len(),
                global_step: mean(&col(&|r| r.global_step as f64)),
                train_return: mean(&ret),
                train_return_std: sample_std(&ret),
                eval_return: opt(&|r| r.eval_return),
                length: mean(&col(&|r| r.length as f64)),
                mean_admissible: mean(&col(&|r| r.mean_admissible)),
                eliminated_valid: opt(&|r| r.eliminated_valid.map(|v| v as f64)),
            }
        })
        .collect()
}

pub fn aggregate_evals(runs: &[Vec<EvalPoint>]) -> Result<Vec<EvalAggregate>, ExperimentError> {
    let n = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let step = runs[0][i].global_step;
            if runs.iter().any(|r| r[i].global_step != step) {
                return Err(ExperimentError::Axis(format!("evaluation {i} happened at different steps")));
            }
            let ret: Vec<f64> = runs.iter().map(|r| r[i].eval_return).collect();
            let adm: Vec<f64> = runs.iter().map(|r| r[i].mean_admissible).collect();
            Ok(EvalAggregate {
                global_step: step,
                seeds: runs.len(),
                eval_return: mean(&ret),
                eval_return_std: sample_std(&ret),
                mean_admissible: mean(&adm),
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let csv_err = |e: csv::Error| ExperimentError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>, ExperimentError> {
    let csv_err = |e: csv::Error| ExperimentError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

/// What a run wrote and its headline numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
    /// Last point of the seed-averaged smoothed training return.
    pub final_smoothed_return: Option<f64>,
    pub final_smoothed_eval_return: Option<f64>,
    pub bandit: Option<SimSummary>,
}

/// Runs the experiment, writing one CSV per seed, aggregates,
/// `config.resolved.toml` and `summary.json` into the output directory.
/// Seeds run in parallel; outputs depend only on the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary, ExperimentError> {
    config.validate()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let resolved = dir.join("config.resolved.toml");
    fs::write(&resolved, config.to_toml()).map_err(io_err(&resolved))?;
    let mut files = vec!["config.resolved.toml".to_string()];
    let mut summary = Summary {
        kind: config.kind,
        variant: config.variant,
        seeds: config.seeds.clone(),
        files: Vec::new(),
        final_smoothed_return: None,
        final_smoothed_eval_return: None,
        bandit: None,
    };

    let emit = |name: String, files: &mut Vec<String>| -> PathBuf {
        files.push(name.clone());
        dir.join(name)
    };

    match config.kind {
        ExperimentKind::GridworldTabular | ExperimentKind::MinizorkDqn => {
            let runs: Vec<SeedRun> = config
                .seeds
                .par_iter()
                .map(|&seed| match config.kind {
                    ExperimentKind::GridworldTabular => Ok(SeedRun {
                        seed,
                        episodes: run_gridworld_seed(config, seed)?,
                        evals: Vec::new(),
                    }),
                    _ => run_minizork_seed(config, seed),
                })
                .collect::<Result<_, ExperimentError>>()?;
            for run in &runs {
                write_csv(&emit(format!("seed_{}.csv", run.seed), &mut files), &run.episodes)?;
            }
            let episodes: Vec<Vec<EpisodeRecord>> = runs.iter().map(|r| r.episodes.clone()).collect();
            write_csv(&emit("aggregate.csv".into(), &mut files), &aggregate_episodes(&episodes))?;
            let series: Vec<Vec<f64>> = episodes
                .iter()
                .map(|r| r.iter().map(|e| e.train_return).collect())
                .collect();
            summary.final_smoothed_return = smoothed_band(&series, config.smoothing_window)
                .ok()
                .and_then(|(m, _)| m.last().copied());
            if config.kind == ExperimentKind::MinizorkDqn && config.dqn.eval_interval > 0 {
                for run in &runs {
                    write_csv(&emit(format!("evals_seed_{}.csv", run.seed), &mut files), &run.evals)?;
                }
                let evals: Vec<Vec<EvalPoint>> = runs.iter().map(|r| r.evals.clone()).collect();
                write_csv(&emit("evals_aggregate.csv".into(), &mut files), &aggregate_evals(&evals)?)?;
                let series: Vec<Vec<f64>> = evals
                    .iter()
                    .map(|r| r.iter().map(|e| e.eval_return).collect())
                    .collect();
                summary.final_smoothed_eval_return = smoothed_band(&series, EVAL_WINDOW)
                    .ok()
                    .and_then(|(m, _)| m.last().copied());
            }
        }
        ExperimentKind::BanditSim => {
            let seeds: Vec<u64> = (0..config.bandit.trials as u64).collect();
            let outcomes = run_trials(&config.bandit.synthetic, &seeds)?;
            #[derive(Serialize)]
            struct TrialRow {
                seed: u64,
                first_false_elimination: Option<usize>,
                first_confidence_failure: Option<usize>,
                bound_violations: usize,
                max_bound_ratio: f64,
            }
            let rows: Vec<TrialRow> = outcomes
                .iter()
                .map(|o| TrialRow {
                    seed: o.seed,
                    first_false_elimination: o.first_false_elimination,
                    first_confidence_failure: o.first_confidence_failure,
                    bound_violations: o.checkpoints.iter().map(|c| c.bound_violations).sum(),
                    max_bound_ratio: o.checkpoints.iter().map(|c| c.max_bound_ratio).fold(0.0, f64::max),
                })
                .collect();
            write_csv(&emit("trials.csv".into(), &mut files), &rows)?;
            summary.bandit = Some(SimSummary::from_outcomes(&outcomes));
        }
    }
    files.push("summary.json".into());
    summary.files = files;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(summary)
}

/// Moving-average window, in evaluation points, for evaluation curves.
pub const EVAL_WINDOW: usize = 5;

/// Centered moving average. Near the ends the window shrinks to the
/// available points; a window of `w` covers `i − ⌊(w−1)/2⌋ ..= i + ⌊w/2⌋`.
pub fn moving_average(y: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let n = y.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in y {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub((window - 1) / 2);
            let hi = (i + window / 2).min(n - 1);
            if window == 1 {
                y[i]
            } else {
                (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
            }
        })
        .collect()
}

/// Smooths every seed's series, then returns the cross-seed mean and the
/// band `std / 3` at each point. All series must have the same length.
pub fn smoothed_band(series: &[Vec<f64>], window: usize) -> Result<(Vec<f64>, Vec<f64>), ExperimentError> {
    let Some(first) = series.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    if series.iter().any(|s| s.len() != first.len()) {
        return Err(ExperimentError::Axis("series lengths differ".into()));
    }
    let smoothed: Vec<Vec<f64>> = series.iter().map(|s| moving_average(s, window)).collect();
    let n = first.len();
    let mut m = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let col: Vec<f64> = smoothed.iter().map(|s| s[i]).collect();
        m.push(mean(&col));
        b.push(sample_std(&col) / 3.0);
    }
    Ok((m, b))
}

/// First x at which `y` reaches `level`.
pub fn first_reach(x: &[f64], y: &[f64], level: f64) -> Option<f64> {
    x.iter().zip(y).find(|(_, &v)| v >= level).map(|(&x, _)| x)
}

/// A smoothed curve for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub band: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct SmoothedRow<'a> {
    label: &'a str,
    x: f64,
    mean: f64,
    band: f64,
}

/// Reads per-seed CSVs of each labelled group, smooths column `y_column`
/// against `x_column`, and builds one curve per group. Rows with an empty
/// `y_column` are skipped. Seeds within a group must share the x axis.
pub fn load_curves(
    groups: &[(String, Vec<PathBuf>)],
    x_column: &str,
    y_column: &str,
    window: usize,
) -> Result<Vec<Curve>, ExperimentError> {
    if window == 0 {
        return Err(ExperimentError::Config("window must be at least 1".into()));
    }
    let mut curves = Vec::new();
    for (label, paths) in groups {
        let mut axis: Option<Vec<f64>> = None;
        let mut series = Vec::new();
        for p in paths {
            let (x, y) = read_columns(p, x_column, y_column)?;
            match &axis {
                None => axis = Some(x),
                Some(a) if *a != x => {
                    return Err(ExperimentError::Axis(format!(
                        "{} does not share the {x_column} axis of {}",
                        p.display(),
                        paths[0].display()
                    )))
                }
                Some(_) => {}
            }
            series.push(y);
        }
        let (mean, band) = smoothed_band(&series, window)?;
        curves.push(Curve {
            label: label.clone(),
            x: axis.unwrap_or_default(),
            mean,
            band,
        });
    }
    Ok(curves)
}

fn read_columns(path: &Path, x_column: &str, y_column: &str) -> Result<(Vec<f64>, Vec<f64>), ExperimentError> {
    let csv_err = |m: String| ExperimentError::Csv {
        path: path.to_path_buf(),
        message: m,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(e.to_string()))?;
    let headers = r.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(format!("no column {name:?}")))
    };
    let (xi, yi) = (col(x_column)?, col(y_column)?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| csv_err(e.to_string()))?;
        let (xv, yv) = (&row[xi], &row[yi]);
        if yv.is_empty() {
            continue;
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| csv_err(format!("{s:?}: {e}")));
        xs.push(parse(xv)?);
        ys.push(parse(yv)?);
    }
    Ok((xs, ys))
}

/// Writes `smoothed.csv` and `plot.svg` into `out_dir`.
pub fn smooth_and_plot(
    groups: &[(String, Vec<PathBuf>)],
    x_column: &str,
    y_column: &str,
    window: usize,
    out_dir: &Path,
) -> Result<Vec<Curve>, ExperimentError> {
    let curves = load_curves(groups, x_column, y_column, window)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let rows: Vec<SmoothedRow> = curves
        .iter()
        .flat_map(|c| {
            (0..c.x.len()).map(move |i| SmoothedRow {
                label: &c.label,
                x: c.x[i],
                mean: c.mean[i],
                band: c.band[i],
            })
        })
        .collect();
    write_csv(&out_dir.join("smoothed.csv"), &rows)?;
    let svg = render_svg(&curves, x_column, y_column);
    let path = out_dir.join("plot.svg");
    fs::write(&path, svg).map_err(io_err(&path))?;
    Ok(curves)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Mean lines with shaded bands. Output depends only on the curves.
pub fn render_svg(curves: &[Curve], x_label: &str, y_label: &str) -> String {
    let (w, h) = (800.0, 480.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 50.0);
    let pts = || curves.iter().flat_map(|c| c.x.iter().copied());
    let (mut x0, mut x1) = (pts().fold(f64::INFINITY, f64::min), pts().fold(f64::NEG_INFINITY, f64::max));
    let lows = curves.iter().flat_map(|c| c.mean.iter().zip(&c.band).map(|(m, b)| m - b));
    let highs = curves.iter().flat_map(|c| c.mean.iter().zip(&c.band).map(|(m, b)| m + b));
    let (mut y0, mut y1) = (lows.fold(f64::INFINITY, f64::min), highs.fold(f64::NEG_INFINITY, f64::max));
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(fx),
            h - bottom + 18.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        left + (w - left - right) / 2.0,
        h - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        top + (h - top - bottom) / 2.0,
        top + (h - top - bottom) / 2.0,
        escape(y_label)
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !c.x.is_empty() {
            let mut band = String::new();
            for j in 0..c.x.len() {
                let _ = write!(band, "{:.2},{:.2} ", sx(c.x[j]), sy(c.mean[j] + c.band[j]));
            }
            for j in (0..c.x.len()).rev() {
                let _ = write!(band, "{:.2},{:.2} ", sx(c.x[j]), sy(c.mean[j] - c.band[j]));
            }
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.trim_end()
            );
            let line: Vec<String> = (0..c.x.len())
                .map(|j| format!("{:.2},{:.2}", sx(c.x[j]), sy(c.mean[j])))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                line.join(" ")
            );
        }
        let ly = top + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#,
            w - right - 150.0,
            w - right - 125.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            w - right - 118.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
