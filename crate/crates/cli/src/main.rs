use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actelim::experiment::{
    run_experiment, smooth_and_plot, ExperimentConfig, ExperimentKind, Summary, Variant, EVAL_WINDOW,
};
use actelim::minizork::{repl, Game};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "actelim", version, about = "Action-elimination experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabular Q-learning on the category grid world.
    Gridworld(RunArgs),
    /// DQN and AE-DQN on a Mini-Zork world.
    Minizork(RunArgs),
    /// Monte-Carlo check of the linear eliminator on synthetic bandits.
    BanditSim(RunArgs),
    /// Smooth per-seed CSVs of one or more runs and draw them.
    Plot(PlotArgs),
    /// Type commands into a Mini-Zork world.
    Play(PlayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; its `kind` must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// vanilla, ae or oracle-elim.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    episodes: Option<u64>,
    /// Number of trials (bandit-sim only).
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// `LABEL=DIR`, one per run directory.
    #[arg(long = "run", required = true, value_parser = parse_run)]
    runs: Vec<(String, PathBuf)>,
    /// Plot evaluation returns against global step instead of training
    /// returns against episode.
    #[arg(long)]
    evals: bool,
    /// Moving-average window; defaults to the run's smoothing window for
    /// training curves and 5 for evaluation curves.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlayArgs {
    /// `egg`, `troll` or a world file.
    #[arg(long, default_value = "egg")]
    world: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant {s:?} (vanilla, ae, oracle-elim)"))
}

fn parse_run(s: &str) -> Result<(String, PathBuf), String> {
    let (label, dir) = s.split_once('=').ok_or("expected LABEL=DIR")?;
    Ok((label.to_string(), PathBuf::from(dir)))
}

fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::GridworldTabular => "gridworld-tabular",
        ExperimentKind::MinizorkDqn => "minizork-dqn",
        ExperimentKind::BanditSim => "bandit-sim",
    }
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let c = ExperimentConfig::load(path)?;
            if c.kind != kind {
                bail!(
                    "{}: kind is {}, but this subcommand runs {}",
                    path.display(),
                    kind_name(c.kind),
                    kind_name(kind)
                );
            }
            c
        }
        None => ExperimentConfig {
            kind,
            output_dir: PathBuf::from(format!("runs/{}", kind_name(kind))),
            ..Default::default()
        },
    };
    if let Some(s) = &args.seeds {
        config.seeds = s.clone();
    }
    if let Some(o) = &args.out {
        config.output_dir = o.clone();
    }
    if let Some(v) = args.variant {
        config.variant = v;
    }
    if args.steps.is_some() {
        config.total_steps = args.steps;
        config.total_episodes = None;
    }
    if args.episodes.is_some() {
        config.total_episodes = args.episodes;
        config.total_steps = None;
    }
    if let Some(t) = args.trials {
        config.bandit.trials = t;
    }
    config.validate()?;
    Ok(config)
}

fn report(config: &ExperimentConfig, s: &Summary) {
    println!(
        "{} {} seeds {:?} -> {}",
        kind_name(s.kind),
        s.variant.name(),
        s.seeds,
        config.output_dir.display()
    );
    if let Some(r) = s.final_smoothed_return {
        println!("final smoothed train return {r:.3}");
    }
    if let Some(r) = s.final_smoothed_eval_return {
        println!("final smoothed eval return {r:.3}");
    }
    if let Some(b) = &s.bandit {
        println!("{}", serde_json::to_string_pretty(b).expect("summary serializes"));
    }
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<()> {
    let config = build_config(kind, args)?;
    let summary = run_experiment(&config)?;
    report(&config, &summary);
    Ok(())
}

fn seed_files(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(seed) = name
            .strip_prefix(prefix)
            .and_then(|r| r.strip_suffix(".csv"))
            .and_then(|r| r.parse().ok())
        {
            files.push((seed, path));
        }
    }
    if files.is_empty() {
        bail!("{}: no {prefix}*.csv files", dir.display());
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

fn plot(args: &PlotArgs) -> Result<()> {
    let (prefix, x, y) = if args.evals {
        ("evals_seed_", "global_step", "eval_return")
    } else {
        ("seed_", "episode", "train_return")
    };
    let mut groups = Vec::new();
    for (label, dir) in &args.runs {
        groups.push((label.clone(), seed_files(dir, prefix)?));
    }
    let window = match args.window {
        Some(w) => w,
        None if args.evals => EVAL_WINDOW,
        None => {
            let resolved = args.runs[0].1.join("config.resolved.toml");
            ExperimentConfig::load(&resolved).map(|c| c.smoothing_window).unwrap_or(200)
        }
    };
    let curves = smooth_and_plot(&groups, x, y, window, &args.out)?;
    for c in &curves {
        if let (Some(m), Some(b)) = (c.mean.last(), c.band.last()) {
            println!("{}: final {m:.3} ± {b:.3}", c.label);
        }
    }
    println!("wrote {}", args.out.join("plot.svg").display());
    Ok(())
}

fn play(args: &PlayArgs) -> Result<()> {
    let spec = actelim::experiment::MiniZorkConfig {
        world: args.world.clone(),
        ..Default::default()
    }
    .load_world()?;
    let game = Game::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let score = repl(&game, io::stdin().lock(), io::stdout().lock(), &mut rng)?;
    println!("score {score}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gridworld(a) => run(ExperimentKind::GridworldTabular, a),
        Command::Minizork(a) => run(ExperimentKind::MinizorkDqn, a),
        Command::BanditSim(a) => run(ExperimentKind::BanditSim, a),
        Command::Plot(a) => plot(a),
        Command::Play(a) => play(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
