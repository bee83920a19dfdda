//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line and
//! then asserts it. Tests hold a shared lock so that timings are measured on
//! an otherwise idle machine.
//!
//! Run with `cargo test --release -p actelim-core --test acceptance`.

use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use actelim::eliminator::BetaMode;
use actelim::env::TextEnvironment;
use actelim::experiment::{run_minizork_seed, smoothed_band, ExperimentConfig, ExperimentKind, Variant, EVAL_WINDOW};
use actelim::minizork::{build_action_set, soundness_check, Game, MiniZorkEnv, WorldSpec};
use actelim::neural::{AgentConfig, DqnVariant, FeatureEncoder, Features, FrameHistory, Mlp, ReplayBuffer, RngStreams, Transition, Workspace};
use actelim::synthetic::{run_trials, SimSummary, SyntheticConfig};
use actelim::tabular::{EliminationMode, EpsilonSchedule, TabularConfig, TabularRun};
use actelim::{GridConfig, SpdMatrix};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line and fails the test if any check failed.
fn verdict(id: u32, name: &str, started: Instant, limit: Duration, checks: &[(bool, String)]) {
    let elapsed = started.elapsed();
    let mut ok = checks.iter().all(|(c, _)| *c);
    let mut detail: Vec<String> = checks.iter().map(|(_, d)| d.clone()).collect();
    if elapsed > limit {
        ok = false;
        detail.push(format!("runtime {:.1}s exceeds {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()));
    } else {
        detail.push(format!("runtime {:.1}s", elapsed.as_secs_f64()));
    }
    let tag = if ok { "PASS" } else { "FAIL" };
    // Written directly so the line shows up even when output is captured.
    let mut out = std::io::stdout().lock();
    writeln!(out, "{tag} criterion {id:>2} {name}: {}", detail.join("; ")).unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {id} failed");
}

// ---------------------------------------------------------------- linalg

/// Gauss-Jordan inverse with partial pivoting.
fn direct_inverse(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs())).unwrap();
        for k in 0..n {
            m.swap(c * n + k, p * n + k);
            inv.swap(c * n + k, p * n + k);
        }
        let d = m[c * n + c];
        for k in 0..n {
            m[c * n + k] /= d;
            inv[c * n + k] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r * n + c];
                for k in 0..n {
                    m[r * n + k] -= f * m[c * n + k];
                    inv[r * n + k] -= f * inv[c * n + k];
                }
            }
        }
    }
    inv
}

#[test]
fn c01_sherman_morrison_exactness() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(1..=8);
        let updates = rng.gen_range(1..=500);
        let lambda = rng.gen_range(0.1..2.0);
        let mut m = SpdMatrix::new(d, lambda).unwrap();
        let mut v = vec![0.0; d * d];
        for i in 0..d {
            v[i * d + i] = lambda;
        }
        for _ in 0..updates {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            m.rank1_update(&x).unwrap();
            for i in 0..d {
                for j in 0..d {
                    v[i * d + j] += x[i] * x[j];
                }
            }
        }
        let direct = direct_inverse(&v, d);
        let err = m.v_inv().iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    verdict(
        1,
        "Sherman-Morrison exactness",
        t,
        Duration::from_secs(5),
        &[(worst < 1e-9, format!("max |V⁻¹ − inv(V)| = {worst:.2e} over 100 sequences (< 1e-9)"))],
    );
}

#[test]
fn c02_quadratic_form_bound() {
    let _g = serial();
    let t = Instant::now();
    let d = 6;
    let mut x = vec![0.0; d];
    x[2] = 0.6;
    x[4] = 0.8;
    let mut m = SpdMatrix::new(d, 1.0).unwrap();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=10_000u32 {
        m.rank1_update(&x).unwrap();
        let q = m.quad_form(&x).unwrap();
        let excess = q - 1.0 / n as f64;
        worst = worst.max(excess);
        if excess > 1e-12 {
            violations += 1;
        }
    }
    verdict(
        2,
        "quadratic-form bound",
        t,
        Duration::from_secs(1),
        &[(
            violations == 0,
            format!("{violations} of 10000 insertions exceed 1/T + 1e-12 (max excess {worst:.2e})"),
        )],
    );
}

// ---------------------------------------------------------------- bandits

#[test]
fn c03_delta_correctness() {
    let _g = serial();
    let t = Instant::now();
    let config = SyntheticConfig {
        noise: 0.1,
        delta: 0.1,
        beta_mode: BetaMode::ExactDet,
        steps: 5000,
        ..Default::default()
    };
    assert_eq!((config.dim, config.num_arms, config.num_valid), (8, 20, 5));
    let seeds: Vec<u64> = (0..1000).collect();
    let s = SimSummary::from_outcomes(&run_trials(&config, &seeds).unwrap());
    verdict(
        3,
        "delta-correctness",
        t,
        Duration::from_secs(120),
        &[(
            s.false_elimination_rate <= 0.12,
            format!(
                "false-elimination rate {:.3} over {} trials (≤ 0.12); confidence failures {:.3}",
                s.false_elimination_rate, s.trials, s.confidence_failure_rate
            ),
        )],
    );
}

#[test]
fn c04_visit_bound() {
    let _g = serial();
    let t = Instant::now();
    let noisy = SyntheticConfig {
        u: 0.8,
        ell: 0.4,
        checkpoints: vec![500, 1000, 5000],
        steps: 5000,
        ..Default::default()
    };
    let seeds: Vec<u64> = (0..1000).collect();
    let s = SimSummary::from_outcomes(&run_trials(&noisy, &seeds).unwrap());

    let noiseless = SyntheticConfig {
        noise: 0.0,
        checkpoints: vec![5000, 10_000],
        steps: 10_000,
        ..noisy.clone()
    };
    let seeds: Vec<u64> = (0..100).collect();
    let outcomes = run_trials(&noiseless, &seeds).unwrap();
    let frozen = outcomes
        .iter()
        .filter(|o| o.checkpoint(5000).unwrap().invalid_pulls == o.checkpoint(10_000).unwrap().invalid_pulls)
        .count();
    verdict(
        4,
        "invalid-arm visit bound",
        t,
        Duration::from_secs(120),
        &[
            (
                s.visit_bound_violations == 0,
                format!(
                    "{} violations in {} trials without confidence failure (max pulls/bound {:.3})",
                    s.visit_bound_violations, s.trials_checked_for_bound, s.max_bound_ratio
                ),
            ),
            (
                frozen == 100,
                format!("noiseless: invalid pulls unchanged 5000→10000 in {frozen}/100 seeds"),
            ),
        ],
    );
}

// ---------------------------------------------------------------- grid world

const GRID_WINDOW: usize = 200;

fn grid_config(k: usize) -> GridConfig {
    GridConfig {
        k_categories: k,
        ..Default::default()
    }
}

fn tabular(mode: EliminationMode) -> TabularConfig {
    TabularConfig {
        elimination_mode: mode,
        lr_exponent: 0.51,
        ..Default::default()
    }
}

/// Smoothed 5-seed mean training return over `episodes` episodes.
fn grid_curve(k: usize, mode: EliminationMode, episodes: usize) -> Vec<f64> {
    let series: Vec<Vec<f64>> = (0..5)
        .map(|seed| {
            let mut run = TabularRun::new(&grid_config(k), &tabular(mode), seed).unwrap();
            run.run_episodes(episodes).unwrap().iter().map(|e| e.train_return).collect()
        })
        .collect();
    smoothed_band(&series, GRID_WINDOW).unwrap().0
}

/// Episodes until the smoothed 5-seed mean reaches `level`, running all seeds
/// in lockstep chunks up to `cap` episodes. Only points with a full window
/// count.
fn grid_reach(k: usize, mode: EliminationMode, level: f64, cap: usize) -> Option<usize> {
    let mut runs: Vec<TabularRun> = (0..5)
        .map(|seed| TabularRun::new(&grid_config(k), &tabular(mode), seed).unwrap())
        .collect();
    let mut series = vec![Vec::new(); 5];
    let chunk = 5000;
    while series[0].len() < cap {
        for (run, s) in runs.iter_mut().zip(&mut series) {
            s.extend(run.run_episodes(chunk).unwrap().iter().map(|e| e.train_return));
        }
        let (mean, _) = smoothed_band(&series, GRID_WINDOW).unwrap();
        let full = mean.len() - GRID_WINDOW / 2;
        if let Some(i) = mean[..full].iter().position(|&v| v >= level) {
            return Some(i + 1);
        }
    }
    None
}

/// 90% of the way from the worst possible return to `target`.
fn ninety_percent(target: f64, horizon: usize) -> f64 {
    let worst = -(horizon as f64);
    worst + 0.9 * (target - worst)
}

fn first_index(y: &[f64], level: f64) -> Option<usize> {
    let full = y.len() - GRID_WINDOW / 2;
    y[..full].iter().position(|&v| v >= level).map(|i| i + 1)
}

#[test]
fn c05_grid_ordering() {
    let _g = serial();
    let t = Instant::now();
    let episodes = 30_000;
    let vanilla = grid_curve(10, EliminationMode::Off, episodes);
    let ae = grid_curve(10, EliminationMode::CountConfidence, episodes);
    let oracle = grid_curve(10, EliminationMode::Oracle, episodes);
    let (fv, fa, fo) = (*vanilla.last().unwrap(), *ae.last().unwrap(), *oracle.last().unwrap());
    let level = ninety_percent(fo, grid_config(10).horizon);
    let reach_ae = first_index(&ae, level);
    let reach_vanilla = first_index(&vanilla, level);
    let speed_ok = match (reach_ae, reach_vanilla) {
        (Some(a), Some(v)) => a as f64 <= 0.6 * v as f64,
        (Some(a), None) => a as f64 <= 0.6 * episodes as f64,
        _ => false,
    };
    let show = |r: Option<usize>| r.map_or(format!("not within {episodes}"), |e| e.to_string());
    verdict(
        5,
        "grid-world ordering",
        t,
        Duration::from_secs(300),
        &[
            (
                fv <= fa && fa <= fo,
                format!("final smoothed returns vanilla {fv:.2} ≤ AE {fa:.2} ≤ oracle {fo:.2}"),
            ),
            (
                speed_ok,
                format!(
                    "episodes to {level:.2}: AE {} vs vanilla {} (need ≤ 60%)",
                    show(reach_ae),
                    show(reach_vanilla)
                ),
            ),
        ],
    );
}

#[test]
fn c06_category_growth() {
    let _g = serial();
    let t = Instant::now();
    let cap = 300_000;
    let mut ratios = Vec::new();
    let mut detail = Vec::new();
    for k in [10, 25] {
        let oracle = grid_curve(k, EliminationMode::Oracle, 30_000);
        let level = ninety_percent(*oracle.last().unwrap(), grid_config(k).horizon);
        let v = grid_reach(k, EliminationMode::Off, level, cap);
        let a = grid_reach(k, EliminationMode::CountConfidence, level, cap);
        let ratio = match (v, a) {
            (Some(v), Some(a)) => Some(v as f64 / a as f64),
            _ => None,
        };
        detail.push(format!("K={k}: threshold {level:.2}, vanilla {v:?}, AE {a:?}, ratio {ratio:.3?}"));
        ratios.push(ratio);
    }
    let ok = matches!((ratios[0], ratios[1]), (Some(r10), Some(r25)) if r25 > r10);
    verdict(
        6,
        "category-growth effect",
        t,
        Duration::from_secs(600),
        &[(ok, detail.join("; "))],
    );
}

/// Value iteration on a deterministic open grid with unit step cost and an
/// absorbing goal at (0, 0). Moves off the grid leave the agent in place.
fn value_iteration(w: usize, h: usize) -> Vec<[f64; 4]> {
    let moves: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, 1), (0, -1)];
    let next = |c: usize, m: usize| {
        let (r, col) = ((c / w) as isize, (c % w) as isize);
        let (nr, nc) = (r + moves[m].0, col + moves[m].1);
        if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
            c
        } else {
            nr as usize * w + nc as usize
        }
    };
    let mut v = vec![0.0; w * h];
    loop {
        let mut change: f64 = 0.0;
        for c in 1..w * h {
            let best = (0..4).map(|m| -1.0 + v[next(c, m)]).fold(f64::NEG_INFINITY, f64::max);
            change = change.max((best - v[c]).abs());
            v[c] = best;
        }
        if change == 0.0 {
            break;
        }
    }
    (0..w * h).map(|c| std::array::from_fn(|m| -1.0 + v[next(c, m)])).collect()
}

#[test]
fn c07_tabular_convergence() {
    let _g = serial();
    let t = Instant::now();
    let grid = GridConfig {
        width: 5,
        height: 5,
        k_categories: 1,
        p_correct_same: 1.0,
        walls: actelim::gridworld::WallLayout::Open,
        ..Default::default()
    };
    let config = TabularConfig {
        epsilon: EpsilonSchedule::Constant { value: 1.0 },
        ..Default::default()
    };
    let mut run = TabularRun::new(&grid, &config, 7).unwrap();
    while run.global_step() < 200_000 {
        run.run_episodes(1).unwrap();
    }
    let q_star = value_iteration(5, 5);
    let agent = run.agent();
    let mut worst: f64 = 0.0;
    for c in 1..25 {
        for (a, &q) in q_star[c].iter().enumerate() {
            worst = worst.max((agent.q(c, a) - q).abs());
        }
    }
    verdict(
        7,
        "tabular Q convergence",
        t,
        Duration::from_secs(30),
        &[(
            worst < 0.1,
            format!("max |Q − Q*| = {worst:.4} after {} steps (< 0.1)", run.global_step()),
        )],
    );
}

// ---------------------------------------------------------------- networks

/// Dense forward pass and batch loss written from the raw layer buffers.
fn reference_loss(net: &Mlp, xs: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> f64 {
    let layers = net.layers();
    let mut total = 0.0;
    for ((x, &a), &y) in xs.iter().zip(actions).zip(targets) {
        let mut h = x.clone();
        for (k, l) in layers.iter().enumerate() {
            let mut out = l.b.clone();
            for (i, &hi) in h.iter().enumerate() {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += hi * l.w[i * l.outputs + j];
                }
            }
            if k + 1 < layers.len() {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            h = out;
        }
        total += (y - h[a]).powi(2);
    }
    total / xs.len() as f64
}

#[test]
fn c08_gradient_correctness() {
    let _g = serial();
    let t = Instant::now();
    let base = AgentConfig::default();
    let (input, k) = (48, 11);
    let nets = [
        ("Q", [&[input][..], &base.q_hidden, &[k]].concat()),
        ("AEN", [&[input][..], &base.aen_hidden, &[k]].concat()),
    ];
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut details = Vec::new();
    let mut ok = true;
    for (name, sizes) in &nets {
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for _point in 0..10 {
            let mut net = Mlp::new(sizes, &mut rng);
            // Move away from the zero-bias initialization.
            for p in 0..net.num_params() {
                *net.param_mut(p) += rng.gen_range(-0.05..0.05);
            }
            let dense: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..input).map(|_| if rng.gen_bool(0.3) { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect())
                .collect();
            let feats: Vec<Features> = dense.iter().map(|d| Features::from_dense(d)).collect();
            let xs: Vec<&Features> = feats.iter().collect();
            let actions: Vec<usize> = (0..3).map(|_| rng.gen_range(0..k)).collect();
            let targets: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut ws = Workspace::default();
            net.gradient(&xs, &actions, &targets, &mut ws);
            let analytic = ws.flat_gradient();
            // Every bias, plus a random sample of each weight matrix.
            let mut coords = Vec::new();
            let mut offset = 0;
            for l in net.layers() {
                for _ in 0..64 {
                    coords.push(offset + rng.gen_range(0..l.w.len()));
                }
                coords.extend(offset + l.w.len()..offset + l.w.len() + l.b.len());
                offset += l.w.len() + l.b.len();
            }
            for &c in &coords {
                let orig = *net.param_mut(c);
                *net.param_mut(c) = orig + h;
                let up = reference_loss(&net, &dense, &actions, &targets);
                *net.param_mut(c) = orig - h;
                let down = reference_loss(&net, &dense, &actions, &targets);
                *net.param_mut(c) = orig;
                let numeric = (up - down) / (2.0 * h);
                let rel = (analytic[c] - numeric).abs() / analytic[c].abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
            }
        }
        ok &= worst < 1e-4;
        details.push(format!("{name} {sizes:?}: max relative error {worst:.2e} over {checked} coordinates"));
    }
    verdict(8, "gradient correctness", t, Duration::from_secs(10), &[(ok, details.join("; "))]);
}

fn egg_env() -> MiniZorkEnv {
    let spec = WorldSpec::egg();
    let actions = build_action_set(&spec, 100, false).unwrap();
    MiniZorkEnv::new(spec, actions)
}

/// Plain DQN written directly against the network and replay primitives.
fn reference_dqn(env: &mut MiniZorkEnv, config: &AgentConfig, seed: u64, total: u64) -> Vec<usize> {
    let k = env.num_actions();
    let mut rngs = RngStreams::from_seed(seed);
    let mut q = Mlp::new(&config.q_sizes(k), &mut rngs.q_init);
    let mut q_target = q.clone();
    let encoder = FeatureEncoder::new(config.hash_dim);
    let mut replay = ReplayBuffer::new(config.replay_capacity);
    let mut ws = Workspace::default();
    let mut actions = Vec::new();
    let mut hist = FrameHistory::start(env.reset(&mut rngs.env));
    let mut x = Arc::new(encoder.encode(hist.frames()));
    for step in 0..total {
        let eps = config.epsilon_at(step, total);
        let qs = q.forward(&x);
        let explore = rngs.agent.gen::<f64>() < eps;
        let a = if explore {
            rngs.agent.gen_range(0..k)
        } else {
            (0..k).fold(0, |b, i| if qs[i] > qs[b] { i } else { b })
        };
        actions.push(a);
        let s = env.step(a, &mut rngs.env);
        hist.push(s.observation);
        let x_next = Arc::new(encoder.encode(hist.frames()));
        replay.push(Transition {
            s: x.clone(),
            a,
            r: s.reward,
            e: s.elim,
            s_next: x_next.clone(),
            done: s.terminal,
        });
        if replay.len() >= config.learning_starts.max(config.minibatch) {
            let picks = index::sample(&mut rngs.agent, replay.len(), config.minibatch);
            let batch: Vec<&Transition> = picks.iter().map(|i| replay.get(i)).collect();
            let ys: Vec<f64> = batch
                .iter()
                .map(|t| {
                    if t.done {
                        t.r
                    } else {
                        t.r + config.gamma_train * q_target.forward(&t.s_next).into_iter().fold(f64::NEG_INFINITY, f64::max)
                    }
                })
                .collect();
            let xs: Vec<&Features> = batch.iter().map(|t| t.s.as_ref()).collect();
            let acts: Vec<usize> = batch.iter().map(|t| t.a).collect();
            q.train_step(&xs, &acts, &ys, config.lr_q, config.clip_norm, &mut ws).unwrap();
        }
        if (step + 1) % config.target_sync == 0 {
            q_target = q.clone();
        }
        x = x_next;
        if s.done {
            hist = FrameHistory::start(env.reset(&mut rngs.env));
            x = Arc::new(encoder.encode(hist.frames()));
        }
    }
    actions
}

#[test]
fn c09_no_elimination_equivalence() {
    let _g = serial();
    let t = Instant::now();
    let steps = 5000;
    let config = AgentConfig {
        variant: DqnVariant::Ae,
        beta: f64::INFINITY,
        eval_interval: 0,
        ..dqn_defaults()
    };
    let mut checks = Vec::new();
    for seed in [0, 1] {
        let log = actelim::neural::run_training(egg_env(), &config, seed, steps).unwrap();
        let reference = reference_dqn(&mut egg_env(), &config, seed, steps);
        let first_diff = log.actions.iter().zip(&reference).position(|(a, b)| a != b);
        let distinct = {
            let mut a = reference.clone();
            a.sort_unstable();
            a.dedup();
            a.len()
        };
        checks.push((
            first_diff.is_none() && log.actions.len() == reference.len(),
            format!(
                "seed {seed}: {} vs {} actions, first difference {first_diff:?}, {distinct} distinct actions",
                log.actions.len(),
                reference.len()
            ),
        ));
    }
    verdict(9, "no-elimination equivalence", t, Duration::from_secs(30), &checks);
}

// ---------------------------------------------------------------- mini-zork

fn dqn_defaults() -> AgentConfig {
    ExperimentConfig::default().dqn
}

#[test]
fn c10_minizork_speedup() {
    let _g = serial();
    let t = Instant::now();
    let total = 200_000;
    let base = ExperimentConfig {
        kind: ExperimentKind::MinizorkDqn,
        total_steps: Some(total),
        ..Default::default()
    };
    assert_eq!(base.minizork.n_take_distractors, 100);
    assert_eq!(base.minizork.load_world().unwrap().horizon, 100);
    let mut curves = Vec::new();
    for variant in [Variant::Ae, Variant::Vanilla] {
        let config = ExperimentConfig {
            variant,
            ..base.clone()
        };
        let mut steps = Vec::new();
        let series: Vec<Vec<f64>> = config
            .seeds
            .iter()
            .map(|&seed| {
                let run = run_minizork_seed(&config, seed).unwrap();
                steps = run.evals.iter().map(|e| e.global_step).collect();
                run.evals.iter().map(|e| e.eval_return).collect()
            })
            .collect();
        let (mean, band) = smoothed_band(&series, EVAL_WINDOW).unwrap();
        curves.push((steps, mean, band));
    }
    let (steps, ae, ae_band) = &curves[0];
    let (_, vanilla, vanilla_band) = &curves[1];
    let reach = |y: &[f64]| y.iter().position(|&v| v >= 85.0).map(|i| steps[i]);
    let (ra, rv) = (reach(ae), reach(vanilla));
    let speed_ok = match (ra, rv) {
        (Some(a), Some(v)) => a as f64 <= 0.6 * v as f64,
        (Some(a), None) => a as f64 <= 0.6 * total as f64,
        _ => false,
    };
    let worst = (0..ae.len())
        .map(|i| (vanilla[i] - ae[i]) - ae_band[i].max(vanilla_band[i]))
        .fold(f64::NEG_INFINITY, f64::max);
    let show = |r: Option<u64>| r.map_or(format!("not within {total}"), |s| s.to_string());
    verdict(
        10,
        "Mini-Zork speedup",
        t,
        Duration::from_secs(1800),
        &[
            (
                speed_ok,
                format!(
                    "steps to smoothed eval ≥ 85: AE {} vs vanilla {} (need ≤ 60%); final AE {:.1}, vanilla {:.1}",
                    show(ra),
                    show(rv),
                    ae.last().unwrap(),
                    vanilla.last().unwrap()
                ),
            ),
            (
                worst <= 0.0,
                format!("max (vanilla − AE − band) over checkpoints {worst:.2} (≤ 0)"),
            ),
        ],
    );
}

#[test]
fn c11_soundness_oracle() {
    let _g = serial();
    let t = Instant::now();
    let spec = WorldSpec::egg();
    let mut checks = Vec::new();
    for (label, template) in [("fixed", false), ("template", true)] {
        let actions = build_action_set(&spec, 0, template).unwrap();
        let r = soundness_check(&Game::new(spec.clone()), &actions.commands, 8);
        checks.push((
            r.violations.is_empty() && r.optimal_pairs > 0,
            format!(
                "{label} ({} commands): {} states, {} optimal pairs, optimal length {:?}, {} violations",
                actions.len(),
                r.states,
                r.optimal_pairs,
                r.optimal_length,
                r.violations.len()
            ),
        ));
    }
    verdict(11, "elimination-signal soundness", t, Duration::from_secs(60), &checks);
}
