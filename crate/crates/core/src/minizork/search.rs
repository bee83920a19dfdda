//! Exhaustive check that commands on optimal trajectories never signal
//! elimination.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::game::{Game, GameState};

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: String,
    pub command: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundnessReport {
    pub depth: usize,
    pub states: usize,
    pub transitions: usize,
    /// (state, command) pairs lying on some optimal trajectory.
    pub optimal_pairs: usize,
    /// Length of the best trajectory from the initial state, if it scores.
    pub optimal_length: Option<usize>,
    pub optimal_score: i64,
    pub violations: Vec<Violation>,
}

struct Edge {
    next: usize,
    award: i64,
    terminal: bool,
    elim: f64,
}

/// Best (award, -length) over trajectories of at most `k` steps; the empty
/// trajectory counts, so states that cannot score get (0, 0).
type Value = (i64, i64);

/// Explores every command sequence of length ≤ `depth` (deduplicating
/// identical world positions) and checks each command that lies on an
/// optimal trajectory from the state that issues it. A trajectory is optimal
/// when it collects the largest award reachable within the remaining budget
/// and, among those, is shortest. Hazards are ignored.
pub fn soundness_check(game: &Game, commands: &[String], depth: usize) -> SoundnessReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut index: HashMap<GameState, usize> = HashMap::new();
    let mut states: Vec<GameState> = Vec::new();
    let mut min_depth: Vec<usize> = Vec::new();
    let mut edges: Vec<Vec<Edge>> = Vec::new();

    let start = game.initial_state();
    index.insert(start.clone(), 0);
    states.push(start);
    min_depth.push(0);
    edges.push(Vec::new());

    // States are discovered in nondecreasing depth order.
    let mut cursor = 0;
    let mut transitions = 0;
    while cursor < states.len() {
        let d = min_depth[cursor];
        if d < depth && !states[cursor].dead {
            let mut out = Vec::with_capacity(commands.len());
            for c in commands {
                let o = game.execute(&states[cursor], c, &mut rng);
                let mut next = o.state;
                next.steps = 0;
                let award = next.score - states[cursor].score;
                let terminal = o.terminal;
                let id = match index.get(&next) {
                    Some(&i) => i,
                    None => {
                        let i = states.len();
                        index.insert(next.clone(), i);
                        states.push(next);
                        min_depth.push(d + 1);
                        edges.push(Vec::new());
                        i
                    }
                };
                out.push(Edge {
                    next: id,
                    award,
                    terminal,
                    elim: o.elim,
                });
            }
            transitions += out.len();
            edges[cursor] = out;
        }
        cursor += 1;
    }

    let n = states.len();
    let mut values: Vec<Vec<Value>> = vec![vec![(0, 0); n]];
    for k in 1..=depth {
        let prev = &values[k - 1];
        let cur: Vec<Value> = (0..n)
            .map(|s| {
                edges[s]
                    .iter()
                    .map(|e| edge_value(e, prev))
                    .fold((0, 0), |best, v| best.max(v))
            })
            .collect();
        values.push(cur);
    }

    let mut optimal_pairs = 0;
    let mut violations = Vec::new();
    for s in 0..n {
        let budget = depth - min_depth[s];
        if budget == 0 {
            continue;
        }
        let best = values[budget][s];
        if best.0 <= 0 {
            continue;
        }
        for (c, e) in commands.iter().zip(&edges[s]) {
            if edge_value(e, &values[budget - 1]) == best {
                optimal_pairs += 1;
                if e.elim != 0.0 {
                    violations.push(Violation {
                        state: game.room_text(&states[s]),
                        command: c.clone(),
                    });
                }
            }
        }
    }
    let root = values[depth][0];
    SoundnessReport {
        depth,
        states: n,
        transitions,
        optimal_pairs,
        optimal_length: (root.0 > 0).then_some((-root.1) as usize),
        optimal_score: root.0,
        violations,
    }
}

fn edge_value(e: &Edge, prev: &[Value]) -> Value {
    let tail = if e.terminal { (0, 0) } else { prev[e.next] };
    (e.award + tail.0, tail.1 - 1)
}
