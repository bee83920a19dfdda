use std::hint::black_box;

use actelim::eliminator::admissible_set;
use actelim::neural::{FeatureEncoder, Features, Mlp, Workspace};
use actelim::{ArmModel, EliminationConfig, GridConfig, GridWorld, SpdMatrix};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn rank1_update(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for d in [8, 32] {
        let xs: Vec<Vec<f64>> = (0..256).map(|_| unit_vector(&mut rng, d)).collect();
        c.bench_function(&format!("rank1_update d={d} x256"), |b| {
            b.iter_batched(
                || SpdMatrix::new(d, 1.0).unwrap(),
                |mut m| {
                    for x in &xs {
                        m.rank1_update(x).unwrap();
                    }
                    m
                },
                BatchSize::SmallInput,
            )
        });
    }
}

fn admissible(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (d, k) = (32, 109);
    let config = EliminationConfig::fixed(k, 1.0, 0.5, 0.6);
    let arms: Vec<ArmModel> = (0..k)
        .map(|a| {
            let mut arm = ArmModel::new(d, 1.0).unwrap();
            for _ in 0..200 {
                let x = unit_vector(&mut rng, d);
                arm.observe(&config, &x, if a < 9 { 0.0 } else { 1.0 }).unwrap();
            }
            arm
        })
        .collect();
    let x = unit_vector(&mut rng, d);
    c.bench_function("admissible_set d=32 k=109", |b| {
        b.iter(|| admissible_set(&config, &arms, black_box(&x)).unwrap())
    });
}

fn mlp_train_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let enc = FeatureEncoder::default();
    let words = ["forest", "path", "tree", "egg", "house", "mailbox", "leaflet", "north", "small", "white"];
    let batch: Vec<Features> = (0..32)
        .map(|_| {
            let frames: Vec<String> = (0..4)
                .map(|_| {
                    (0..40)
                        .map(|_| words[rng.gen_range(0..words.len())])
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            enc.encode(&frames)
        })
        .collect();
    let xs: Vec<&Features> = batch.iter().collect();
    let actions: Vec<usize> = (0..32).map(|_| rng.gen_range(0..109)).collect();
    let targets: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut q = Mlp::new(&[enc.hash_dim, 128, 128, 109], &mut rng);
    let mut ws = Workspace::default();
    c.bench_function("mlp train_step 512-128-128-109 m=32", |b| {
        b.iter(|| q.train_step(&xs, &actions, &targets, 1e-4, 10.0, &mut ws).unwrap())
    });
    c.bench_function("mlp forward 512-128-128-109", |b| b.iter(|| q.forward(black_box(xs[0]))));
}

fn grid_step(c: &mut Criterion) {
    let mut world = GridWorld::new(GridConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = world.num_actions();
    c.bench_function("gridworld step 30x30 K=10", |b| {
        b.iter(|| {
            let s = world.step(rng.gen_range(0..n), &mut rng).unwrap();
            if s.done {
                world.reset();
            }
            s.reward
        })
    });
}

criterion_group!(benches, rank1_update, admissible, mlp_train_step, grid_step);
criterion_main!(benches);
