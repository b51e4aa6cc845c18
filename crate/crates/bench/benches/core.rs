use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use neatrace_bench::{expert_dataset, fixture};
use neatrace_core::engine::{BuiltinGame, InputEvent};
use neatrace_core::episode::run_network;
use neatrace_core::gradient::{train, LossConfig};
use neatrace_core::neat::{search, SearchConfig};
use neatrace_core::network::activate;
use neatrace_core::extract;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn engine(c: &mut Criterion) {
    let f = fixture(BuiltinGame::PaddleBall);
    c.bench_function("engine_step_paddleball", |b| {
        b.iter_batched(
            || f.game.instance(3),
            |mut inst| {
                for i in 0..100 {
                    let x = (i % 40) as f64 * 10.0 - 200.0;
                    if inst.is_game_over() {
                        break;
                    }
                    inst.step(&[InputEvent::MouseMove { x, y: -150.0 }]).unwrap();
                }
                inst
            },
            BatchSize::SmallInput,
        )
    });
}

fn network(c: &mut Criterion) {
    let f = fixture(BuiltinGame::FruitCatch);
    let inst = f.game.instance(1);
    let x = extract(inst.state(), &f.features);
    c.bench_function("activate_fruitcatch", |b| b.iter(|| activate(black_box(&f.genome), black_box(&x)).unwrap()));
}

fn training(c: &mut Criterion) {
    let f = fixture(BuiltinGame::FruitCatch);
    let ds = expert_dataset(BuiltinGame::FruitCatch, 30);
    let snaps: Vec<_> = ds.sessions.iter().flat_map(|s| s.snapshots.iter().cloned()).collect();
    let cfg = LossConfig {
        max_epochs: 20,
        ..LossConfig::default()
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("sgd_20_epochs_fruitcatch", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            train(&f.genome, &snaps, &f.actions, &cfg, &mut rng).unwrap()
        })
    });
    group.finish();
}

fn episodes(c: &mut Criterion) {
    let f = fixture(BuiltinGame::FruitCatch);
    let net = neatrace_core::network::Network::compile(&f.genome).unwrap();
    let weights = f.genome.weights();
    c.bench_function("episode_600_ticks_fruitcatch", |b| {
        b.iter_batched(
            || f.game.instance(5),
            |mut inst| run_network(&mut inst, &net, &weights, &f.features, &f.actions, 600).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn search_generations(c: &mut Criterion) {
    let f = fixture(BuiltinGame::PaddleBall);
    let cfg = SearchConfig {
        population_size: 50,
        robustness_reps: 3,
        max_generations: 3,
        ..SearchConfig::default()
    };
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    group.bench_function("three_generations_paddleball", |b| b.iter(|| search(&f.game, None, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, engine, network, training, episodes, search_generations);
criterion_main!(benches);
