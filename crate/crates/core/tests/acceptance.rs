//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use neatrace_core::action::{ActionKind, ActionLabel, ActionSchema};
use neatrace_core::dataset::{RecorderConfig, Snapshot, TrainingDataset};
use neatrace_core::engine::builder::dsl::*;
use neatrace_core::engine::builder::{sprite, GameBuilder};
use neatrace_core::experiments::{mann_whitney_exact, mann_whitney_normal, run_plan, ExperimentPlan, ExperimentReport};
use neatrace_core::expert::{expert_for, record_policy, RandomPolicy};
use neatrace_core::gradient::{backward, fit, loss, mean_loss, sgd_step, train, LossConfig};
use neatrace_core::neat::{compatibility, robustness_check, run_genome, search, SearchConfig};
use neatrace_core::network::{activate, ConnectionGene, Genome, InnovationTracker, NodeGene, NodeKind};
use neatrace_core::recorder::rederive;
use neatrace_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed <= limit
}

fn random_genome(rng: &mut ChaCha8Rng) -> (Genome, ActionSchema, usize) {
    let g = BuiltinGame::ALL[rng.gen_range(0..BuiltinGame::ALL.len())];
    let game = Game::new(g.spec()).unwrap();
    let actions = ActionSchema::for_game(&game);
    let inputs = feature_schema(&game).len();
    let mut t = InnovationTracker::new();
    let mut genome = Genome::minimal(inputs, &actions, &mut t, rng);
    for _ in 0..rng.gen_range(0..6) {
        genome.mutate_add_node(&mut t, rng);
    }
    for _ in 0..rng.gen_range(0..6) {
        genome.mutate_add_connection(&mut t, rng, 20);
    }
    let w: Vec<f64> = (0..genome.connections.len()).map(|_| rng.gen_range(-2.0..=2.0)).collect();
    genome.set_weights(&w);
    (genome, actions, inputs)
}

fn random_label(actions: &ActionSchema, rng: &mut ChaCha8Rng) -> ActionLabel {
    let kind = actions.actions[rng.gen_range(0..actions.len())];
    let params: Vec<f64> = (0..kind.param_count()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    actions.denormalize(kind, &params)
}

fn gradient_oracle() -> Outcome {
    const EPS: f64 = 1e-5;
    // Relative error is taken against max(|analytic|, |numeric|, FLOOR) so
    // that vanishing gradients are compared absolutely.
    const FLOOR: f64 = 1e-7;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..100 {
        let (genome, actions, inputs) = random_genome(&mut rng);
        let x = FeatureVector((0..inputs).map(|_| rng.gen_range(-1.0..=1.0)).collect());
        let label = random_label(&actions, &mut rng);
        let tape = backward(&genome, &x, &label, &actions).unwrap();
        let at = |w: &[f64]| {
            let mut g = genome.clone();
            g.set_weights(w);
            loss(&activate(&g, &x).unwrap(), &label, &actions).unwrap()
        };
        let w0 = genome.weights();
        for (i, g) in tape.grads.iter().enumerate() {
            let Some(g) = *g else { continue };
            let mut plus = w0.clone();
            plus[i] += EPS;
            let mut minus = w0.clone();
            minus[i] -= EPS;
            let numeric = (at(&plus) - at(&minus)) / (2.0 * EPS);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-4 && within(Duration::from_secs(30), t),
        format!("max relative error {worst:.2e} over {checked} weights of 100 genomes in {:.1}s", t.as_secs_f64()),
    )
}

fn update_rule() -> Outcome {
    let actions = ActionSchema::new(vec![ActionKind::NoOp], 30, 60);
    let mut ok = true;
    let mut details = Vec::new();
    for (x, w, duration, alpha) in [(0.5, 0.8, 31, 0.1), (-1.0, 0.3, 1, 0.5), (0.25, -1.5, 60, 0.01)] {
        let mut genome = Genome {
            nodes: vec![
                NodeGene {
                    id: 0,
                    kind: NodeKind::Input(0),
                },
                NodeGene { id: 1, kind: NodeKind::Bias },
                NodeGene {
                    id: 2,
                    kind: NodeKind::ClassOutput(ActionKind::NoOp),
                },
                NodeGene {
                    id: 3,
                    kind: NodeKind::RegOutput {
                        action: ActionKind::NoOp,
                        param: 0,
                    },
                },
            ],
            connections: vec![ConnectionGene {
                from: 0,
                to: 3,
                weight: w,
                enabled: true,
                innovation: 0,
            }],
            fitness: None,
            species: None,
        };
        let label = ActionLabel::NoOp { duration };
        let tape = backward(&genome, &FeatureVector(vec![x]), &label, &actions).unwrap();
        // Single class: cross-entropy is 0. Regression: (tanh(wx) - y)^2.
        let y = 2.0 * (duration as f64 - 1.0) / 59.0 - 1.0;
        let a = (w * x).tanh();
        let grad = 2.0 * (a - y) * (1.0 - a * a) * x;
        let expected = w - alpha * grad;
        sgd_step(&mut genome, &tape, alpha);
        let got = genome.connections[0].weight;
        let exact = got == w - alpha * tape.grads[0].unwrap();
        let close = (got - expected).abs() <= 1e-12;
        ok &= exact && close;
        details.push(format!("{w} -> {got:.6} (hand {expected:.6})"));
    }
    outcome(ok, format!("1-connection fixtures: {}", details.join(", ")))
}

fn early_stopping() -> Outcome {
    // Improves for 5 epochs, then plateaus for 40.
    let curve = |e: f64| if e <= 5.0 { 1.0 - 0.1 * e } else { 0.5 };
    let res = fit(
        vec![0.0],
        30,
        45,
        |w, _| {
            w[0] += 1.0;
            Ok(())
        },
        |w| Ok(curve(w[0])),
    )
    .unwrap();
    let crafted = res.epochs_run == 35 && res.best_epoch == 5 && res.weights == vec![5.0];

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let game = Game::new(BuiltinGame::FruitCatch.spec()).unwrap();
    let actions = ActionSchema::for_game(&game);
    let inputs = feature_schema(&game).len();
    let mut restored = 0;
    for _ in 0..20 {
        let mut t = InnovationTracker::new();
        let genome = Genome::minimal(inputs, &actions, &mut t, &mut rng);
        let n = rng.gen_range(5..20);
        let snaps: Vec<Snapshot> = (0..n)
            .map(|i| Snapshot {
                tick: i,
                emitted: i,
                features: FeatureVector((0..inputs).map(|_| rng.gen_range(-1.0..=1.0)).collect()),
                label: random_label(&actions, &mut rng),
            })
            .collect();
        let cfg = LossConfig {
            learning_rate: rng.gen_range(0.05..1.5),
            patience: rng.gen_range(3..15),
            max_epochs: 60,
            ..Default::default()
        };
        let (trained, report) = train(&genome, &snaps, &actions, &cfg, &mut rng).unwrap();
        let min = report.losses.iter().copied().fold(f64::INFINITY, f64::min);
        let monitored = mean_loss(&trained, &snaps, &actions).unwrap();
        if report.losses[report.best_epoch as usize] == min && (monitored - min).abs() <= 1e-9 * min.max(1.0) {
            restored += 1;
        }
    }
    outcome(
        crafted && restored == 20,
        format!(
            "crafted curve stopped at epoch {} with epoch-{} weights {:?}; {restored}/20 random runs restored the monitored minimum",
            res.epochs_run, res.best_epoch, res.weights
        ),
    )
}

fn recorder_semantics() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut rows = Vec::new();
    let mut logs: Vec<(Game, TrainingDataset)> = Vec::new();
    for g in [BuiltinGame::PaddleBall, BuiltinGame::FruitCatch] {
        let game = Game::new(g.spec()).unwrap();
        let mut expert = expert_for(g).unwrap();
        let ds = record_policy(&game, expert.as_mut(), RecorderConfig::default(), 1800, 1).unwrap();
        logs.push((game, ds));
    }
    for (i, g) in [BuiltinGame::FlapBird, BuiltinGame::SnakeGrid, BuiltinGame::DotChase].into_iter().enumerate() {
        let game = Game::new(g.spec()).unwrap();
        let mut p = RandomPolicy::new(&game, i as u64);
        let ds = record_policy(&game, &mut p, RecorderConfig::default(), 900, 1).unwrap();
        logs.push((game, ds));
    }
    for (game, ds) in &logs {
        let counts: Vec<(usize, f64)> = [Some(10), Some(100), None]
            .into_iter()
            .map(|d| {
                let s = rederive(game, ds, RecorderConfig::with_delta_t(d)).unwrap().stats();
                (s.noops, s.noop_proportion)
            })
            .collect();
        ok &= counts[0].0 >= counts[1].0 && counts[1].0 >= counts[2].0;
        ok &= counts[2].1 == 0.0;
        rows.push(format!(
            "{} {}/{}/{} ({:.2})",
            game.id(),
            counts[0].0,
            counts[1].0,
            counts[2].0,
            counts[2].1
        ));
    }
    let t = start.elapsed();
    ok &= within(Duration::from_secs(5), t);
    outcome(
        ok,
        format!("no-ops at delta_t 10/100/inf: {} in {:.1}s", rows.join(", "), t.as_secs_f64()),
    )
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let game = Game::new(BuiltinGame::PaddleBall.spec()).unwrap();
    let cfg = SearchConfig {
        seed: 42,
        ..Default::default()
    };
    let digest = || {
        let res = search(&game, None, &cfg).unwrap();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&res.suite).unwrap());
        h.update(serde_json::to_vec(&res.stats).unwrap());
        let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        (hex, res.stats.generations)
    };
    let (a, gens) = digest();
    let (b, _) = digest();
    let t = start.elapsed();
    outcome(
        a == b && within(Duration::from_secs(300), t),
        format!("two PaddleBall searches ({gens} generations) hash to {} / {} in {:.1}s", &a[..16], &b[..16], t.as_secs_f64()),
    )
}

/// Start flips a coin; `heads` is covered only on heads. `always` is
/// covered on the first tick of every run.
fn coin_game() -> (Game, StatementId, StatementId) {
    let mut g = GameBuilder::new("coin");
    g.sprite(sprite("S", 0.0, 0.0, 10.0, 10.0));
    g.global("coin", 0.0, 0.0, 1.0);
    g.global("seen", 0.0, 0.0, 10.0);
    g.script(Trigger::Start, |b| {
        b.set(global("coin"), random_int(0, 1));
    });
    let (mut heads, mut always) = (None, None);
    g.script(Trigger::EveryTick, |b| {
        b.if_(eq(get(global("coin")), num(1.0)), |t| {
            heads = Some(t.set(global("seen"), num(1.0)));
        });
        b.if_(gt(x_of("S"), num(-1000.0)), |t| {
            always = Some(t.set(global("seen"), num(2.0)));
        });
    });
    g.script(Trigger::KeyDown(Key::Space), |b| {
        b.change_x("S", num(1.0));
    });
    (Game::new(g.build()).unwrap(), heads.unwrap(), always.unwrap())
}

fn robustness() -> Outcome {
    let (game, heads, always) = coin_game();
    let actions = ActionSchema::for_game(&game);
    let features = feature_schema(&game);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let genome = Genome::minimal(features.len(), &actions, &mut InnovationTracker::new(), &mut rng);
    let covers = |target: StatementId, seed: u64| Ok(run_genome(&game, &genome, &features, &actions, seed, 3)?.is_covered(target));

    let single: usize = (0..1000).filter(|&s| covers(heads, s).unwrap()).count();
    let failed = (0..1000)
        .filter(|_| !robustness_check(10, &mut rng, |s| covers(heads, s)).unwrap().passed)
        .count();
    let passed = (0..1000)
        .filter(|_| robustness_check(10, &mut rng, |s| covers(always, s)).unwrap().passed)
        .count();
    outcome(
        failed >= 990 && passed == 1000,
        format!(
            "coin-flip genome covers its target in {single}/1000 single runs and fails the 10-run check in {failed}/1000 trials; deterministic coverer passes {passed}/1000"
        ),
    )
}

fn speciation_without_weights() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut all_zero = true;
    for _ in 0..20 {
        let (g, _, _) = random_genome(&mut rng);
        let mut scaled = g.clone();
        scaled.scale_weights(10.0);
        all_zero &= compatibility(&g, &scaled, &SearchConfig::default()) == 0.0;
    }
    outcome(all_zero, "compatibility(g, 10 * weights) == 0 for 20 random genomes")
}

fn plan(json: &str) -> ExperimentPlan {
    let p: ExperimentPlan = serde_json::from_str(json).unwrap();
    p.validate().unwrap();
    p
}

fn medians(report: &ExperimentReport, game: &str, a: &str, b: &str) -> (f64, f64, f64) {
    let ca = report.cell(game, a).unwrap();
    let cb = report.cell(game, b).unwrap();
    let p = cb.significance.as_ref().map_or(1.0, |s| s.test.p);
    (ca.median_metric.unwrap(), cb.median_metric.unwrap(), p)
}

fn gradient_speedup() -> Outcome {
    let start = Instant::now();
    let report = run_plan(&plan(
        r#"{"games": ["PaddleBall", "FruitCatch"], "repetitions": 10, "baseline": "p0",
            "metric": {"kind": "generations_to_full"},
            "configs": [
              {"label": "p0", "search": {"p_gradient_descent": 0.0, "max_generations": 200, "stop_at_full_coverage": true},
               "dataset": {"kind": "expert", "seconds": 60}},
              {"label": "p1", "search": {"p_gradient_descent": 1.0, "max_generations": 200, "stop_at_full_coverage": true},
               "dataset": {"kind": "expert", "seconds": 60}}]}"#,
    ))
    .unwrap();
    let t = start.elapsed();
    let mut ok = within(Duration::from_secs(3600), t);
    let mut rows = Vec::new();
    for game in ["PaddleBall", "FruitCatch"] {
        let (m0, m1, p) = medians(&report, game, "p0", "p1");
        ok &= m1 < m0 && p < 0.1;
        rows.push(format!("{game} median gens p=0 {m0} vs p=1 {m1} (MWU p={p:.4})"));
    }
    outcome(ok, format!("{} in {:.1}s", rows.join("; "), t.as_secs_f64()))
}

fn noop_threshold() -> Outcome {
    let start = Instant::now();
    let report = run_plan(&plan(
        r#"{"games": ["PaddleBall"], "repetitions": 10, "baseline": "inf",
            "metric": {"kind": "time_to_coverage", "level": 100.0},
            "configs": [
              {"label": "inf", "search": {"p_gradient_descent": 1.0, "max_generations": 200, "stop_at_full_coverage": true},
               "dataset": {"kind": "expert", "seconds": 60}},
              {"label": "dt10", "search": {"p_gradient_descent": 1.0, "max_generations": 200, "stop_at_full_coverage": true},
               "dataset": {"kind": "expert", "seconds": 60, "delta_t": 10}}]}"#,
    ))
    .unwrap();
    let (inf, dt10, p) = medians(&report, "PaddleBall", "inf", "dt10");
    let hits = |label: &str| -> u64 {
        report
            .cell("PaddleBall", label)
            .unwrap()
            .runs
            .iter()
            .map(|r| r.winning_hits)
            .sum()
    };
    outcome(
        dt10 >= inf,
        format!(
            "median ticks to full coverage: delta_t=10 {dt10} vs inf {inf} (MWU p={p:.4}); winning runs {} vs {} in {:.1}s",
            hits("dt10"),
            hits("inf"),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn mann_whitney_oracle() -> Outcome {
    // Every split of ranks 1..=12 into two samples of six.
    let mut worst: f64 = 0.0;
    let mut splits = 0;
    for mask in 0u32..(1 << 12) {
        if mask.count_ones() != 6 {
            continue;
        }
        let (a, b): (Vec<f64>, Vec<f64>) = {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for i in 0..12 {
                if mask & (1 << i) != 0 {
                    a.push(i as f64 + 1.0);
                } else {
                    b.push(i as f64 + 1.0);
                }
            }
            (a, b)
        };
        let e = mann_whitney_exact(&a, &b).unwrap();
        let n = mann_whitney_normal(&a, &b).unwrap();
        worst = worst.max((e.p - n.p).abs());
        splits += 1;
    }
    // Smaller sizes: the exact path stays a valid two-sided p.
    let mut valid = true;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0..8) as f64).collect();
        let e = mann_whitney_exact(&a, &b).unwrap();
        valid &= e.p > 0.0 && e.p <= 1.0 && (e.u + e.u_other - (n * m) as f64).abs() < 1e-9;
    }
    outcome(
        worst <= 0.02 && valid,
        format!("max |exact - normal| = {worst:.4} over {splits} splits at n = m = 6"),
    )
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("gradient oracle", gradient_oracle),
        ("update rule", update_rule),
        ("early stopping", early_stopping),
        ("recorder semantics", recorder_semantics),
        ("determinism", determinism),
        ("robustness check", robustness),
        ("speciation without weight term", speciation_without_weights),
        ("gradient descent speeds up coverage", gradient_speedup),
        ("no-op snapshots do not speed up coverage", noop_threshold),
        ("Mann-Whitney exact vs normal", mann_whitney_oracle),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, check) in checks {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let o = check();
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.passed as u32;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
