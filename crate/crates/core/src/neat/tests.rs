use super::*;
use crate::action::ActionSchema;
use crate::dataset::{RecorderConfig, TrainingDataset};
use crate::engine::builder::dsl::*;
use crate::engine::builder::{sprite, GameBuilder};
use crate::engine::{BuiltinGame, Game, Key, Trigger};
use crate::features::feature_schema;
use crate::network::InnovationTracker;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn paddle() -> Game {
    Game::new(BuiltinGame::PaddleBall.spec()).unwrap()
}

fn genome_pair(seed: u64) -> (Genome, Genome, InnovationTracker) {
    let game = paddle();
    let actions = ActionSchema::for_game(&game);
    let n = feature_schema(&game).len();
    let mut t = InnovationTracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Genome::minimal(n, &actions, &mut t, &mut rng);
    let b = Genome::minimal(n, &actions, &mut t, &mut rng);
    (a, b, t)
}

/// Start flips a coin; the per-tick script covers `heads` only on heads.
/// `always` is covered on the first tick of every run.
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

#[test]
fn default_config_is_valid() {
    let c = SearchConfig::default();
    c.validate().unwrap();
    assert_eq!(c.population_size, 100);
    assert_eq!(c.robustness_reps, 10);
    assert_eq!(c.c_weight, 0.0);
    assert_eq!(c.episode_ticks, 600);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        SearchConfig {
            p_gradient_descent: 1.5,
            ..Default::default()
        },
        SearchConfig {
            crossover_rate: -0.1,
            ..Default::default()
        },
        SearchConfig {
            population_size: 1,
            ..Default::default()
        },
        SearchConfig {
            max_generations: 0,
            ..Default::default()
        },
        SearchConfig {
            robustness_reps: 0,
            ..Default::default()
        },
        SearchConfig {
            max_wall_clock_secs: Some(0.0),
            ..Default::default()
        },
    ];
    for c in bad {
        assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
    }
}

#[test]
fn config_json_fills_defaults() {
    let c: SearchConfig = serde_json::from_str(r#"{"population_size": 20, "p_gradient_descent": 0.3}"#).unwrap();
    assert_eq!(c.population_size, 20);
    assert_eq!(c.p_gradient_descent, 0.3);
    assert_eq!(c.robustness_reps, 10);
}

#[test]
fn compatibility_ignores_weights_by_default() {
    let (a, _, _) = genome_pair(1);
    let cfg = SearchConfig::default();
    assert_eq!(compatibility(&a, &a, &cfg), 0.0);
    let mut scaled = a.clone();
    scaled.scale_weights(10.0);
    assert_eq!(compatibility(&a, &scaled, &cfg), 0.0);
    let weighted = SearchConfig {
        c_weight: 0.5,
        ..Default::default()
    };
    assert!(compatibility(&a, &scaled, &weighted) > 0.0);
}

#[test]
fn one_excess_gene() {
    let (a, _, mut t) = genome_pair(2);
    let mut b = a.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(b.mutate_add_node(&mut t, &mut rng));
    let cfg = SearchConfig::default();
    // One disabled gene still matches; the two new genes are excess.
    let n = b.connections.len() as f64;
    assert_eq!(compatibility(&a, &b, &cfg), 2.0 / n);
    assert_eq!(compatibility(&b, &a, &cfg), 2.0 / n);
}

#[test]
fn small_genomes_are_not_normalised() {
    let mut a = genome_pair(3).0;
    a.connections.truncate(5);
    let mut b = a.clone();
    b.connections.truncate(3);
    assert_eq!(compatibility(&a, &b, &SearchConfig::default()), 2.0);
}

#[test]
fn crossover_keeps_fitter_structure() {
    let (a, b, mut t) = genome_pair(4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut fitter = a.clone();
    fitter.mutate_add_node(&mut t, &mut rng);
    let child = crossover(&fitter, &b, &mut rng);
    let innov = |g: &Genome| g.connections.iter().map(|c| c.innovation).collect::<Vec<_>>();
    assert_eq!(innov(&child), innov(&fitter));
    assert_eq!(child.nodes, fitter.nodes);
    let mut from_other = 0;
    for (i, c) in child.connections.iter().enumerate() {
        let f = &fitter.connections[i];
        match b.connections.iter().find(|g| g.innovation == c.innovation) {
            Some(o) if c.weight == o.weight && c.weight != f.weight => from_other += 1,
            Some(o) => assert!(c.weight == f.weight || c.weight == o.weight),
            None => assert_eq!(c.weight, f.weight),
        }
    }
    assert!(from_other > 0);
    child.validate().unwrap();
}

#[test]
fn allocation_sums_to_total() {
    assert_eq!(allocate(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
    assert_eq!(allocate(&[3.0, 1.0], 8), vec![6, 2]);
    assert_eq!(allocate(&[0.0, 0.0], 3), vec![2, 1]);
    assert!(allocate(&[], 3).is_empty());
}

#[test]
fn speciation_groups_identical_structures() {
    let (a, b, mut t) = genome_pair(5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut c = a.clone();
    for _ in 0..10 {
        c.mutate_add_node(&mut t, &mut rng);
    }
    let mut pop = vec![a, b, c];
    let mut species = Vec::new();
    let mut next = 0;
    let cfg = SearchConfig {
        compatibility_threshold: 0.1,
        ..Default::default()
    };
    speciate(&mut species, &mut pop, &mut next, &cfg);
    assert_eq!(species.len(), 2);
    assert_eq!(species[0].members, vec![0, 1]);
    assert_eq!(pop[2].species, Some(1));
}

#[test]
fn target_selection_is_breadth_first() {
    let game = paddle();
    let cdg = game.cdg();
    let covered = game.instance(0).covered();
    let t = select_target(cdg, &covered).unwrap();
    assert!(!covered.contains(t));
    let parent = cdg.parent(t).unwrap();
    assert!(covered.contains(parent));
    // No shallower uncovered child exists.
    let depth = |s: StatementId| cdg.ancestry(s).len();
    for (id, _) in cdg.nodes() {
        if !covered.contains(id) && cdg.parent(id).is_some_and(|p| covered.contains(p)) {
            assert!(depth(id) >= depth(t));
        }
    }
    let all: CoverageSet = cdg.nodes().map(|(id, _)| id).collect();
    assert_eq!(select_target(cdg, &all), None);
}

#[test]
fn excluded_targets_are_skipped() {
    let game = paddle();
    let covered = game.instance(0).covered();
    let first = select_target(game.cdg(), &covered).unwrap();
    let excluded = BTreeSet::from([first]);
    let second = select_target_excluding(game.cdg(), &covered, &excluded).unwrap();
    assert_ne!(first, second);
}

#[test]
fn robustness_requires_every_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ok = robustness_check(10, &mut rng, |_| Ok(true)).unwrap();
    assert!(ok.passed);
    assert_eq!(ok.seeds.len(), 10);
    let mut calls = 0;
    let bad = robustness_check(10, &mut rng, |_| {
        calls += 1;
        Ok(calls < 4)
    })
    .unwrap();
    assert!(!bad.passed);
    assert_eq!(bad.seeds.len(), 4);
    assert!(robustness_check(0, &mut rng, |_| Ok(true)).is_err());
}

#[test]
fn coin_flip_target_is_not_robust() {
    let (game, heads, always) = coin_game();
    let actions = ActionSchema::for_game(&game);
    let features = feature_schema(&game);
    let mut t = InnovationTracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = Genome::minimal(features.len(), &actions, &mut t, &mut rng);
    let covers = |target: StatementId, seed: u64| -> Result<bool> {
        Ok(run_genome(&game, &g, &features, &actions, seed, 5)?.is_covered(target))
    };
    let passed = (0..50)
        .filter(|_| robustness_check(10, &mut rng, |s| covers(heads, s)).unwrap().passed)
        .count();
    assert!(passed <= 1);
    assert!(robustness_check(10, &mut rng, |s| covers(always, s)).unwrap().passed);
}

fn small(seed: u64) -> SearchConfig {
    SearchConfig {
        population_size: 12,
        max_generations: 6,
        robustness_reps: 3,
        episode_ticks: 200,
        seed,
        ..Default::default()
    }
}

#[test]
fn search_is_deterministic() {
    let game = paddle();
    let a = search(&game, None, &small(7)).unwrap();
    let b = search(&game, None, &small(7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.stats.generations as usize, a.stats.timeline.len());
    assert!(a.stats.timeline.windows(2).all(|w| w[0].covered <= w[1].covered && w[0].ticks < w[1].ticks));
    assert!(!a.suite.is_empty());
}

#[test]
fn empty_dataset_forces_plain_neuroevolution() {
    let game = paddle();
    let fp = feature_schema(&game).fingerprint();
    let empty = TrainingDataset::new(game.id(), RecorderConfig::default(), &fp);
    let base = search(&game, None, &small(3)).unwrap();
    let cfg = SearchConfig {
        p_gradient_descent: 1.0,
        ..small(3)
    };
    let forced = search(&game, Some(&empty), &cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&base.stats).unwrap(),
        serde_json::to_string(&forced.stats).unwrap()
    );
    assert_eq!(base.suite, forced.suite);
    assert_eq!(forced.stats.sgd_invocations, 0);
}

#[test]
fn mismatched_dataset_is_rejected() {
    let game = paddle();
    let ds = TrainingDataset::new("FruitCatch", RecorderConfig::default(), "x");
    assert!(matches!(search(&game, Some(&ds), &small(0)), Err(Error::Config(_))));
}

#[test]
fn suite_entries_replay() {
    let game = paddle();
    let res = search(&game, None, &small(11)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("suite.json");
    res.suite.save(&path).unwrap();
    let loaded = DynamicTestSuite::load(&path).unwrap();
    assert_eq!(loaded, res.suite);
    for o in replay_suite(&game, &loaded).unwrap() {
        assert!(o.passed, "{o:?}");
    }
}

#[test]
fn random_tester_is_deterministic() {
    let game = Game::new(BuiltinGame::FlapBird.spec()).unwrap();
    let cfg = RandomTesterConfig {
        episodes_per_generation: 10,
        generations: 5,
        episode_ticks: 300,
        seed: 4,
        stop_at_full_coverage: false,
    };
    let a = random_tester(&game, &cfg).unwrap();
    assert_eq!(a, random_tester(&game, &cfg).unwrap());
    assert_eq!(a.timeline.len(), 5);
    assert!(a.covered.len() > game.cdg().entry_statements().len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn compatibility_is_symmetric_and_non_negative(seed in any::<u64>(), muts in 0usize..6) {
        let (mut a, mut b, mut t) = genome_pair(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..muts {
            a.mutate_add_node(&mut t, &mut rng);
            b.mutate_add_connection(&mut t, &mut rng, 20);
        }
        let cfg = SearchConfig { c_weight: 0.4, ..Default::default() };
        let d = compatibility(&a, &b, &cfg);
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, compatibility(&b, &a, &cfg));
        prop_assert_eq!(compatibility(&a, &a, &cfg), 0.0);
    }

    #[test]
    fn crossover_children_stay_valid(seed in any::<u64>(), muts in 0usize..6) {
        let (mut a, mut b, mut t) = genome_pair(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..muts {
            a.mutate_add_node(&mut t, &mut rng);
            a.mutate_add_connection(&mut t, &mut rng, 20);
            b.mutate_add_node(&mut t, &mut rng);
        }
        let child = crossover(&a, &b, &mut rng);
        prop_assert!(child.validate().is_ok());
        prop_assert!(crate::network::Network::compile(&child).is_ok());
    }

    #[test]
    fn allocation_is_exact(shares in prop::collection::vec(0.0f64..10.0, 1..8), total in 0usize..200) {
        let out = allocate(&shares, total);
        prop_assert_eq!(out.iter().sum::<usize>(), total);
    }
}
