use neatrace_core::dataset::{RecorderConfig, TrainingDataset};
use neatrace_core::engine::{BuiltinGame, Game};
use neatrace_core::expert::{expert_for, record_policy};
use neatrace_core::neat::{replay_suite, search, DynamicTestSuite, SearchConfig};
use neatrace_core::TICKS_PER_SECOND;

#[test]
fn record_search_save_replay() {
    let dir = tempfile::tempdir().unwrap();
    let g = BuiltinGame::FruitCatch;
    let game = Game::new(g.spec()).unwrap();
    let mut policy = expert_for(g).unwrap();
    let dataset = record_policy(
        &game,
        policy.as_mut(),
        RecorderConfig::with_delta_t(Some(10)),
        30 * TICKS_PER_SECOND as u64,
        1,
    )
    .unwrap();
    let data_path = dir.path().join("fruit.jsonl");
    dataset.save(&data_path).unwrap();
    let loaded = TrainingDataset::load(&data_path).unwrap();
    assert_eq!(loaded, dataset);

    let config = SearchConfig {
        population_size: 30,
        robustness_reps: 3,
        max_generations: 10,
        p_gradient_descent: 1.0,
        seed: 5,
        ..SearchConfig::default()
    };
    let result = search(&game, Some(&loaded), &config).unwrap();
    assert!(result.stats.sgd_invocations > 0);
    assert!(!result.suite.is_empty());
    assert!(result.stats.robust.len() <= result.stats.covered.len());

    let suite_path = dir.path().join("suite.json");
    result.suite.save(&suite_path).unwrap();
    let suite = DynamicTestSuite::load(&suite_path).unwrap();
    assert_eq!(suite, result.suite);
    let outcomes = replay_suite(&game, &suite).unwrap();
    assert_eq!(outcomes.len(), suite.len());
    assert!(outcomes.iter().all(|o| o.passed), "{outcomes:?}");
}

#[test]
fn suite_for_another_game_is_rejected() {
    let paddle = Game::new(BuiltinGame::PaddleBall.spec()).unwrap();
    let fruit = Game::new(BuiltinGame::FruitCatch.spec()).unwrap();
    let config = SearchConfig {
        population_size: 10,
        robustness_reps: 2,
        max_generations: 2,
        ..SearchConfig::default()
    };
    let result = search(&paddle, None, &config).unwrap();
    assert!(replay_suite(&fruit, &result.suite).is_err());
}
