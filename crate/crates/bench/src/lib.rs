//! Shared fixtures for the benchmarks.

use neatrace_core::action::ActionSchema;
use neatrace_core::dataset::{RecorderConfig, TrainingDataset};
use neatrace_core::engine::{BuiltinGame, Game};
use neatrace_core::expert::{expert_for, record_policy};
use neatrace_core::network::{Genome, InnovationTracker};
use neatrace_core::{feature_schema, FeatureSchema, TICKS_PER_SECOND};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub game: Game,
    pub features: FeatureSchema,
    pub actions: ActionSchema,
    pub genome: Genome,
}

pub fn fixture(g: BuiltinGame) -> Fixture {
    let game = Game::new(g.spec()).expect("built-in games are valid");
    let features = feature_schema(&game);
    let actions = ActionSchema::for_game(&game);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut tracker = InnovationTracker::new();
    let mut genome = Genome::minimal(features.len(), &actions, &mut tracker, &mut rng);
    for _ in 0..5 {
        genome.mutate_add_node(&mut tracker, &mut rng);
    }
    Fixture {
        game,
        features,
        actions,
        genome,
    }
}

/// `seconds` of scripted expert play with no-op threshold 10.
pub fn expert_dataset(g: BuiltinGame, seconds: u64) -> TrainingDataset {
    let game = Game::new(g.spec()).expect("built-in games are valid");
    let mut policy = expert_for(g).expect("expert exists");
    record_policy(
        &game,
        policy.as_mut(),
        RecorderConfig::with_delta_t(Some(10)),
        seconds * TICKS_PER_SECOND as u64,
        1,
    )
    .expect("recording succeeds")
}
