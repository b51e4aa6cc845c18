//! Robustness checks and the dynamic test suite they produce.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::ActionSchema;
use crate::engine::{Game, GameInstance, StatementId};
use crate::episode::run_network;
use crate::error::{Error, Result};
use crate::features::FeatureSchema;
use crate::network::{Genome, Network};

/// Plays one episode of `genome` on a fresh instance seeded with `seed`.
pub fn run_genome(
    game: &Game,
    genome: &Genome,
    features: &FeatureSchema,
    actions: &ActionSchema,
    seed: u64,
    cap: u64,
) -> Result<GameInstance> {
    let net = Network::compile(genome)?;
    let weights = genome.weights();
    let mut inst = game.instance(seed);
    run_network(&mut inst, &net, &weights, features, actions, cap)?;
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustnessResult {
    pub passed: bool,
    /// Seeds that were tried, in order. On failure the last one failed.
    pub seeds: Vec<u64>,
}

/// Runs `covers` on `reps` fresh seeds from `rng` and passes only if every
/// run covers the target. Stops at the first failing run.
pub fn robustness_check<R, F>(reps: u32, rng: &mut R, mut covers: F) -> Result<RobustnessResult>
where
    R: Rng,
    F: FnMut(u64) -> Result<bool>,
{
    if reps == 0 {
        return Err(Error::Config("robustness_reps must be at least 1".into()));
    }
    let mut seeds = Vec::with_capacity(reps as usize);
    for _ in 0..reps {
        let seed = rng.gen();
        seeds.push(seed);
        if !covers(seed)? {
            return Ok(RobustnessResult { passed: false, seeds });
        }
    }
    Ok(RobustnessResult { passed: true, seeds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub target: StatementId,
    pub genome: Genome,
    /// Seeds of the robustness runs that all covered `target`.
    pub seeds: Vec<u64>,
    pub generation: u32,
}

/// Genomes that robustly cover their targets, plus what is needed to replay
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicTestSuite {
    pub game_id: String,
    pub d_max: u32,
    pub w_max: u32,
    pub episode_ticks: u64,
    pub entries: Vec<SuiteEntry>,
}

impl DynamicTestSuite {
    pub fn new(game_id: &str, actions: &ActionSchema, episode_ticks: u64) -> Self {
        DynamicTestSuite {
            game_id: game_id.to_string(),
            d_max: actions.d_max,
            w_max: actions.w_max,
            episode_ticks,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn targets(&self) -> impl Iterator<Item = StatementId> + '_ {
        self.entries.iter().map(|e| e.target)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DynamicTestSuite> {
        let text = std::fs::read_to_string(path)?;
        let suite: DynamicTestSuite = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        for e in &suite.entries {
            e.genome.validate()?;
        }
        Ok(suite)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub target: StatementId,
    pub passed: bool,
    /// Seeds on which the target was not covered.
    pub failed_seeds: Vec<u64>,
}

pub fn replay_entry(
    game: &Game,
    suite: &DynamicTestSuite,
    entry: &SuiteEntry,
    features: &FeatureSchema,
) -> Result<ReplayOutcome> {
    let actions = ActionSchema::with_limits(game, suite.d_max, suite.w_max);
    let mut failed_seeds = Vec::new();
    for &seed in &entry.seeds {
        let inst = run_genome(game, &entry.genome, features, &actions, seed, suite.episode_ticks)?;
        if !inst.is_covered(entry.target) {
            failed_seeds.push(seed);
        }
    }
    Ok(ReplayOutcome {
        target: entry.target,
        passed: failed_seeds.is_empty(),
        failed_seeds,
    })
}

/// Re-runs every entry on its recorded seeds.
pub fn replay_suite(game: &Game, suite: &DynamicTestSuite) -> Result<Vec<ReplayOutcome>> {
    if suite.game_id != game.id() {
        return Err(Error::Config(format!(
            "suite was generated for {}, not {}",
            suite.game_id,
            game.id()
        )));
    }
    let features = crate::features::feature_schema(game);
    suite
        .entries
        .iter()
        .map(|e| replay_entry(game, suite, e, &features))
        .collect()
}
