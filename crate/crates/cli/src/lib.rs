//! Command-line front end: trace recording over a WebSocket, search, suite
//! replay, dataset statistics and experiment plans.

pub mod bridge;
pub mod protocol;
pub mod server;

use std::fmt;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use log::info;
use neatrace_core::dataset::{RecorderConfig, TrainingDataset};
use neatrace_core::engine::{BuiltinGame, Game, GameSpec};
use neatrace_core::experiments::{run_plan, ExperimentPlan};
use neatrace_core::expert::{expert_for, record_policy};
use neatrace_core::neat::{replay_suite, search, DynamicTestSuite, SearchConfig};
use neatrace_core::Error;
use neatrace_core::TICKS_PER_SECOND;

use crate::bridge::Bridge;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration.
    Usage(String),
    /// The command ran and failed.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Validation { .. } | Error::Parse { .. } => CliError::Usage(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

/// No-op threshold: a tick count or `inf` to disable no-ops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeltaT(pub Option<u32>);

impl FromStr for DeltaT {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "none" => Ok(DeltaT(None)),
            n => n
                .parse::<u32>()
                .ok()
                .filter(|&v| v > 0)
                .map(|v| DeltaT(Some(v)))
                .ok_or_else(|| format!("expected a positive tick count or `inf`, got {s:?}")),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "neatrace", version, about = "Neuroevolution-based game testing seeded by human play traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in games.
    Games,
    /// Serve the play UI over a WebSocket and record its sessions.
    Record {
        /// Built-in game name or path to a JSON game spec.
        #[arg(long)]
        game: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value_t = TICKS_PER_SECOND)]
        fps: u32,
        /// No-op threshold in ticks, or `inf`.
        #[arg(long, default_value = "10")]
        delta_t: DeltaT,
        /// Seed of the first session; later sessions count upwards.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Record a dataset by letting the scripted expert play.
    Expert {
        #[arg(long)]
        game: String,
        #[arg(long)]
        out: PathBuf,
        /// Seconds of play at the game's tick rate.
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        #[arg(long, default_value = "10")]
        delta_t: DeltaT,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Generate a test suite by neuroevolution.
    Search(SearchArgs),
    /// Re-run a saved suite and check every entry still covers its target.
    Replay {
        #[arg(long)]
        suite: PathBuf,
        /// Game spec path, when the suite is not for a built-in game.
        #[arg(long)]
        game: Option<String>,
    },
    /// Summarise recorded datasets.
    Stats {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
    },
    /// Run an experiment plan and write its report.
    Experiment {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub game: String,
    /// Recorded dataset used by the gradient operator.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// JSON search configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for suite.json and stats.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub population: Option<usize>,
    /// Runs per robustness check.
    #[arg(long)]
    pub reps: Option<u32>,
    /// Early-stopping patience in epochs.
    #[arg(long)]
    pub patience: Option<u32>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Probability of the gradient operator per weight mutation.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub generations: Option<u32>,
    #[arg(long)]
    pub wall_clock_secs: Option<f64>,
    #[arg(long)]
    pub episode_ticks: Option<u64>,
    /// Stop as soon as every statement has been executed.
    #[arg(long)]
    pub stop_at_full_coverage: bool,
}

impl SearchArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<SearchConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => SearchConfig::default(),
        };
        if let Some(v) = self.population {
            cfg.population_size = v;
        }
        if let Some(v) = self.reps {
            cfg.robustness_reps = v;
        }
        if let Some(v) = self.patience {
            cfg.loss.patience = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.loss.learning_rate = v;
        }
        if let Some(v) = self.p {
            cfg.p_gradient_descent = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.generations {
            cfg.max_generations = v;
        }
        if let Some(v) = self.wall_clock_secs {
            cfg.max_wall_clock_secs = Some(v);
        }
        if let Some(v) = self.episode_ticks {
            cfg.episode_ticks = v;
        }
        if self.stop_at_full_coverage {
            cfg.stop_at_full_coverage = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Resolves a built-in game name or a path to a JSON game spec.
pub fn load_game(name: &str) -> Result<Game, CliError> {
    if let Ok(g) = name.parse::<BuiltinGame>() {
        return Ok(Game::new(g.spec())?);
    }
    let path = Path::new(name);
    if !path.is_file() {
        return Err(CliError::Usage(format!("{name:?} is neither a built-in game nor a spec file")));
    }
    Ok(Game::new(GameSpec::load(path)?)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failure(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Games => {
            for g in BuiltinGame::ALL {
                let game = Game::new(g.spec())?;
                println!("{:<12} {:>3} statements", g.name(), game.statement_count());
            }
            Ok(())
        }
        Command::Record {
            game,
            out,
            host,
            port,
            fps,
            delta_t,
            seed,
        } => {
            if fps == 0 {
                return Err(CliError::Usage("--fps must be positive".into()));
            }
            let game = load_game(&game)?;
            let bridge = Bridge::new(game, RecorderConfig::with_delta_t(delta_t.0), seed, fps)?;
            let listener = TcpListener::bind((host.as_str(), port))
                .map_err(|e| CliError::Failure(format!("cannot listen on {host}:{port}: {e}")))?;
            println!("listening on ws://{}", listener.local_addr()?);
            let dataset = server::serve_one(&listener, bridge, fps).map_err(|e| CliError::Failure(e.to_string()))?;
            dataset.save(&out)?;
            println!("wrote {}", out.display());
            print!("{}", dataset.stats());
            Ok(())
        }
        Command::Expert {
            game,
            out,
            seconds,
            delta_t,
            seed,
        } => {
            if !(seconds > 0.0 && seconds.is_finite()) {
                return Err(CliError::Usage("--seconds must be positive".into()));
            }
            let builtin = game.parse::<BuiltinGame>()?;
            let game = Game::new(builtin.spec())?;
            let mut policy = expert_for(builtin)?;
            let ticks = (seconds * TICKS_PER_SECOND as f64).round() as u64;
            let dataset = record_policy(&game, policy.as_mut(), RecorderConfig::with_delta_t(delta_t.0), ticks, seed)?;
            dataset.save(&out)?;
            println!("wrote {}", out.display());
            print!("{}", dataset.stats());
            Ok(())
        }
        Command::Search(args) => {
            let cfg = args.resolve()?;
            let game = load_game(&args.game)?;
            let dataset = args.dataset.as_deref().map(TrainingDataset::load).transpose()?;
            info!("searching {} with {:?}", game.id(), cfg);
            let result = search(&game, dataset.as_ref(), &cfg)?;
            fs::create_dir_all(&args.out)?;
            result.suite.save(&args.out.join("suite.json"))?;
            write_json(&args.out.join("stats.json"), &result.stats)?;
            let s = &result.stats;
            println!(
                "{}: coverage {:.1}% ({}/{}), {} suite entries, {} generations, {} gradient steps, {} winning runs{}",
                s.game_id,
                s.coverage_pct(),
                s.covered.len(),
                s.statement_count,
                result.suite.len(),
                s.generations,
                s.sgd_invocations,
                s.winning_hits,
                if s.timed_out { ", budget exhausted" } else { "" }
            );
            Ok(())
        }
        Command::Replay { suite, game } => {
            let suite = DynamicTestSuite::load(&suite)?;
            let game = load_game(game.as_deref().unwrap_or(&suite.game_id))?;
            let outcomes = replay_suite(&game, &suite)?;
            let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).collect();
            for o in &outcomes {
                if o.passed {
                    println!("ok   {}", o.target);
                } else {
                    println!("FAIL {} on seeds {:?}", o.target, o.failed_seeds);
                }
            }
            println!("{}/{} entries pass", outcomes.len() - failed.len(), outcomes.len());
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Failure(format!("{} suite entries failed", failed.len())))
            }
        }
        Command::Stats { datasets } => {
            for path in datasets {
                let ds = TrainingDataset::load(&path)?;
                println!("{}", path.display());
                print!("{}", ds.stats());
            }
            Ok(())
        }
        Command::Experiment { plan, out } => {
            let plan = ExperimentPlan::load(&plan)?;
            let report = run_plan(&plan)?;
            report.write_to_dir(&out)?;
            print!("{report}");
            let failed = report.cells.iter().filter(|c| c.failed.is_some()).count();
            if failed > 0 {
                return Err(CliError::Failure(format!("{failed} experiment cells failed")));
            }
            Ok(())
        }
    }
}
