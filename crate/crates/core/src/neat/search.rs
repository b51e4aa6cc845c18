//! The coverage-driven search loop and the random baseline.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::suite::{robustness_check, run_genome, DynamicTestSuite, SuiteEntry};
use super::{allocate, crossover, pick_two, ranked, select_target_excluding, speciate, SearchConfig, Species};
use crate::action::{ActionLabel, ActionSchema};
use crate::dataset::{filter_sessions, Snapshot, TrainingDataset};
use crate::engine::{ControlDependenceGraph, CoverageSet, Game, GameInstance, StatementId};
use crate::episode::run_with;
use crate::error::{Error, Result};
use crate::features::{feature_schema, FeatureSchema};
use crate::gradient::{hybrid_weight_change, WeightChange};
use crate::network::{Genome, InnovationTracker};

/// How many covering genomes get a robustness check per target and
/// generation.
const MAX_CANDIDATES: usize = 3;
const CONNECTION_ATTEMPTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub generation: u32,
    /// Cumulative game ticks played, robustness runs included.
    pub ticks: u64,
    /// Statements executed by any run so far.
    pub covered: usize,
    /// Statements covered by accepted suite entries.
    pub robust: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetOutcome {
    Covered,
    Skipped,
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target: StatementId,
    pub generations: u32,
    pub outcome: TargetOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub game_id: String,
    pub statement_count: usize,
    /// Statements covered by loading the game.
    pub entry_count: usize,
    pub generations: u32,
    pub timeline: Vec<TimelinePoint>,
    pub targets: Vec<TargetRecord>,
    pub sgd_invocations: u64,
    pub perturbations: u64,
    pub fallbacks: u64,
    /// Executions that reached a winning statement.
    pub winning_hits: u64,
    pub first_win_generation: Option<u32>,
    /// Generations evaluated until every statement had been executed.
    pub full_coverage_generation: Option<u32>,
    /// The budget ran out with targets left.
    pub timed_out: bool,
    pub covered: CoverageSet,
    pub robust: CoverageSet,
}

impl SearchStats {
    fn new(game: &Game, entry: &CoverageSet) -> Self {
        SearchStats {
            game_id: game.id().to_string(),
            statement_count: game.statement_count(),
            entry_count: entry.len(),
            generations: 0,
            timeline: Vec::new(),
            targets: Vec::new(),
            sgd_invocations: 0,
            perturbations: 0,
            fallbacks: 0,
            winning_hits: 0,
            first_win_generation: None,
            full_coverage_generation: None,
            timed_out: false,
            covered: entry.clone(),
            robust: entry.clone(),
        }
    }

    pub fn coverage_pct(&self) -> f64 {
        100.0 * self.covered.len() as f64 / self.statement_count.max(1) as f64
    }

    pub fn total_ticks(&self) -> u64 {
        self.timeline.last().map_or(0, |p| p.ticks)
    }

    /// `(cumulative ticks, coverage %)`, starting with the coverage of a
    /// freshly loaded game at tick 0, then one point per generation.
    pub fn coverage_series(&self) -> Vec<(u64, f64)> {
        let pct = |n: usize| 100.0 * n as f64 / self.statement_count.max(1) as f64;
        let mut out = vec![(0, pct(self.entry_count))];
        out.extend(self.timeline.iter().map(|p| (p.ticks, pct(p.covered))));
        out
    }

    fn record_run(&mut self, inst: &GameInstance, generation: u32) {
        self.covered.extend(&inst.covered());
        if inst.reached_winning_state() {
            self.winning_hits += 1;
            self.first_win_generation.get_or_insert(generation);
        }
    }

    fn push_point(&mut self, generation: u32, ticks: u64) {
        self.generations = generation + 1;
        self.timeline.push(TimelinePoint {
            generation,
            ticks,
            covered: self.covered.len(),
            robust: self.robust.len(),
        });
        if self.covered.len() == self.statement_count && self.full_coverage_generation.is_none() {
            self.full_coverage_generation = Some(generation + 1);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub suite: DynamicTestSuite,
    pub stats: SearchStats,
}

fn clean(g: &Genome) -> Genome {
    let mut g = g.clone();
    g.fitness = None;
    g.species = None;
    g
}

fn next_target(cdg: &ControlDependenceGraph, robust: &CoverageSet, skipped: &mut BTreeSet<StatementId>) -> Option<StatementId> {
    if let Some(t) = select_target_excluding(cdg, robust, skipped) {
        return Some(t);
    }
    if skipped.is_empty() {
        return None;
    }
    skipped.clear();
    select_target_excluding(cdg, robust, skipped)
}

fn fitness(inst: &GameInstance, target: StatementId) -> Result<f64> {
    if inst.is_covered(target) {
        return Ok(0.0);
    }
    Ok(inst.approach_level(target)? as f64 + inst.branch_distance(target)?)
}

/// Evolves input-generating networks that robustly cover every statement of
/// `game`, one target at a time. With a non-empty `dataset`, weight
/// mutations use gradient descent on the recorded sessions with probability
/// `p_gradient_descent`; otherwise that probability is forced to zero.
pub fn search(game: &Game, dataset: Option<&TrainingDataset>, config: &SearchConfig) -> Result<SearchResult> {
    config.validate()?;
    let features = feature_schema(game);
    let actions = match dataset {
        Some(ds) => {
            if ds.game_id != game.id() {
                return Err(Error::Config(format!("dataset was recorded on {}, not {}", ds.game_id, game.id())));
            }
            if ds.feature_fingerprint != features.fingerprint() {
                return Err(Error::Config("dataset feature schema does not match the game".into()));
            }
            ActionSchema::with_limits(game, ds.recorder_config.d_max, ds.recorder_config.w_max)
        }
        None => ActionSchema::for_game(game),
    };
    let p = match dataset {
        Some(ds) if !ds.is_empty() => config.p_gradient_descent,
        _ => 0.0,
    };
    Search {
        game,
        dataset,
        config,
        features,
        actions,
        p,
    }
    .run()
}

struct Search<'a> {
    game: &'a Game,
    dataset: Option<&'a TrainingDataset>,
    config: &'a SearchConfig,
    features: FeatureSchema,
    actions: ActionSchema,
    p: f64,
}

impl Search<'_> {
    fn run(&self) -> Result<SearchResult> {
        let cfg = self.config;
        let game = self.game;
        let cdg = game.cdg();
        let n = cfg.population_size;
        let cap = cfg.episode_ticks;
        let started = Instant::now();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut tracker = InnovationTracker::new();
        let mut population: Vec<Genome> = (0..n)
            .map(|_| Genome::minimal(self.features.len(), &self.actions, &mut tracker, &mut rng))
            .collect();
        let mut species: Vec<Species> = Vec::new();
        let mut next_species = 0;

        let entry: CoverageSet = game.instance(0).covered();
        let mut stats = SearchStats::new(game, &entry);
        let mut suite = DynamicTestSuite::new(game.id(), &self.actions, cap);
        let mut skipped = BTreeSet::new();
        let mut target = next_target(cdg, &stats.robust, &mut skipped);
        let mut on_target = 0u32;
        let mut ticks = 0u64;
        let mut cache: HashMap<StatementId, Arc<Vec<Snapshot>>> = HashMap::new();
        let mut inject: Vec<Genome> = Vec::new();

        let mut generation = 0u32;
        while generation < cfg.max_generations {
            if target.is_none() {
                break;
            }
            if let Some(limit) = cfg.max_wall_clock_secs {
                if started.elapsed().as_secs_f64() >= limit {
                    break;
                }
            }
            let seeds: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
            let evals: Vec<GameInstance> = population
                .par_iter()
                .zip(seeds.par_iter())
                .map(|(g, &s)| run_genome(game, g, &self.features, &self.actions, s, cap))
                .collect::<Result<_>>()?;
            for inst in &evals {
                ticks += inst.tick();
                stats.record_run(inst, generation);
            }

            // Accept as many targets as this generation's runs robustly cover.
            let mut switched = false;
            while let Some(t) = target {
                let candidates: Vec<usize> = (0..n).filter(|&i| evals[i].is_covered(t)).take(MAX_CANDIDATES).collect();
                let mut accepted = false;
                for i in candidates {
                    let mut runs: Vec<CoverageSet> = Vec::new();
                    let res = robustness_check(cfg.robustness_reps, &mut rng, |seed| {
                        let inst = run_genome(game, &population[i], &self.features, &self.actions, seed, cap)?;
                        ticks += inst.tick();
                        stats.record_run(&inst, generation);
                        runs.push(inst.covered());
                        Ok(inst.is_covered(t))
                    })?;
                    if !res.passed {
                        continue;
                    }
                    let always: Vec<StatementId> = runs[0]
                        .iter()
                        .filter(|s| runs.iter().all(|r| r.contains(*s)) && !stats.robust.contains(*s))
                        .collect();
                    let genome = clean(&population[i]);
                    for s in always {
                        stats.robust.insert(s);
                        suite.entries.push(SuiteEntry {
                            target: s,
                            genome: genome.clone(),
                            seeds: res.seeds.clone(),
                            generation,
                        });
                    }
                    inject.push(genome);
                    accepted = true;
                    break;
                }
                if !accepted {
                    break;
                }
                log::debug!("generation {generation}: target {t} covered robustly");
                stats.targets.push(TargetRecord {
                    target: t,
                    generations: on_target + 1,
                    outcome: TargetOutcome::Covered,
                });
                on_target = 0;
                switched = true;
                target = next_target(cdg, &stats.robust, &mut skipped);
            }

            stats.push_point(generation, ticks);
            log::info!(
                "generation {generation}: coverage {}/{} (robust {}), target {:?}",
                stats.covered.len(),
                stats.statement_count,
                stats.robust.len(),
                target
            );
            generation += 1;
            if cfg.stop_at_full_coverage && stats.full_coverage_generation.is_some() {
                break;
            }
            let Some(mut t) = target else { break };
            if !switched {
                on_target += 1;
                if on_target >= cfg.target_patience {
                    stats.targets.push(TargetRecord {
                        target: t,
                        generations: on_target,
                        outcome: TargetOutcome::Skipped,
                    });
                    skipped.insert(t);
                    on_target = 0;
                    switched = true;
                    target = next_target(cdg, &stats.robust, &mut skipped);
                    match target {
                        Some(next) => t = next,
                        None => break,
                    }
                }
            }
            if switched {
                for s in &mut species {
                    s.best_score = f64::NEG_INFINITY;
                    s.stale = 0;
                }
            }

            let fit: Vec<f64> = evals.iter().map(|inst| fitness(inst, t)).collect::<Result<_>>()?;
            for (g, f) in population.iter_mut().zip(&fit) {
                g.fitness = Some(*f);
            }
            let injected = if switched { std::mem::take(&mut inject) } else { Vec::new() };
            population = self.reproduce(
                &population,
                &fit,
                &mut species,
                &mut next_species,
                &mut tracker,
                &mut rng,
                injected,
                t,
                &mut cache,
                &mut stats,
            )?;
        }

        if let Some(t) = target {
            stats.timed_out = !(cfg.stop_at_full_coverage && stats.full_coverage_generation.is_some());
            stats.targets.push(TargetRecord {
                target: t,
                generations: on_target,
                outcome: TargetOutcome::Open,
            });
        }
        Ok(SearchResult { suite, stats })
    }

    #[allow(clippy::too_many_arguments)]
    fn reproduce(
        &self,
        population: &[Genome],
        fit: &[f64],
        species: &mut Vec<Species>,
        next_species: &mut usize,
        tracker: &mut InnovationTracker,
        rng: &mut ChaCha8Rng,
        mut injected: Vec<Genome>,
        target: StatementId,
        cache: &mut HashMap<StatementId, Arc<Vec<Snapshot>>>,
        stats: &mut SearchStats,
    ) -> Result<Vec<Genome>> {
        let cfg = self.config;
        let n = population.len();
        let scores: Vec<f64> = fit.iter().map(|f| 1.0 / (1.0 + f)).collect();
        let mut population = population.to_vec();
        speciate(species, &mut population, next_species, cfg);

        for s in species.iter_mut() {
            let best = s.members.iter().map(|&m| scores[m]).fold(f64::NEG_INFINITY, f64::max);
            if best > s.best_score {
                s.best_score = best;
                s.stale = 0;
            } else {
                s.stale += 1;
            }
        }
        let champion = (0..n).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        species.retain(|s| s.stale < cfg.stale_generations || s.members.contains(&champion));

        injected.truncate(n / 2);
        let shares: Vec<f64> = species
            .iter()
            .map(|s| s.members.iter().map(|&m| scores[m]).sum::<f64>() / s.members.len() as f64)
            .collect();
        let counts = allocate(&shares, n - injected.len());

        let mut children: Vec<Genome> = Vec::with_capacity(n);
        let mut weight_jobs: Vec<(usize, u64)> = Vec::new();
        for (s, &count) in species.iter().zip(&counts) {
            let order = ranked(&s.members, &scores);
            let mut left = count;
            if order.len() >= cfg.elitism_min_species_size && left > 0 {
                children.push(clean(&population[order[0]]));
                left -= 1;
            }
            let cut = ((order.len() as f64 * cfg.survival_threshold).ceil() as usize).clamp(1, order.len());
            let pool = &order[..cut];
            for _ in 0..left {
                let mut child = if pool.len() >= 2 && rng.gen::<f64>() < cfg.crossover_rate {
                    let (a, b) = pick_two(pool, rng);
                    let (f, o) = if scores[a] >= scores[b] { (a, b) } else { (b, a) };
                    crossover(&population[f], &population[o], rng)
                } else {
                    clean(&population[pool[rng.gen_range(0..pool.len())]])
                };
                if rng.gen::<f64>() < cfg.add_node_rate {
                    child.mutate_add_node(tracker, rng);
                }
                if rng.gen::<f64>() < cfg.add_connection_rate {
                    child.mutate_add_connection(tracker, rng, CONNECTION_ATTEMPTS);
                }
                if rng.gen::<f64>() < cfg.weight_mutation_rate {
                    weight_jobs.push((children.len(), rng.gen()));
                }
                children.push(child);
            }
        }

        let snapshots = match self.dataset {
            Some(ds) if self.p > 0.0 => Arc::clone(cache.entry(target).or_insert_with(|| Arc::new(filter_sessions(ds, target)))),
            _ => Arc::new(Vec::new()),
        };
        let changed: Vec<(Genome, WeightChange)> = weight_jobs
            .par_iter()
            .map(|&(i, seed)| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                hybrid_weight_change(&children[i], &snapshots, self.p, &self.actions, &cfg.loss, &cfg.perturb, &mut r)
            })
            .collect::<Result<_>>()?;
        for (&(i, _), (g, kind)) in weight_jobs.iter().zip(changed) {
            children[i] = g;
            match kind {
                WeightChange::Sgd => stats.sgd_invocations += 1,
                WeightChange::Perturbation => stats.perturbations += 1,
                WeightChange::Fallback => stats.fallbacks += 1,
            }
        }
        children.extend(injected);
        debug_assert_eq!(children.len(), n);
        Ok(children)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomTesterConfig {
    /// Episodes grouped into one timeline point, to line up with search
    /// generations.
    pub episodes_per_generation: usize,
    pub generations: u32,
    pub episode_ticks: u64,
    pub seed: u64,
    pub stop_at_full_coverage: bool,
}

impl Default for RandomTesterConfig {
    fn default() -> Self {
        RandomTesterConfig {
            episodes_per_generation: 100,
            generations: 200,
            episode_ticks: 600,
            seed: 0,
            stop_at_full_coverage: false,
        }
    }
}

/// Plays episodes of uniformly random actions from the game's processable
/// input set.
pub fn random_tester(game: &Game, config: &RandomTesterConfig) -> Result<SearchStats> {
    if config.episodes_per_generation == 0 || config.generations == 0 || config.episode_ticks == 0 {
        return Err(Error::Config("random tester budget must be positive".into()));
    }
    let actions = ActionSchema::for_game(game);
    let entry = game.instance(0).covered();
    let mut stats = SearchStats::new(game, &entry);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ticks = 0;
    for generation in 0..config.generations {
        let seeds: Vec<(u64, u64)> = (0..config.episodes_per_generation).map(|_| (rng.gen(), rng.gen())).collect();
        let runs: Vec<GameInstance> = seeds
            .par_iter()
            .map(|&(game_seed, policy_seed)| {
                let mut r = ChaCha8Rng::seed_from_u64(policy_seed);
                let mut inst = game.instance(game_seed);
                run_with(&mut inst, config.episode_ticks, |_| Ok(random_label(&actions, &mut r)))?;
                Ok(inst)
            })
            .collect::<Result<_>>()?;
        for inst in &runs {
            ticks += inst.tick();
            stats.record_run(inst, generation);
        }
        stats.push_point(generation, ticks);
        if config.stop_at_full_coverage && stats.full_coverage_generation.is_some() {
            break;
        }
    }
    stats.robust = CoverageSet::default();
    stats.timed_out = stats.full_coverage_generation.is_none();
    Ok(stats)
}

fn random_label<R: Rng>(actions: &ActionSchema, rng: &mut R) -> ActionLabel {
    let kind = actions.actions[rng.gen_range(0..actions.len())];
    let params: Vec<f64> = (0..kind.param_count()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    actions.denormalize(kind, &params)
}
