//! Experiment plans over games × configurations × seeds, their reports, and
//! the statistics used to compare configurations.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::{RecorderConfig, TrainingDataset};
use crate::engine::{BuiltinGame, Game, TICKS_PER_SECOND};
use crate::error::{Error, Result};
use crate::expert::{expert_for, record_policy};
use crate::neat::{random_tester, search, RandomTesterConfig, SearchConfig, SearchStats};

/// Samples up to this size use exact enumeration.
const EXACT_LIMIT: usize = 8;
pub const SIGNIFICANCE_LEVEL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// U statistic of the second sample; `u + u_other = n·m`.
    pub u_other: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

impl MannWhitney {
    pub fn significant(&self) -> bool {
        self.p < SIGNIFICANCE_LEVEL
    }
}

/// Midranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pooled(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&all);
    let n = a.len() as f64;
    let u = ranks[..a.len()].iter().sum::<f64>() - n * (n + 1.0) / 2.0;
    Ok((ranks, u))
}

/// Two-sided Mann-Whitney U test. Uses exact enumeration when both samples
/// have at most eight values, the tie-corrected normal approximation
/// otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.len() <= EXACT_LIMIT && b.len() <= EXACT_LIMIT {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

/// Exact p over every assignment of the pooled midranks to the first
/// sample.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    let (ranks, u) = pooled(a, b)?;
    let (n, m) = (a.len(), b.len());
    let nm = (n * m) as f64;
    let mu = nm / 2.0;
    let observed = (u - mu).abs() - 1e-9;
    let offset = (n * (n + 1)) as f64 / 2.0;
    let (mut extreme, mut total) = (0u64, 0u64);
    let mut pick = Vec::with_capacity(n);
    combinations(&ranks, n, 0, &mut pick, &mut |sum| {
        total += 1;
        if (sum - offset - mu).abs() >= observed {
            extreme += 1;
        }
    });
    Ok(MannWhitney {
        u,
        u_other: nm - u,
        p: (extreme as f64 / total as f64).min(1.0),
        exact: true,
    })
}

fn combinations<F: FnMut(f64)>(ranks: &[f64], k: usize, start: usize, pick: &mut Vec<f64>, visit: &mut F) {
    if pick.len() == k {
        visit(pick.iter().sum());
        return;
    }
    let need = k - pick.len();
    for i in start..=ranks.len() - need {
        pick.push(ranks[i]);
        combinations(ranks, k, i + 1, pick, visit);
        pick.pop();
    }
}

/// Normal approximation with tie and continuity correction.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    let (ranks, u) = pooled(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let big_n = n + m;
    let mut counts: HashMap<u64, f64> = HashMap::new();
    for r in &ranks {
        *counts.entry(r.to_bits()).or_insert(0.0) += 1.0;
    }
    let ties: f64 = counts.values().map(|t| t * t * t - t).sum();
    let var = n * m / 12.0 * ((big_n + 1.0) - ties / (big_n * (big_n - 1.0)));
    let mu = n * m / 2.0;
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - std.cdf(z))).min(1.0)
    };
    Ok(MannWhitney {
        u,
        u_other: n * m - u,
        p,
        exact: false,
    })
}

/// First tick at which the coverage percentage reaches `level`.
pub fn time_to_coverage(series: &[(u64, f64)], level: f64) -> Option<u64> {
    series.iter().find(|(_, c)| *c >= level).map(|(t, _)| *t)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

/// Where a configuration's training data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetVariant {
    #[default]
    None,
    /// A recorded dataset file; `{game}` in the path is replaced by the game
    /// name.
    File { path: PathBuf },
    /// Recorded on the fly from the game's scripted expert.
    Expert {
        seconds: u32,
        #[serde(default)]
        delta_t: Option<u32>,
        #[serde(default = "one")]
        seed: u64,
    },
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Search,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub label: String,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub dataset: DatasetVariant,
}

/// Value compared between configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    /// Final coverage percentage.
    #[default]
    Coverage,
    /// Generations until every statement was executed; runs that never get
    /// there count as infinitely slow.
    GenerationsToFull,
    /// Cumulative ticks until coverage reaches `level` percent.
    TimeToCoverage { level: f64 },
}

impl Metric {
    fn value(&self, row: &RunRow) -> f64 {
        match *self {
            Metric::Coverage => row.coverage_pct,
            Metric::GenerationsToFull => row.generations_to_full.map_or(f64::INFINITY, f64::from),
            Metric::TimeToCoverage { level } => time_to_coverage(&row.series, level).map_or(f64::INFINITY, |t| t as f64),
        }
    }

    fn name(&self) -> String {
        match self {
            Metric::Coverage => "coverage".into(),
            Metric::GenerationsToFull => "gens_to_full".into(),
            Metric::TimeToCoverage { level } => format!("ticks_to_{level}%"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub games: Vec<String>,
    pub configs: Vec<PlanConfig>,
    pub repetitions: u32,
    /// One seed per repetition; defaults to `0..repetitions`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Label of the configuration the others are tested against.
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(default)]
    pub metric: Metric,
}

impl ExperimentPlan {
    pub fn load(path: &Path) -> Result<ExperimentPlan> {
        let text = std::fs::read_to_string(path)?;
        let plan: ExperimentPlan = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.repetitions as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.repetitions as usize {
            return Err(Error::Config(format!(
                "{} seeds given for {} repetitions",
                self.seeds.len(),
                self.repetitions
            )));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.games.is_empty() || self.configs.is_empty() {
            return Err(Error::Config("plan needs at least one game and one config".into()));
        }
        for g in &self.games {
            g.parse::<BuiltinGame>()?;
        }
        let labels: BTreeSet<&str> = self.configs.iter().map(|c| c.label.as_str()).collect();
        if labels.len() != self.configs.len() {
            return Err(Error::Config("config labels must be unique".into()));
        }
        if let Some(b) = &self.baseline {
            if !labels.contains(b.as_str()) {
                return Err(Error::Config(format!("baseline {b:?} is not a config label")));
            }
        }
        for c in &self.configs {
            c.search.validate()?;
        }
        Ok(())
    }
}

/// One repetition of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub repetition: u32,
    pub seed: u64,
    pub coverage_pct: f64,
    pub won: bool,
    pub winning_hits: u64,
    pub generations: u32,
    pub generations_to_full: Option<u32>,
    pub total_ticks: u64,
    pub sgd_invocations: u64,
    pub suite_size: usize,
    /// `(cumulative ticks, coverage %)`, starting at tick 0.
    pub series: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub baseline: String,
    pub metric: String,
    pub test: MannWhitney,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub game: String,
    pub label: String,
    /// Why the cell could not run, if it failed.
    pub failed: Option<String>,
    pub runs: Vec<RunRow>,
    pub mean_coverage: f64,
    /// Repetitions whose coverage includes a winning statement.
    pub wins: u32,
    pub median_metric: Option<f64>,
    pub significance: Option<Significance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metric: Metric,
    pub cells: Vec<CellReport>,
}

fn prepare_dataset(game: &Game, variant: &DatasetVariant) -> Result<Option<Arc<TrainingDataset>>> {
    match variant {
        DatasetVariant::None => Ok(None),
        DatasetVariant::File { path } => {
            let p = PathBuf::from(path.to_string_lossy().replace("{game}", game.id()));
            Ok(Some(Arc::new(TrainingDataset::load(&p)?)))
        }
        DatasetVariant::Expert { seconds, delta_t, seed } => {
            let g: BuiltinGame = game.id().parse()?;
            let mut expert = expert_for(g)?;
            let ticks = *seconds as u64 * TICKS_PER_SECOND as u64;
            let ds = record_policy(game, expert.as_mut(), RecorderConfig::with_delta_t(*delta_t), ticks, *seed)?;
            Ok(Some(Arc::new(ds)))
        }
    }
}

fn run_row(
    game: &Game,
    cell: &PlanConfig,
    dataset: Option<&TrainingDataset>,
    repetition: u32,
    seed: u64,
) -> Result<RunRow> {
    let (stats, suite_size): (SearchStats, usize) = match cell.method {
        Method::Search => {
            let cfg = SearchConfig { seed, ..cell.search.clone() };
            let res = search(game, dataset, &cfg)?;
            (res.stats, res.suite.len())
        }
        Method::Random => {
            let cfg = RandomTesterConfig {
                episodes_per_generation: cell.search.population_size,
                generations: cell.search.max_generations,
                episode_ticks: cell.search.episode_ticks,
                seed,
                stop_at_full_coverage: cell.search.stop_at_full_coverage,
            };
            (random_tester(game, &cfg)?, 0)
        }
    };
    let won = game
        .program()
        .winning_statements()
        .iter()
        .any(|s| stats.covered.contains(*s));
    Ok(RunRow {
        repetition,
        seed,
        coverage_pct: stats.coverage_pct(),
        won,
        winning_hits: stats.winning_hits,
        generations: stats.generations,
        generations_to_full: stats.full_coverage_generation,
        total_ticks: stats.total_ticks(),
        sgd_invocations: stats.sgd_invocations,
        suite_size,
        series: stats.coverage_series(),
    })
}

/// Runs every game × config × repetition. Cells whose dataset cannot be
/// prepared, or whose runs fail, are reported as failed; the rest still run.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let seeds = plan.seeds();
    let games: Vec<Game> = plan
        .games
        .iter()
        .map(|g| Game::new(g.parse::<BuiltinGame>()?.spec()))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for game in &games {
        for cell in &plan.configs {
            let (runs, failed) = match prepare_dataset(game, &cell.dataset) {
                Err(e) => {
                    log::warn!("{} / {}: {e}", game.id(), cell.label);
                    (Vec::new(), Some(e.to_string()))
                }
                Ok(ds) => {
                    let rows: Result<Vec<RunRow>> = seeds
                        .par_iter()
                        .enumerate()
                        .map(|(rep, &seed)| run_row(game, cell, ds.as_deref(), rep as u32, seed))
                        .collect();
                    match rows {
                        Ok(r) => (r, None),
                        Err(e) => {
                            log::warn!("{} / {}: {e}", game.id(), cell.label);
                            (Vec::new(), Some(e.to_string()))
                        }
                    }
                }
            };
            let values: Vec<f64> = runs.iter().map(|r| plan.metric.value(r)).collect();
            cells.push(CellReport {
                game: game.id().to_string(),
                label: cell.label.clone(),
                failed,
                mean_coverage: if runs.is_empty() {
                    0.0
                } else {
                    runs.iter().map(|r| r.coverage_pct).sum::<f64>() / runs.len() as f64
                },
                wins: runs.iter().filter(|r| r.won).count() as u32,
                median_metric: median(&values),
                significance: None,
                runs,
            });
        }
    }

    if let Some(base) = &plan.baseline {
        let metric = plan.metric;
        let snapshot = cells.clone();
        for cell in cells.iter_mut().filter(|c| &c.label != base && c.failed.is_none()) {
            let Some(b) = snapshot
                .iter()
                .find(|b| b.game == cell.game && &b.label == base && b.failed.is_none())
            else {
                continue;
            };
            let x: Vec<f64> = cell.runs.iter().map(|r| metric.value(r)).collect();
            let y: Vec<f64> = b.runs.iter().map(|r| metric.value(r)).collect();
            let test = mann_whitney_u(&x, &y)?;
            cell.significance = Some(Significance {
                baseline: base.clone(),
                metric: metric.name(),
                significant: test.significant(),
                test,
            });
        }
    }
    Ok(ExperimentReport {
        metric: plan.metric,
        cells,
    })
}

impl ExperimentReport {
    pub fn cell(&self, game: &str, label: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.game == game && c.label == label)
    }

    /// Writes `report.txt`, `report.json` and one CSV coverage series per
    /// run into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("series"))?;
        std::fs::write(dir.join("report.txt"), self.to_string())?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        for c in &self.cells {
            for r in &c.runs {
                let mut csv = String::from("ticks,coverage_pct\n");
                for (t, cov) in &r.series {
                    writeln!(csv, "{t},{cov:.4}").expect("write to string");
                }
                let name = format!("{}_{}_{}.csv", c.game, sanitize(&c.label), r.repetition);
                std::fs::write(dir.join("series").join(name), csv)?;
            }
        }
        Ok(())
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let metric = self.metric.name();
        writeln!(
            f,
            "{:<12} {:<16} {:>4} {:>9} {:>4} {:>16} {:>10} {:>4}",
            "game", "config", "runs", "coverage", "wins", format!("median {metric}"), "p", "sig"
        )?;
        for c in &self.cells {
            if let Some(err) = &c.failed {
                writeln!(f, "{:<12} {:<16} FAILED: {err}", c.game, c.label)?;
                continue;
            }
            let med = c.median_metric.map_or("-".to_string(), |m| format!("{m:.1}"));
            let (p, sig) = match &c.significance {
                Some(s) => (format!("{:.4}", s.test.p), if s.significant { "*" } else { "" }),
                None => ("-".to_string(), ""),
            };
            writeln!(
                f,
                "{:<12} {:<16} {:>4} {:>8.2}% {:>4} {:>16} {:>10} {:>4}",
                c.game,
                c.label,
                c.runs.len(),
                c.mean_coverage,
                c.wins,
                med,
                p,
                sig
            )?;
        }
        Ok(())
    }
}
