//! Neuroevolution over the control dependence graph: configuration,
//! genome distance, crossover, speciation and target selection. The search
//! loop itself lives in [`search`].

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{ControlDependenceGraph, CoverageSet, StatementId};
use crate::error::{Error, Result};
use crate::gradient::{LossConfig, PerturbConfig};
use crate::network::{ConnectionGene, Genome};

mod search;
mod suite;

pub use search::{random_tester, search, RandomTesterConfig, SearchResult, SearchStats, TargetOutcome, TargetRecord, TimelinePoint};
pub use suite::{replay_entry, replay_suite, robustness_check, run_genome, DynamicTestSuite, ReplayOutcome, RobustnessResult, SuiteEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub population_size: usize,
    pub robustness_reps: u32,
    /// Generation budget.
    pub max_generations: u32,
    /// Optional wall-clock budget; the search stops at whichever comes first.
    pub max_wall_clock_secs: Option<f64>,
    /// Probability that a weight mutation uses gradient descent.
    pub p_gradient_descent: f64,
    pub add_node_rate: f64,
    pub add_connection_rate: f64,
    pub weight_mutation_rate: f64,
    pub crossover_rate: f64,
    pub perturb: PerturbConfig,
    pub loss: LossConfig,
    pub compatibility_threshold: f64,
    pub c_excess: f64,
    pub c_disjoint: f64,
    pub c_weight: f64,
    /// Generations without improvement before a species is dropped.
    pub stale_generations: u32,
    /// Fraction of each species allowed to reproduce.
    pub survival_threshold: f64,
    /// Species at least this large keep their champion unchanged.
    pub elitism_min_species_size: usize,
    pub episode_ticks: u64,
    /// Generations spent on one target before moving on to another.
    pub target_patience: u32,
    pub seed: u64,
    /// End the search as soon as every statement has been executed once.
    pub stop_at_full_coverage: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population_size: 100,
            robustness_reps: 10,
            max_generations: 200,
            max_wall_clock_secs: None,
            p_gradient_descent: 0.0,
            add_node_rate: 0.03,
            add_connection_rate: 0.05,
            weight_mutation_rate: 0.8,
            crossover_rate: 0.75,
            perturb: PerturbConfig::default(),
            loss: LossConfig::default(),
            compatibility_threshold: 3.0,
            c_excess: 1.0,
            c_disjoint: 1.0,
            c_weight: 0.0,
            stale_generations: 15,
            survival_threshold: 0.3,
            elitism_min_species_size: 5,
            episode_ticks: 600,
            target_patience: 30,
            seed: 0,
            stop_at_full_coverage: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_gradient_descent", self.p_gradient_descent),
            ("add_node_rate", self.add_node_rate),
            ("add_connection_rate", self.add_connection_rate),
            ("weight_mutation_rate", self.weight_mutation_rate),
            ("crossover_rate", self.crossover_rate),
            ("survival_threshold", self.survival_threshold),
            ("perturb.perturb", self.perturb.perturb),
            ("perturb.replace", self.perturb.replace),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.perturb.perturb + self.perturb.replace > 1.0 {
            return Err(Error::Config("perturb.perturb + perturb.replace must not exceed 1".into()));
        }
        if self.population_size < 2 {
            return Err(Error::Config("population_size must be at least 2".into()));
        }
        if self.robustness_reps < 1 {
            return Err(Error::Config("robustness_reps must be at least 1".into()));
        }
        if self.max_generations < 1 {
            return Err(Error::Config("max_generations must be at least 1".into()));
        }
        if let Some(s) = self.max_wall_clock_secs {
            if !(s > 0.0) {
                return Err(Error::Config("max_wall_clock_secs must be positive".into()));
            }
        }
        if self.episode_ticks < 1 || self.target_patience < 1 {
            return Err(Error::Config("episode_ticks and target_patience must be at least 1".into()));
        }
        if !(self.compatibility_threshold > 0.0) {
            return Err(Error::Config("compatibility_threshold must be positive".into()));
        }
        for (name, c) in [("c_excess", self.c_excess), ("c_disjoint", self.c_disjoint), ("c_weight", self.c_weight)] {
            if !(c >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        self.loss.validate()
    }
}

/// Genomes smaller than this are compared without size normalisation.
const SMALL_GENOME: usize = 20;

/// NEAT compatibility distance. Genes are aligned by innovation; excess
/// genes lie beyond the other genome's highest innovation.
pub fn compatibility(a: &Genome, b: &Genome, config: &SearchConfig) -> f64 {
    let (ca, cb) = (&a.connections, &b.connections);
    let max_a = ca.last().map(|c| c.innovation);
    let max_b = cb.last().map(|c| c.innovation);
    let (mut excess, mut disjoint, mut matching) = (0usize, 0usize, 0usize);
    let mut weight_diff = 0.0;
    let (mut i, mut j) = (0, 0);
    let unmatched = |g: &ConnectionGene, other_max: Option<u64>| match other_max {
        Some(m) if g.innovation <= m => (0, 1),
        _ => (1, 0),
    };
    while i < ca.len() || j < cb.len() {
        match (ca.get(i), cb.get(j)) {
            (Some(x), Some(y)) if x.innovation == y.innovation => {
                matching += 1;
                weight_diff += (x.weight - y.weight).abs();
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.innovation < y.innovation => {
                let (e, d) = unmatched(x, max_b);
                excess += e;
                disjoint += d;
                i += 1;
            }
            (Some(_), Some(y)) => {
                let (e, d) = unmatched(y, max_a);
                excess += e;
                disjoint += d;
                j += 1;
            }
            (Some(x), None) => {
                let (e, d) = unmatched(x, max_b);
                excess += e;
                disjoint += d;
                i += 1;
            }
            (None, Some(y)) => {
                let (e, d) = unmatched(y, max_a);
                excess += e;
                disjoint += d;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    let larger = ca.len().max(cb.len());
    let n = if larger < SMALL_GENOME { 1.0 } else { larger as f64 };
    let mean_w = if matching == 0 { 0.0 } else { weight_diff / matching as f64 };
    let mut d = (config.c_excess * excess as f64 + config.c_disjoint * disjoint as f64) / n;
    if config.c_weight != 0.0 {
        d += config.c_weight * mean_w;
    }
    d
}

/// Offspring of `fitter` and `other`. Matching genes come from either parent
/// at random; disjoint and excess genes come from `fitter`, as do the nodes.
pub fn crossover<R: Rng>(fitter: &Genome, other: &Genome, rng: &mut R) -> Genome {
    let mut child = fitter.clone();
    child.fitness = None;
    child.species = None;
    let mut j = 0;
    for gene in &mut child.connections {
        while j < other.connections.len() && other.connections[j].innovation < gene.innovation {
            j += 1;
        }
        if let Some(o) = other.connections.get(j) {
            if o.innovation == gene.innovation && rng.gen::<bool>() {
                gene.weight = o.weight;
                gene.enabled = o.enabled;
            }
        }
    }
    child
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub id: usize,
    pub representative: Genome,
    /// Population indices.
    pub members: Vec<usize>,
    pub best_score: f64,
    pub stale: u32,
}

/// Assigns each genome to the first species whose representative is within
/// the compatibility threshold, founding new species as needed. Species that
/// end up empty are dropped; survivors take their first member as the next
/// representative.
pub fn speciate(species: &mut Vec<Species>, population: &mut [Genome], next_id: &mut usize, config: &SearchConfig) {
    for s in species.iter_mut() {
        s.members.clear();
    }
    for (i, g) in population.iter_mut().enumerate() {
        let found = species
            .iter()
            .position(|s| compatibility(g, &s.representative, config) < config.compatibility_threshold);
        let si = match found {
            Some(si) => si,
            None => {
                species.push(Species {
                    id: *next_id,
                    representative: g.clone(),
                    members: Vec::new(),
                    best_score: f64::NEG_INFINITY,
                    stale: 0,
                });
                *next_id += 1;
                species.len() - 1
            }
        };
        species[si].members.push(i);
        g.species = Some(species[si].id);
    }
    species.retain(|s| !s.members.is_empty());
    for s in species.iter_mut() {
        s.representative = population[s.members[0]].clone();
    }
}

/// Splits `total` offspring in proportion to `shares`, handing out the
/// remainder by largest fraction (ties to the lower index).
pub fn allocate(shares: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    if shares.is_empty() {
        return Vec::new();
    }
    if !(sum > 0.0) {
        let mut out = vec![total / shares.len(); shares.len()];
        for o in out.iter_mut().take(total % shares.len()) {
            *o += 1;
        }
        return out;
    }
    let exact: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let given: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(given)) {
        out[i] += 1;
    }
    out
}

/// Parents for the next generation of one species: members sorted by score,
/// best first (stable on population index).
pub(crate) fn ranked(members: &[usize], scores: &[f64]) -> Vec<usize> {
    let mut m = members.to_vec();
    m.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    m
}

pub(crate) fn pick_two<R: Rng>(pool: &[usize], rng: &mut R) -> (usize, usize) {
    let two: Vec<usize> = pool.choose_multiple(rng, 2).copied().collect();
    (two[0], two[1])
}

/// Next statement to target: breadth-first from the entry roots in
/// ascending id order, the first uncovered child of a covered node.
pub fn select_target(cdg: &ControlDependenceGraph, covered: &CoverageSet) -> Option<StatementId> {
    select_target_excluding(cdg, covered, &BTreeSet::new())
}

/// Like [`select_target`], but never returns (or descends below) statements
/// in `excluded`.
pub fn select_target_excluding(
    cdg: &ControlDependenceGraph,
    covered: &CoverageSet,
    excluded: &BTreeSet<StatementId>,
) -> Option<StatementId> {
    let mut queue = VecDeque::new();
    for &r in cdg.roots() {
        if excluded.contains(&r) {
            continue;
        }
        if !covered.contains(r) {
            return Some(r);
        }
        queue.push_back(r);
    }
    while let Some(n) = queue.pop_front() {
        for &c in cdg.children(n) {
            if excluded.contains(&c) {
                continue;
            }
            if !covered.contains(c) {
                return Some(c);
            }
            queue.push_back(c);
        }
    }
    None
}

#[cfg(test)]
mod tests;
