//! Generation loop for the four algorithm variants.
//!
//! * `A`: plain NSGA-II; the result is the first front of the final
//!   population.
//! * `B`: as `A`, with every evaluated feasible individual offered to an
//!   external hypergrid archive that never feeds back into evolution.
//! * `C`: as `B`, plus periodic local search around the archive.
//! * `D`: as `C`, plus periodic coupling: on coupling generations the whole
//!   child population is drawn from the archive by roulette-wheel selection
//!   instead of being bred.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{nondominated_unique, ArchiveParams, ArchivedSolution, HypergridArchive};
use crate::local_search::{local_search_pass, LocalSearchConfig, LocalSearchStats};
use crate::network::{DesignVector, GeneBounds, PipeNetwork};
use crate::nsga2::{assign_rank_and_crowding, environmental_selection, make_children, Individual, OperatorParams};
use crate::objectives::Evaluator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    A,
    B,
    C,
    D,
}

impl Scheme {
    pub fn uses_archive(self) -> bool {
        self != Scheme::A
    }

    pub fn uses_local_search(self) -> bool {
        matches!(self, Scheme::C | Scheme::D)
    }

    pub fn uses_coupling(self) -> bool {
        self == Scheme::D
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Scheme::A),
            "B" => Ok(Scheme::B),
            "C" => Ok(Scheme::C),
            "D" => Ok(Scheme::D),
            other => Err(format!("unknown scheme {other} (expected A, B, C or D)")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// When local search runs: every `dense_period` generations from
/// `start_gen` through `dense_until`, then every `sparse_period`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LsSchedule {
    pub start_gen: usize,
    pub dense_until: usize,
    pub dense_period: usize,
    pub sparse_period: usize,
}

impl Default for LsSchedule {
    fn default() -> Self {
        Self {
            start_gen: 1000,
            dense_until: 5000,
            dense_period: 100,
            sparse_period: 1000,
        }
    }
}

impl LsSchedule {
    pub fn fires(&self, generation: usize) -> bool {
        if generation < self.start_gen {
            return false;
        }
        if generation <= self.dense_until {
            generation.is_multiple_of(self.dense_period)
        } else {
            generation.is_multiple_of(self.sparse_period)
        }
    }

    /// Number of passes over generations `1..=n_gen`.
    pub fn passes_up_to(&self, n_gen: usize) -> usize {
        (1..=n_gen).filter(|&g| self.fires(g)).count()
    }
}

/// Named parameter sets for the four medium-size benchmark networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Han,
    Bla,
    Nyt,
    Goy,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "han" => Ok(Preset::Han),
            "bla" => Ok(Preset::Bla),
            "nyt" => Ok(Preset::Nyt),
            "goy" => Ok(Preset::Goy),
            other => Err(format!("unknown preset {other} (expected han, bla, nyt or goy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scheme: Scheme,
    /// Population size `N` (even).
    pub population_size: usize,
    pub generations: usize,
    /// Independent runs `N_r`.
    pub runs: usize,
    /// Operator settings; `None` uses the defaults for the network size.
    pub operators: Option<OperatorParams>,
    /// Coupling interval `N_link` (scheme D).
    pub link_interval: usize,
    pub coupling_start_gen: usize,
    pub ls_schedule: LsSchedule,
    pub local_search: LocalSearchConfig,
    /// Archive grid; `None` derives widths from the network's cost range.
    pub archive: Option<ArchiveParams>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::D,
            population_size: 200,
            generations: 15_000,
            runs: 30,
            operators: None,
            link_interval: 100,
            coupling_start_gen: 1000,
            ls_schedule: LsSchedule::default(),
            local_search: LocalSearchConfig::default(),
            archive: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (generations, runs) = match preset {
            Preset::Han => (10_000, 30),
            Preset::Bla => (15_000, 20),
            Preset::Nyt | Preset::Goy => (15_000, 30),
        };
        Self {
            generations,
            runs,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return fail(format!(
                "population size must be even and at least 2, got {}",
                self.population_size
            ));
        }
        if self.runs == 0 {
            return fail("at least one run is required".into());
        }
        if self.link_interval == 0 {
            return fail("link interval must be at least 1".into());
        }
        if self.ls_schedule.dense_period == 0 || self.ls_schedule.sparse_period == 0 {
            return fail("local search periods must be at least 1".into());
        }
        if let Some(ops) = &self.operators {
            ops.validate().map_err(ConfigError::Invalid)?;
        }
        if let Some(archive) = &self.archive {
            archive.validate().map_err(ConfigError::Invalid)?;
        }
        Ok(())
    }

    pub fn operators_for(&self, net: &PipeNetwork) -> OperatorParams {
        self.operators
            .unwrap_or_else(|| OperatorParams::defaults_for(net.design_len()))
    }

    pub fn archive_for(&self, net: &PipeNetwork) -> ArchiveParams {
        self.archive.unwrap_or_else(|| default_archive_params(net))
    }

    /// Seed material for run `run_index`: the master seed selects the
    /// ChaCha key and the run index its stream.
    pub fn run_rng(&self, run_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run_index as u64);
        rng
    }
}

/// Cell widths of 1/256 of the cost span (all-cheapest to all-dearest) and
/// of the unit resilience range.
pub fn default_archive_params(net: &PipeNetwork) -> ArchiveParams {
    let (lo, hi) = net
        .pipes()
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(lo, hi), (k, p)| {
            let costs = net.option_table_of(k).options().iter().map(|o| o.unit_cost);
            let min = costs.clone().fold(f64::INFINITY, f64::min);
            let max = costs.fold(f64::NEG_INFINITY, f64::max);
            (lo + min * p.length, hi + max * p.length)
        });
    let span = if hi - lo > 0.0 { hi - lo } else { 1.0 };
    ArchiveParams::from_ranges(span, 1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub run_index: usize,
    /// Function evaluations, read from the evaluator's counter.
    pub fe_total: u64,
    /// Evaluations spent in local search.
    pub ls_evaluations: u64,
    pub ls_passes: usize,
    pub ls_inserted: u64,
    pub coupling_events: usize,
    /// Archive size after initialisation and after each generation.
    pub archive_size_trace: Vec<usize>,
    pub rejected_full_count: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub nd_set: Vec<ArchivedSolution>,
    pub final_population: Vec<Individual>,
    pub stats: RunStats,
}

/// Where a generation's children came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChildSource {
    Bred,
    Archive,
}

/// Children for generation `generation`: drawn from the archive on coupling
/// generations of scheme D, bred otherwise.
pub fn next_children<R: Rng + ?Sized>(
    config: &RunConfig,
    generation: usize,
    pop: &[Individual],
    archive: &HypergridArchive,
    bounds: &GeneBounds,
    ops: &OperatorParams,
    rng: &mut R,
) -> (Vec<DesignVector>, ChildSource) {
    let n = config.population_size;
    let coupled = config.scheme.uses_coupling()
        && generation >= config.coupling_start_gen
        && generation.is_multiple_of(config.link_interval)
        && !archive.is_empty();
    if coupled {
        let children = (0..n)
            .map(|_| {
                let pick = archive.select_roulette(rng).expect("archive is not empty");
                DesignVector::from_indices(&pick.indices)
            })
            .collect();
        (children, ChildSource::Archive)
    } else {
        (make_children(pop, n, bounds, ops, rng), ChildSource::Bred)
    }
}

fn evaluate_all(evaluator: &Evaluator<'_>, designs: Vec<DesignVector>) -> Vec<Individual> {
    designs
        .into_par_iter()
        .map(|d| {
            let eval = evaluator.evaluate(&d);
            Individual::new(d, eval)
        })
        .collect()
}

fn offer(archive: &mut HypergridArchive, individuals: &[Individual]) {
    for ind in individuals.iter().filter(|i| i.eval.feasible) {
        archive.try_insert(ArchivedSolution {
            indices: ind.design.to_indices(),
            eval: ind.eval,
        });
    }
}

/// One independent run.
pub fn run_single(config: &RunConfig, net: &PipeNetwork, run_index: usize) -> Result<RunResult, ConfigError> {
    config.validate()?;
    if net.design_len() == 0 {
        return Err(ConfigError::Invalid("network has no pipes to size".into()));
    }
    let started = Instant::now();
    let mut rng = config.run_rng(run_index);
    let bounds = net.gene_bounds();
    let ops = config.operators_for(net);
    let evaluator = Evaluator::new(net);
    let mut archive = HypergridArchive::new(config.archive_for(net));
    let mut stats = RunStats {
        run_index,
        ..RunStats::default()
    };
    let mut ls_totals = LocalSearchStats::default();

    let n = config.population_size;
    let initial: Vec<DesignVector> = (0..n)
        .map(|_| {
            let genes = bounds.upper.iter().map(|&u| rng.random::<f64>() * u).collect();
            DesignVector::from_genes_unchecked(genes)
        })
        .collect();
    let mut pop = evaluate_all(&evaluator, initial);
    if config.scheme.uses_archive() {
        offer(&mut archive, &pop);
    }
    assign_rank_and_crowding(&mut pop);
    stats.archive_size_trace.push(archive.len());

    for generation in 1..=config.generations {
        let (designs, source) = next_children(config, generation, &pop, &archive, &bounds, &ops, &mut rng);
        if source == ChildSource::Archive {
            stats.coupling_events += 1;
        }
        let children = evaluate_all(&evaluator, designs);
        if config.scheme.uses_archive() {
            offer(&mut archive, &children);
        }
        pop.extend(children);
        pop = environmental_selection(pop, n);

        if config.scheme.uses_local_search() && config.ls_schedule.fires(generation) && !archive.is_empty() {
            ls_totals += local_search_pass(&mut archive, &evaluator, &config.local_search, &mut rng);
            stats.ls_passes += 1;
        }
        stats.archive_size_trace.push(archive.len());
    }

    let nd_set = if config.scheme.uses_archive() {
        archive.snapshot()
    } else {
        let front0: Vec<ArchivedSolution> = pop
            .iter()
            .filter(|i| i.rank == 0)
            .map(|i| ArchivedSolution {
                indices: i.design.to_indices(),
                eval: i.eval,
            })
            .collect();
        nondominated_unique(front0)
    };

    stats.fe_total = evaluator.count();
    stats.ls_evaluations = ls_totals.evaluations;
    stats.ls_inserted = ls_totals.inserted;
    stats.rejected_full_count = archive.rejected_full_count();
    stats.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(RunResult {
        nd_set,
        final_population: pop,
        stats,
    })
}

#[derive(Debug, Clone)]
pub struct MergedResult {
    /// Non-dominated union of all runs, ascending cost.
    pub nd_set: Vec<ArchivedSolution>,
    pub fe_total: u64,
    pub runs: Vec<RunStats>,
}

/// Runs `config.runs` independent runs in parallel and merges their
/// non-dominated sets.
pub fn run_all(config: &RunConfig, net: &PipeNetwork) -> Result<MergedResult, ConfigError> {
    config.validate()?;
    let results: Vec<RunResult> = (0..config.runs)
        .into_par_iter()
        .map(|r| run_single(config, net, r))
        .collect::<Result<_, _>>()?;
    let fe_total = results.iter().map(|r| r.stats.fe_total).sum();
    let mut runs = Vec::with_capacity(results.len());
    let mut pooled = Vec::new();
    for r in results {
        pooled.extend(r.nd_set);
        runs.push(r.stats);
    }
    Ok(MergedResult {
        nd_set: nondominated_unique(pooled),
        fe_total,
        runs,
    })
}

/// Per-run seed record for the run manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeed {
    pub run_index: usize,
    pub master_seed: u64,
    pub stream: u64,
}

/// Everything needed to reproduce a result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub network: String,
    pub config: RunConfig,
    pub operators: OperatorParams,
    pub archive: ArchiveParams,
    pub seeds: Vec<RunSeed>,
}

impl RunManifest {
    pub fn new(version: &str, network: &str, config: &RunConfig, net: &PipeNetwork) -> Self {
        Self {
            version: version.to_string(),
            network: network.to_string(),
            config: config.clone(),
            operators: config.operators_for(net),
            archive: config.archive_for(net),
            seeds: (0..config.runs)
                .map(|r| RunSeed {
                    run_index: r,
                    master_seed: config.seed,
                    stream: r as u64,
                })
                .collect(),
        }
    }
}
