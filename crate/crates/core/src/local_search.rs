//! Periodic local search around archived solutions.
//!
//! One pass takes a frozen snapshot of the archive, evaluates every
//! single-pipe ±1 diameter step around each snapshot member and offers the
//! feasible results back to the archive. Neighbours of newly inserted
//! solutions are left for the next pass.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::{ArchivedSolution, HypergridArchive, InsertOutcome};
use crate::objectives::Evaluator;

/// All index vectors one ±1 step away from `indices` in a single
/// coordinate, skipping moves that would leave `[0, K-1]`. Per coordinate
/// the `-1` move comes first.
pub fn neighborhood(indices: &[usize], option_counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(2 * indices.len());
    for (k, (&idx, &count)) in indices.iter().zip(option_counts).enumerate() {
        if idx > 0 {
            let mut down = indices.to_vec();
            down[k] = idx - 1;
            out.push(down);
        }
        if idx + 1 < count {
            let mut up = indices.to_vec();
            up[k] = idx + 1;
            out.push(up);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSearchConfig {
    /// Search around at most this many randomly chosen archive members per
    /// pass; `None` sweeps the whole archive.
    pub max_solutions: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSearchStats {
    pub evaluations: u64,
    pub inserted: u64,
    pub dominated_removed: u64,
}

impl std::ops::AddAssign for LocalSearchStats {
    fn add_assign(&mut self, rhs: Self) {
        self.evaluations += rhs.evaluations;
        self.inserted += rhs.inserted;
        self.dominated_removed += rhs.dominated_removed;
    }
}

/// Runs one local-search pass over `archive`.
///
/// Neighbours whose index vector is already stored, or that were already
/// generated earlier in the same pass, are not re-evaluated.
pub fn local_search_pass<R: Rng + ?Sized>(
    archive: &mut HypergridArchive,
    evaluator: &Evaluator<'_>,
    config: &LocalSearchConfig,
    rng: &mut R,
) -> LocalSearchStats {
    let mut snapshot = archive.snapshot();
    if let Some(limit) = config.max_solutions {
        if limit < snapshot.len() {
            let mut picked = sample(rng, snapshot.len(), limit).into_vec();
            picked.sort_unstable();
            snapshot = picked.into_iter().map(|i| snapshot[i].clone()).collect();
        }
    }
    let option_counts: Vec<usize> = evaluator
        .network()
        .gene_bounds()
        .upper
        .iter()
        .map(|&u| u as usize + 1)
        .collect();

    let mut seen: HashSet<Vec<usize>> = archive.iter().map(|s| s.indices.clone()).collect();
    let mut candidates = Vec::new();
    for solution in &snapshot {
        for nb in neighborhood(&solution.indices, &option_counts) {
            if seen.insert(nb.clone()) {
                candidates.push(nb);
            }
        }
    }

    let evaluated: Vec<ArchivedSolution> = candidates
        .into_par_iter()
        .map(|indices| {
            let eval = evaluator.evaluate_indices(&indices);
            ArchivedSolution { indices, eval }
        })
        .collect();

    let mut stats = LocalSearchStats {
        evaluations: evaluated.len() as u64,
        ..LocalSearchStats::default()
    };
    for candidate in evaluated {
        if let InsertOutcome::Inserted { removed } = archive.try_insert(candidate) {
            stats.inserted += 1;
            stats.dominated_removed += removed as u64;
        }
    }
    stats
}
