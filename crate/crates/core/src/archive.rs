//! External archive of non-dominated solutions on a fixed hypergrid.
//!
//! The grid has fixed cell widths and no boundaries: any objective vector
//! maps to an integer cell, and only occupied cells are stored. Each cell
//! holds at most `max_occupancy` solutions. Because the archive is a
//! two-objective non-dominated set, sorting by cost also sorts by
//! resilience, which keeps dominance checks logarithmic.

use std::collections::BTreeMap;
use std::ops::Bound;

use ordered_float::OrderedFloat;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nsga2::pareto_dominates;
use crate::objectives::Evaluation;

pub type CellCoord = [i64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchiveParams {
    /// Cell width per objective `(cost, resilience)`.
    pub cell_widths: [f64; 2],
    pub origin: [f64; 2],
    pub max_occupancy: usize,
}

impl ArchiveParams {
    pub const DEFAULT_DIVISIONS: f64 = 256.0;
    pub const DEFAULT_MAX_OCCUPANCY: usize = 64;

    /// Widths of `range / 256` per objective, origin at zero, occupancy 64.
    pub fn from_ranges(cost_range: f64, resilience_range: f64) -> Self {
        Self {
            cell_widths: [
                cost_range / Self::DEFAULT_DIVISIONS,
                resilience_range / Self::DEFAULT_DIVISIONS,
            ],
            origin: [0.0, 0.0],
            max_occupancy: Self::DEFAULT_MAX_OCCUPANCY,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cell_widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(format!("cell widths must be positive, got {:?}", self.cell_widths));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err("archive origin must be finite".into());
        }
        if self.max_occupancy == 0 {
            return Err("max_occupancy must be at least 1".into());
        }
        Ok(())
    }
}

/// Grid cell of an objective vector: `floor((f − origin) / width)`.
pub fn cell_of(objectives: [f64; 2], widths: [f64; 2], origin: [f64; 2]) -> CellCoord {
    [0, 1].map(|k| ((objectives[k] - origin[k]) / widths[k]).floor() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedSolution {
    pub indices: Vec<usize>,
    pub eval: Evaluation,
}

impl ArchivedSolution {
    pub fn objectives(&self) -> [f64; 2] {
        self.eval.objectives()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Stored; `removed` previously stored solutions were dominated by it.
    Inserted { removed: usize },
    Dominated,
    Duplicate,
    CellFull,
    /// Infeasible or non-finite candidates are never archived.
    NotFeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArchiveError {
    #[error("archive is empty")]
    EmptyArchive,
}

type Key = OrderedFloat<f64>;

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    solution: ArchivedSolution,
    cell: CellCoord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypergridArchive {
    params: ArchiveParams,
    /// Stored solutions keyed by cost; costs are unique in a
    /// non-dominated, duplicate-free set.
    entries: BTreeMap<Key, Entry>,
    /// Occupied cells and the cost keys they hold, in insertion order.
    cells: BTreeMap<CellCoord, Vec<Key>>,
    rejected_full: u64,
}

impl HypergridArchive {
    pub fn new(params: ArchiveParams) -> Self {
        Self {
            params,
            entries: BTreeMap::new(),
            cells: BTreeMap::new(),
            rejected_full: 0,
        }
    }

    pub fn params(&self) -> &ArchiveParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of candidates turned away because their cell was full.
    pub fn rejected_full_count(&self) -> u64 {
        self.rejected_full
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn occupancy(&self, cell: CellCoord) -> usize {
        self.cells.get(&cell).map_or(0, Vec::len)
    }

    pub fn cell_of(&self, objectives: [f64; 2]) -> CellCoord {
        cell_of(objectives, self.params.cell_widths, self.params.origin)
    }

    /// Offers a candidate to the archive. Anything other than `Inserted`
    /// leaves the archive unchanged apart from the cell-full tally.
    pub fn try_insert(&mut self, candidate: ArchivedSolution) -> InsertOutcome {
        let [cost, res] = candidate.objectives();
        if !candidate.eval.feasible || !cost.is_finite() || !res.is_finite() {
            return InsertOutcome::NotFeasible;
        }
        let key = OrderedFloat(cost);

        // The stored solution with the largest cost not above the
        // candidate's has the highest resilience among all cheaper ones.
        if let Some((&k, e)) = self.entries.range(..=key).next_back() {
            let stored = e.solution.objectives();
            if k == key && stored[1] == res {
                return InsertOutcome::Duplicate;
            }
            if pareto_dominates(stored, [cost, res]) {
                return InsertOutcome::Dominated;
            }
        }

        // Dominated stored solutions form a contiguous run starting at the
        // candidate's cost.
        let doomed: Vec<Key> = self
            .entries
            .range((Bound::Included(key), Bound::Unbounded))
            .take_while(|(_, e)| e.solution.objectives()[1] <= res)
            .map(|(&k, _)| k)
            .collect();

        let cell = self.cell_of([cost, res]);
        let freed = doomed
            .iter()
            .filter(|k| self.entries[*k].cell == cell)
            .count();
        if self.occupancy(cell) - freed >= self.params.max_occupancy {
            self.rejected_full += 1;
            return InsertOutcome::CellFull;
        }

        for k in &doomed {
            let entry = self.entries.remove(k).expect("key collected from map");
            let members = self.cells.get_mut(&entry.cell).expect("cell of stored entry");
            members.retain(|m| m != k);
            if members.is_empty() {
                self.cells.remove(&entry.cell);
            }
        }
        self.cells.entry(cell).or_default().push(key);
        self.entries.insert(
            key,
            Entry {
                solution: candidate,
                cell,
            },
        );
        InsertOutcome::Inserted {
            removed: doomed.len(),
        }
    }

    /// Roulette-wheel selection favouring sparse cells: an occupied cell is
    /// chosen with probability proportional to 1/occupancy, then a member of
    /// it uniformly.
    pub fn select_roulette<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&ArchivedSolution, ArchiveError> {
        if self.cells.is_empty() {
            return Err(ArchiveError::EmptyArchive);
        }
        let total: f64 = self.cells.values().map(|m| 1.0 / m.len() as f64).sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = None;
        for members in self.cells.values() {
            chosen = Some(members);
            target -= 1.0 / members.len() as f64;
            if target < 0.0 {
                break;
            }
        }
        let members = chosen.expect("at least one cell");
        let key = members[rng.random_range(0..members.len())];
        Ok(&self.entries[&key].solution)
    }

    /// Stored solutions in ascending cost order.
    pub fn snapshot(&self) -> Vec<ArchivedSolution> {
        self.entries.values().map(|e| e.solution.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ArchivedSolution> {
        self.entries.values().map(|e| &e.solution)
    }

    /// Objective vectors in ascending cost order.
    pub fn objectives(&self) -> Vec<[f64; 2]> {
        self.iter().map(ArchivedSolution::objectives).collect()
    }

    /// Checks every structural invariant; used by tests and debug builds.
    pub fn check_invariants(&self) -> Result<(), String> {
        let sols: Vec<&Entry> = self.entries.values().collect();
        for w in sols.windows(2) {
            let (a, b) = (w[0].solution.objectives(), w[1].solution.objectives());
            if !(a[0] < b[0] && a[1] < b[1]) {
                return Err(format!("stored pair {a:?} / {b:?} is not mutually non-dominated"));
            }
        }
        let mut counted = 0;
        for (cell, members) in &self.cells {
            if members.len() > self.params.max_occupancy {
                return Err(format!("cell {cell:?} holds {} solutions", members.len()));
            }
            for k in members {
                let e = self.entries.get(k).ok_or("cell refers to missing entry")?;
                if e.cell != *cell || self.cell_of(e.solution.objectives()) != *cell {
                    return Err(format!("solution at cost {} filed in wrong cell", k.0));
                }
            }
            counted += members.len();
        }
        if counted != self.entries.len() {
            return Err("cell membership does not cover the archive".into());
        }
        Ok(())
    }
}

/// Non-dominated, objective-unique subset of `solutions` in ascending cost
/// order. Among equal objective vectors the earliest one is kept.
pub fn nondominated_unique(solutions: Vec<ArchivedSolution>) -> Vec<ArchivedSolution> {
    let mut feasible: Vec<ArchivedSolution> = solutions
        .into_iter()
        .filter(|s| s.eval.feasible && s.objectives().iter().all(|v| v.is_finite()))
        .collect();
    feasible.sort_by(|a, b| {
        let (a, b) = (a.objectives(), b.objectives());
        a[0].total_cmp(&b[0]).then(b[1].total_cmp(&a[1]))
    });
    let mut best_res = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for s in feasible {
        if s.objectives()[1] > best_res {
            best_res = s.objectives()[1];
            out.push(s);
        }
    }
    out
}
