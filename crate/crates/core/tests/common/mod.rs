//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use aquafront::archive::ArchivedSolution;
use aquafront::metrics::{ComparisonReport, FrontPoint};
use aquafront::network::PipeNetwork;
use aquafront::objectives::{evaluate_indices, Evaluation};
use rand::Rng;

/// Plain Pareto dominance, cost down and resilience up.
pub fn pareto(a: [f64; 2], b: [f64; 2]) -> bool {
    a[0] <= b[0] && a[1] >= b[1] && (a[0] < b[0] || a[1] > b[1])
}

/// Feasibility-first dominance written out case by case.
pub fn constrained(a: &Evaluation, b: &Evaluation) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.total_head_deficit < b.total_head_deficit,
        (true, true) => pareto(a.objectives(), b.objectives()),
    }
}

pub fn feasible(cost: f64, resilience: f64) -> Evaluation {
    Evaluation {
        cost,
        resilience,
        feasible: true,
        total_head_deficit: 0.0,
        fe_count: 1,
    }
}

pub fn infeasible(cost: f64, deficit: f64) -> Evaluation {
    Evaluation {
        cost,
        resilience: -1.0,
        feasible: false,
        total_head_deficit: deficit,
        fe_count: 1,
    }
}

/// Random evaluations on a coarse grid so that ties are common.
pub fn random_evaluations<R: Rng>(rng: &mut R, n: usize) -> Vec<Evaluation> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                infeasible(rng.random_range(0..20) as f64, rng.random_range(1..6) as f64)
            } else {
                feasible(rng.random_range(0..20) as f64, rng.random_range(0..20) as f64 / 20.0)
            }
        })
        .collect()
}

/// Indices not dominated by any other member.
pub fn brute_front0(evals: &[Evaluation]) -> Vec<usize> {
    (0..evals.len())
        .filter(|&i| !(0..evals.len()).any(|j| constrained(&evals[j], &evals[i])))
        .collect()
}

/// Feasible, mutually non-dominated, duplicate-free objective vectors from
/// a pairwise scan, ascending cost.
pub fn brute_pareto_set(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if points.iter().any(|q| pareto(*q, *p)) {
            continue;
        }
        if points[..i].contains(p) {
            continue;
        }
        out.push(*p);
    }
    out.sort_by(|a, b| a[0].total_cmp(&b[0]));
    out
}

/// Exhaustive enumeration of a network's feasible Pareto set.
pub fn exhaustive_front(net: &PipeNetwork) -> Vec<[f64; 2]> {
    let feasible: Vec<[f64; 2]> = aquafront::instances::enumerate_designs(net)
        .iter()
        .map(|d| evaluate_indices(net, d))
        .filter(|e| e.feasible)
        .map(|e| e.objectives())
        .collect();
    brute_pareto_set(&feasible)
}

/// Counts `(dominated pairs, duplicate pairs)` among stored solutions.
pub fn pairwise_violations(solutions: &[ArchivedSolution]) -> (usize, usize) {
    let mut dominated = 0;
    let mut duplicates = 0;
    for (i, a) in solutions.iter().enumerate() {
        for b in &solutions[i + 1..] {
            let (pa, pb) = (a.objectives(), b.objectives());
            if pa == pb {
                duplicates += 1;
            } else if pareto(pa, pb) || pareto(pb, pa) {
                dominated += 1;
            }
        }
    }
    (dominated, duplicates)
}

/// A random front on a coarse grid drawn from `pool` plus fresh points.
pub fn random_front<R: Rng>(rng: &mut R, pool: &[[f64; 2]], n_fresh: usize) -> Vec<FrontPoint> {
    let mut candidates: Vec<[f64; 2]> = pool.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
    for _ in 0..n_fresh {
        candidates.push([rng.random_range(0..60) as f64 * 10.0, rng.random_range(0..60) as f64 / 64.0]);
    }
    let mut front: Vec<FrontPoint> = brute_pareto_set(&candidates)
        .into_iter()
        .map(|p| FrontPoint::new(p[0], p[1]))
        .collect();
    // Shuffle so no test relies on sorted input.
    for i in (1..front.len()).rev() {
        let j = rng.random_range(0..=i);
        front.swap(i, j);
    }
    front
}

/// Comparison counts by direct pairwise scans; fronts must not contain
/// near-duplicates, so exact equality defines "common".
pub fn brute_compare(pf1: &[FrontPoint], pf2: &[FrontPoint]) -> ComparisonReport {
    let obj = |p: &FrontPoint| [p.cost, p.resilience];
    let accepted = |a: &[FrontPoint], b: &[FrontPoint]| -> Vec<[f64; 2]> {
        a.iter()
            .map(obj)
            .filter(|p| !b.iter().any(|q| pareto(obj(q), *p)))
            .collect()
    };
    let acc1 = accepted(pf1, pf2);
    let acc2 = accepted(pf2, pf1);
    let common = acc1.iter().filter(|p| acc2.contains(p)).count();
    ComparisonReport {
        n1_total: pf1.len(),
        n1_accepted: acc1.len(),
        n1_rejected: pf1.len() - acc1.len(),
        n1_unique: acc1.len() - common,
        n2_total: pf2.len(),
        n2_accepted: acc2.len(),
        n2_rejected: pf2.len() - acc2.len(),
        n2_unique: acc2.len() - common,
        n_common: common,
        fe1: None,
        fe2: None,
    }
}
