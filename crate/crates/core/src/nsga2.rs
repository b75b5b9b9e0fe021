//! Real-coded NSGA-II building blocks: constrained dominance, fast
//! non-dominated sorting, crowding distance, binary tournament selection,
//! simulated binary crossover and polynomial mutation.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::network::{DesignVector, GeneBounds};
use crate::objectives::Evaluation;

/// Variation operator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    /// Probability that a parent pair undergoes crossover.
    pub crossover_prob: f64,
    /// SBX distribution index.
    pub crossover_eta: f64,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    /// Polynomial mutation distribution index.
    pub mutation_eta: f64,
}

impl OperatorParams {
    /// `p_c = 0.9`, `η_c = 15`, `η_m = 7` and `p_m = 1/n_real`.
    pub fn defaults_for(n_real: usize) -> Self {
        Self {
            crossover_prob: 0.9,
            crossover_eta: 15.0,
            mutation_prob: 1.0 / n_real.max(1) as f64,
            mutation_eta: 7.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        for (name, eta) in [("crossover_eta", self.crossover_eta), ("mutation_eta", self.mutation_eta)] {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(format!("{name} must be positive, got {eta}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub design: DesignVector,
    pub eval: Evaluation,
    /// Front index from the last sort (0 = best).
    pub rank: usize,
    /// Crowding distance from the last sort.
    pub crowding: f64,
}

impl Individual {
    pub fn new(design: DesignVector, eval: Evaluation) -> Self {
        Self {
            design,
            eval,
            rank: usize::MAX,
            crowding: 0.0,
        }
    }
}

/// Pareto dominance on `(cost ↓, resilience ↑)`.
pub fn pareto_dominates(a: [f64; 2], b: [f64; 2]) -> bool {
    let no_worse = a[0] <= b[0] && a[1] >= b[1];
    let better = a[0] < b[0] || a[1] > b[1];
    no_worse && better
}

/// Feasibility-first constrained dominance.
pub fn dominates(a: &Evaluation, b: &Evaluation) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.total_head_deficit < b.total_head_deficit,
        (true, true) => pareto_dominates(a.objectives(), b.objectives()),
    }
}

/// Partitions `evals` into successive non-dominated fronts (indices).
pub fn fast_nondominated_sort(evals: &[Evaluation]) -> Vec<Vec<usize>> {
    let n = evals.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&evals[i], &evals[j]) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&evals[j], &evals[i]) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each point in a front. Extremes of every objective
/// get `∞`; interior points accumulate the normalised gap between their
/// neighbours. Objectives with zero or non-finite range contribute nothing.
pub fn crowding_distance(points: &[[f64; 2]]) -> Vec<f64> {
    let n = points.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut distance = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..2 {
        order.sort_by(|&a, &b| points[a][m].total_cmp(&points[b][m]).then(a.cmp(&b)));
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let range = points[order[n - 1]][m] - points[order[0]][m];
        if !(range.is_finite() && range > 0.0) {
            continue;
        }
        for w in 1..n - 1 {
            let gap = points[order[w + 1]][m] - points[order[w - 1]][m];
            distance[order[w]] += gap / range;
        }
    }
    distance
}

/// Objective vector used for crowding. Infeasible individuals share a front
/// only with equally-infeasible ones, so their deficit replaces resilience.
fn crowding_point(eval: &Evaluation) -> [f64; 2] {
    if eval.feasible {
        eval.objectives()
    } else {
        [eval.cost, eval.total_head_deficit]
    }
}

/// Sorts `pop` into fronts and writes rank and crowding into every member.
/// Returns the fronts as index lists.
pub fn assign_rank_and_crowding(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let evals: Vec<Evaluation> = pop.iter().map(|i| i.eval).collect();
    let fronts = fast_nondominated_sort(&evals);
    for (rank, front) in fronts.iter().enumerate() {
        let points: Vec<[f64; 2]> = front.iter().map(|&i| crowding_point(&pop[i].eval)).collect();
        let distances = crowding_distance(&points);
        for (&i, d) in front.iter().zip(distances) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    fronts
}

/// Crowded comparison: lower rank, then larger crowding distance.
fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.total_cmp(&a.crowding))
}

/// Binary tournament between `pop[a]` and `pop[b]`; ties go to a fair coin.
pub fn tournament<R: Rng + ?Sized>(pop: &[Individual], a: usize, b: usize, rng: &mut R) -> usize {
    match crowded_cmp(&pop[a], &pop[b]) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if rng.random_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

/// Spread factor β of SBX for a uniform draw `u` in `[0, 1)`.
pub fn sbx_beta(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exponent)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exponent)
    }
}

/// Unclipped SBX children of one gene pair.
pub fn sbx_gene(x1: f64, x2: f64, u: f64, eta: f64) -> (f64, f64) {
    let beta = sbx_beta(u, eta);
    (
        0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2),
        0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2),
    )
}

/// Simulated binary crossover. With probability `crossover_prob` the pair
/// recombines; each gene is then exchanged with probability 0.5. Children
/// are clipped to the gene bounds.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &DesignVector,
    p2: &DesignVector,
    bounds: &GeneBounds,
    params: &OperatorParams,
    rng: &mut R,
) -> (DesignVector, DesignVector) {
    let mut c1 = p1.genes().to_vec();
    let mut c2 = p2.genes().to_vec();
    if params.crossover_prob > 0.0 && rng.random::<f64>() < params.crossover_prob {
        for (k, &upper) in bounds.upper.iter().enumerate() {
            if !rng.random_bool(0.5) {
                continue;
            }
            let (x1, x2) = (c1[k], c2[k]);
            if (x1 - x2).abs() <= 1e-14 {
                continue;
            }
            let u = rng.random::<f64>();
            let (y1, y2) = sbx_gene(x1, x2, u, params.crossover_eta);
            c1[k] = y1.clamp(0.0, upper);
            c2[k] = y2.clamp(0.0, upper);
        }
    }
    (
        DesignVector::from_genes_unchecked(c1),
        DesignVector::from_genes_unchecked(c2),
    )
}

/// Bounded polynomial mutation of a single gene `y` in `[0, upper]` for a
/// uniform draw `u`.
pub fn polynomial_mutation_gene(y: f64, upper: f64, u: f64, eta: f64) -> f64 {
    if upper <= 0.0 {
        return y;
    }
    let delta1 = y / upper;
    let delta2 = (upper - y) / upper;
    let pow = 1.0 / (eta + 1.0);
    let deltaq = if u <= 0.5 {
        let xy = 1.0 - delta1;
        let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
        val.powf(pow) - 1.0
    } else {
        let xy = 1.0 - delta2;
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
        1.0 - val.powf(pow)
    };
    (y + deltaq * upper).clamp(0.0, upper)
}

/// Mutates each gene with probability `mutation_prob`.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    design: &DesignVector,
    bounds: &GeneBounds,
    params: &OperatorParams,
    rng: &mut R,
) -> DesignVector {
    let mut genes = design.genes().to_vec();
    if params.mutation_prob > 0.0 {
        for (y, &upper) in genes.iter_mut().zip(&bounds.upper) {
            if rng.random::<f64>() < params.mutation_prob {
                let u = rng.random::<f64>();
                *y = polynomial_mutation_gene(*y, upper, u, params.mutation_eta);
            }
        }
    }
    DesignVector::from_genes_unchecked(genes)
}

/// Builds `n` unevaluated children by tournament selection, SBX and
/// polynomial mutation. `pop` must already carry rank and crowding.
pub fn make_children<R: Rng + ?Sized>(
    pop: &[Individual],
    n: usize,
    bounds: &GeneBounds,
    params: &OperatorParams,
    rng: &mut R,
) -> Vec<DesignVector> {
    let mut children = Vec::with_capacity(n);
    while children.len() < n {
        let pick = |rng: &mut R| {
            let a = rng.random_range(0..pop.len());
            let b = rng.random_range(0..pop.len());
            tournament(pop, a, b, rng)
        };
        let first = pick(rng);
        let second = pick(rng);
        let (c1, c2) = sbx_crossover(&pop[first].design, &pop[second].design, bounds, params, rng);
        children.push(polynomial_mutation(&c1, bounds, params, rng));
        if children.len() < n {
            children.push(polynomial_mutation(&c2, bounds, params, rng));
        }
    }
    children
}

/// NSGA-II truncation of the combined parent and child population to `n`
/// members: whole fronts first, then the last admitted front by descending
/// crowding distance. Rank and crowding of the survivors are those computed
/// on the combined population.
pub fn environmental_selection(mut combined: Vec<Individual>, n: usize) -> Vec<Individual> {
    let fronts = assign_rank_and_crowding(&mut combined);
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for front in fronts {
        if chosen.len() + front.len() <= n {
            chosen.extend(front);
        } else {
            let mut last = front;
            last.sort_by(|&a, &b| {
                combined[b]
                    .crowding
                    .total_cmp(&combined[a].crowding)
                    .then(a.cmp(&b))
            });
            chosen.extend(last.into_iter().take(n - chosen.len()));
        }
        if chosen.len() == n {
            break;
        }
    }
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    chosen
        .into_iter()
        .map(|i| slots[i].take().expect("index chosen once"))
        .collect()
}
