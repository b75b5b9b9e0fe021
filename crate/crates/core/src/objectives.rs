//! Design objectives: total pipe cost (minimised) and network resilience
//! (maximised), plus the head-deficit constraint measure.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydraulics::{solve_steady_state, HydraulicState, SPECIFIC_WEIGHT};
use crate::network::{DesignVector, NodeIndex, PipeNetwork};

/// Outcome of one hydraulic evaluation of a design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cost: f64,
    pub resilience: f64,
    pub feasible: bool,
    /// Σ max(0, h_req − h) over junctions (m); `+∞` when the network could
    /// not be solved.
    pub total_head_deficit: f64,
    pub fe_count: u32,
}

impl Evaluation {
    /// Objective vector `(cost, resilience)`.
    pub fn objectives(&self) -> [f64; 2] {
        [self.cost, self.resilience]
    }

    /// Evaluation of a design that could not be solved.
    pub fn failed(cost: f64) -> Self {
        Self {
            cost,
            resilience: f64::NEG_INFINITY,
            feasible: false,
            total_head_deficit: f64::INFINITY,
            fe_count: 1,
        }
    }
}

/// Total pipe cost: Σ unit_cost × length over all pipes.
pub fn cost(net: &PipeNetwork, indices: &[usize]) -> f64 {
    net.pipes()
        .iter()
        .zip(indices)
        .enumerate()
        .map(|(k, (pipe, &idx))| net.option_table_of(k).options()[idx].unit_cost * pipe.length)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResilienceError {
    #[error("resilience denominator {0} is not positive")]
    DegenerateDenominator(f64),
    #[error("hydraulic state has not converged")]
    NotConverged,
}

/// Diameter uniformity of junction `j`: mean incident realised diameter
/// divided by the largest one.
pub fn uniformity(net: &PipeNetwork, indices: &[usize], junction: usize) -> f64 {
    let node = NodeIndex(junction);
    let diameters = net
        .pipes()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.from == node || p.to == node)
        .map(|(k, _)| net.diameter(k, indices[k]))
        .filter(|&d| d > 0.0);
    let (sum, max, n) = diameters.fold((0.0, 0.0_f64, 0usize), |(s, m, n), d| (s + d, m.max(d), n + 1));
    if n == 0 {
        1.0
    } else {
        sum / (n as f64 * max)
    }
}

/// Prasad–Park network resilience of a solved design.
///
/// The numerator is the uniformity-weighted surplus power delivered at the
/// demand junctions; the denominator is the total supplied power (reservoirs
/// and pumps) less the minimum power the demands require.
pub fn resilience(
    net: &PipeNetwork,
    indices: &[usize],
    state: &HydraulicState,
) -> Result<f64, ResilienceError> {
    if !state.converged {
        return Err(ResilienceError::NotConverged);
    }
    let mut surplus = 0.0;
    let mut required = 0.0;
    for (j, junction) in net.junctions().iter().enumerate() {
        if junction.demand <= 0.0 {
            continue;
        }
        let h_req = junction.required_head();
        surplus += uniformity(net, indices, j)
            * junction.demand
            * (state.head(NodeIndex(j)) - h_req);
        required += junction.demand * h_req;
    }
    let supplied: f64 = net
        .reservoirs()
        .iter()
        .enumerate()
        .map(|(r, res)| state.reservoir_outflow(net, r) * res.head)
        .sum::<f64>()
        + net.pumps().iter().map(|p| p.power / SPECIFIC_WEIGHT).sum::<f64>();
    let denominator = supplied - required;
    if denominator <= 0.0 {
        return Err(ResilienceError::DegenerateDenominator(denominator));
    }
    Ok(surplus / denominator)
}

/// Σ max(0, h_req − h) over all junctions.
pub fn head_deficit(net: &PipeNetwork, state: &HydraulicState) -> f64 {
    net.junctions()
        .iter()
        .enumerate()
        .map(|(j, junction)| (junction.required_head() - state.head(NodeIndex(j))).max(0.0))
        .sum()
}

/// Evaluates option indices directly.
pub fn evaluate_indices(net: &PipeNetwork, indices: &[usize]) -> Evaluation {
    let cost = cost(net, indices);
    let state = match solve_steady_state(net, indices) {
        Ok(state) => state,
        Err(_) => return Evaluation::failed(cost),
    };
    let deficit = head_deficit(net, &state);
    let resilience = resilience(net, indices, &state).unwrap_or(f64::NEG_INFINITY);
    Evaluation {
        cost,
        resilience,
        feasible: deficit == 0.0,
        total_head_deficit: deficit,
        fe_count: 1,
    }
}

/// Rounds the design and evaluates it (one hydraulic solve).
pub fn evaluate(net: &PipeNetwork, design: &DesignVector) -> Evaluation {
    evaluate_indices(net, &design.to_indices())
}

/// Network-bound evaluator that counts every function evaluation.
#[derive(Debug)]
pub struct Evaluator<'a> {
    net: &'a PipeNetwork,
    evaluations: AtomicU64,
}

impl<'a> Evaluator<'a> {
    pub fn new(net: &'a PipeNetwork) -> Self {
        Self {
            net,
            evaluations: AtomicU64::new(0),
        }
    }

    pub fn network(&self) -> &'a PipeNetwork {
        self.net
    }

    pub fn evaluate(&self, design: &DesignVector) -> Evaluation {
        self.evaluate_indices(&design.to_indices())
    }

    pub fn evaluate_indices(&self, indices: &[usize]) -> Evaluation {
        let eval = evaluate_indices(self.net, indices);
        self.evaluations
            .fetch_add(u64::from(eval.fe_count), Ordering::Relaxed);
        eval
    }

    /// Evaluations performed so far.
    pub fn count(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }
}
