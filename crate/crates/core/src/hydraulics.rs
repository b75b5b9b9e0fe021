//! Demand-driven steady-state hydraulic analysis.
//!
//! Heads and flows are found with the global gradient method: each Newton
//! step linearises the Hazen–Williams head loss of every link, solves the
//! symmetric positive-definite system for junction heads, then updates link
//! flows so that nodal continuity holds exactly for the linearised problem.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::network::{NodeIndex, PipeNetwork};

/// SI Hazen–Williams coefficient (EPANET convention).
pub const HW_COEFFICIENT: f64 = 10.667;
pub const HW_FLOW_EXPONENT: f64 = 1.852;
pub const HW_DIAMETER_EXPONENT: f64 = 4.871;
/// Specific weight of water ρg (N/m³).
pub const SPECIFIC_WEIGHT: f64 = 9_806.65;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeadlossError {
    #[error("flow {flow} m³/s through a pipe of diameter {diameter} m")]
    NonphysicalPipe { flow: f64, diameter: f64 },
}

/// Hazen–Williams resistance `r` in `h = r·sign(Q)·|Q|^1.852`.
pub fn hw_resistance(length: f64, roughness: f64, diameter: f64) -> f64 {
    HW_COEFFICIENT * length
        / (roughness.powf(HW_FLOW_EXPONENT) * diameter.powf(HW_DIAMETER_EXPONENT))
}

/// Signed Hazen–Williams head loss (m) for flow `q` (m³/s) through a pipe
/// of length `length` (m), C factor `roughness` and diameter `diameter` (m).
pub fn headloss_hw(q: f64, length: f64, roughness: f64, diameter: f64) -> Result<f64, HeadlossError> {
    if diameter <= 0.0 {
        if q == 0.0 {
            return Ok(0.0);
        }
        return Err(HeadlossError::NonphysicalPipe { flow: q, diameter });
    }
    let r = hw_resistance(length, roughness, diameter);
    Ok(r * q.signum() * q.abs().powf(HW_FLOW_EXPONENT))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Largest acceptable junction mass imbalance (m³/s).
    pub mass_tolerance: f64,
    /// Largest acceptable head change between iterations (m); also bounds
    /// the link energy residual.
    pub head_tolerance: f64,
    /// Largest acceptable flow change between iterations (m³/s). Stops
    /// the iteration settling on a tiny circulating flow in a loop where
    /// the true flow is zero.
    pub flow_tolerance: f64,
    /// Below this flow magnitude the head-loss curve is replaced by its
    /// secant through the origin.
    pub regularization_flow: f64,
    /// Velocity (m/s) used for the initial pipe flows.
    pub initial_velocity: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            mass_tolerance: 1e-6,
            head_tolerance: 1e-6,
            flow_tolerance: 1e-9,
            regularization_flow: 1e-8,
            initial_velocity: 0.3,
        }
    }
}

/// Solved heads and flows of one realised design.
#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicState {
    /// Total head (m) per node, indexed by [`NodeIndex`].
    pub node_heads: Vec<f64>,
    /// Signed flow (m³/s) per pipe, positive from `from` to `to`. Absent
    /// pipes carry zero flow.
    pub pipe_flows: Vec<f64>,
    /// Flow (m³/s) per pump.
    pub pump_flows: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_mass_residual: f64,
    pub max_energy_residual: f64,
}

impl HydraulicState {
    pub fn head(&self, node: NodeIndex) -> f64 {
        self.node_heads[node.0]
    }

    pub fn head_of(&self, net: &PipeNetwork, id: &str) -> Option<f64> {
        net.node_index(id).map(|n| self.head(n))
    }

    pub fn flow_of(&self, net: &PipeNetwork, pipe_id: &str) -> Option<f64> {
        net.pipes()
            .iter()
            .position(|p| p.id == pipe_id)
            .map(|k| self.pipe_flows[k])
    }

    /// Net flow leaving reservoir `r` (position in `net.reservoirs()`).
    pub fn reservoir_outflow(&self, net: &PipeNetwork, r: usize) -> f64 {
        let node = NodeIndex(net.junctions().len() + r);
        let pipes = net.pipes().iter().zip(&self.pipe_flows).map(|(p, &q)| (p.from, p.to, q));
        let pumps = net.pumps().iter().zip(&self.pump_flows).map(|(p, &q)| (p.from, p.to, q));
        pipes
            .chain(pumps)
            .map(|(from, to, q)| {
                if from == node {
                    q
                } else if to == node {
                    -q
                } else {
                    0.0
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("junction {junction} is not connected to a reservoir")]
    Disconnected { junction: String },
    #[error("hydraulic solution did not converge in {} iterations", .0.iterations)]
    NotConverged(Box<HydraulicState>),
    #[error("design has {actual} option indices, network has {expected} pipes")]
    WrongLength { expected: usize, actual: usize },
    #[error("option index {index} out of range for pipe {pipe}")]
    BadIndex { pipe: String, index: usize },
}

#[derive(Debug, Clone, Copy)]
enum LinkKind {
    Pipe { resistance: f64 },
    Pump { power_head: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Link {
    from: usize,
    to: usize,
    kind: LinkKind,
}

impl Link {
    /// Head loss and its derivative with respect to flow.
    fn loss_and_gradient(&self, q: f64, q_reg: f64) -> (f64, f64) {
        match self.kind {
            LinkKind::Pipe { resistance } => {
                let aq = q.abs();
                if aq < q_reg {
                    let slope = resistance * q_reg.powf(HW_FLOW_EXPONENT - 1.0);
                    (slope * q, slope)
                } else {
                    let g = HW_FLOW_EXPONENT * resistance * aq.powf(HW_FLOW_EXPONENT - 1.0);
                    (q.signum() * resistance * aq.powf(HW_FLOW_EXPONENT), g)
                }
            }
            // Head gain a/Q, extended linearly below the regularisation flow.
            LinkKind::Pump { power_head } => {
                if q >= q_reg {
                    (-power_head / q, power_head / (q * q))
                } else {
                    let g = power_head / (q_reg * q_reg);
                    (-power_head / q_reg + g * (q - q_reg), g)
                }
            }
        }
    }
}

/// Solves heads and flows for the design given by option `indices`, one per
/// pipe. Pipes whose chosen diameter is zero are removed.
pub fn solve_steady_state(net: &PipeNetwork, indices: &[usize]) -> Result<HydraulicState, SolveError> {
    solve_with(net, indices, &SolverSettings::default())
}

pub fn solve_with(
    net: &PipeNetwork,
    indices: &[usize],
    settings: &SolverSettings,
) -> Result<HydraulicState, SolveError> {
    if indices.len() != net.pipes().len() {
        return Err(SolveError::WrongLength {
            expected: net.pipes().len(),
            actual: indices.len(),
        });
    }
    let mut diameters = Vec::with_capacity(indices.len());
    for (k, &idx) in indices.iter().enumerate() {
        match net.option_table_of(k).get(idx) {
            Some(opt) => diameters.push(opt.diameter),
            None => {
                return Err(SolveError::BadIndex {
                    pipe: net.pipes()[k].id.clone(),
                    index: idx,
                })
            }
        }
    }
    if let Some(&j) = net.unreachable_junctions(|k| diameters[k] > 0.0).first() {
        return Err(SolveError::Disconnected {
            junction: net.junctions()[j].id.clone(),
        });
    }

    let nj = net.junctions().len();
    let mut heads: Vec<f64> = net.junctions().iter().map(|_| 0.0).collect();
    let max_reservoir = net
        .reservoirs()
        .iter()
        .map(|r| r.head)
        .fold(f64::NEG_INFINITY, f64::max);
    heads.iter_mut().for_each(|h| *h = max_reservoir);
    heads.extend(net.reservoirs().iter().map(|r| r.head));

    // Realised links: present pipes first, then pumps.
    let mut links = Vec::new();
    let mut link_pipe = Vec::new();
    let mut flows = Vec::new();
    for (k, p) in net.pipes().iter().enumerate() {
        let d = diameters[k];
        if d > 0.0 {
            links.push(Link {
                from: p.from.0,
                to: p.to.0,
                kind: LinkKind::Pipe {
                    resistance: hw_resistance(p.length, p.roughness, d),
                },
            });
            link_pipe.push(Some(k));
            flows.push(settings.initial_velocity * std::f64::consts::PI * d * d / 4.0);
        }
    }
    let total_demand: f64 = net.junctions().iter().map(|j| j.demand).sum();
    let pump_start = if net.pumps().is_empty() {
        0.0
    } else {
        (total_demand / net.pumps().len() as f64).max(1e-3)
    };
    for p in net.pumps() {
        links.push(Link {
            from: p.from.0,
            to: p.to.0,
            kind: LinkKind::Pump {
                power_head: p.power / SPECIFIC_WEIGHT,
            },
        });
        link_pipe.push(None);
        flows.push(pump_start);
    }

    let q_reg = settings.regularization_flow;
    let mut p_coef = vec![0.0; links.len()];
    let mut y_coef = vec![0.0; links.len()];
    let mut iterations = 0;
    let mut converged = false;
    let mut mass_residual = f64::INFINITY;
    let mut energy_residual = f64::INFINITY;

    while iterations < settings.max_iterations {
        iterations += 1;
        let mut a = DMatrix::<f64>::zeros(nj, nj);
        let mut f = DVector::<f64>::zeros(nj);
        for (k, link) in links.iter().enumerate() {
            let (h, g) = link.loss_and_gradient(flows[k], q_reg);
            let p = 1.0 / g;
            let y = h / g;
            p_coef[k] = p;
            y_coef[k] = y;
            let carried = flows[k] - y;
            let (u, v) = (link.from, link.to);
            if u < nj {
                a[(u, u)] += p;
                f[u] -= carried;
                if v < nj {
                    a[(u, v)] -= p;
                } else {
                    f[u] += p * heads[v];
                }
            }
            if v < nj {
                a[(v, v)] += p;
                f[v] += carried;
                if u < nj {
                    a[(v, u)] -= p;
                } else {
                    f[v] += p * heads[u];
                }
            }
        }
        for (j, junction) in net.junctions().iter().enumerate() {
            f[j] -= junction.demand;
        }
        let Some(chol) = a.cholesky() else {
            break;
        };
        let solved = chol.solve(&f);
        let mut max_dh: f64 = 0.0;
        for j in 0..nj {
            max_dh = max_dh.max((solved[j] - heads[j]).abs());
            heads[j] = solved[j];
        }
        let mut max_dq: f64 = 0.0;
        for (k, link) in links.iter().enumerate() {
            let updated = flows[k] - y_coef[k] + p_coef[k] * (heads[link.from] - heads[link.to]);
            max_dq = max_dq.max((updated - flows[k]).abs());
            flows[k] = updated;
        }
        mass_residual = max_mass_residual(net, &links, &flows, nj);
        energy_residual = links
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l.kind, LinkKind::Pipe { .. }))
            .map(|(k, l)| {
                let (h, _) = l.loss_and_gradient(flows[k], q_reg);
                (heads[l.from] - heads[l.to] - h).abs()
            })
            .fold(0.0, f64::max);
        if max_dh <= settings.head_tolerance
            && max_dq <= settings.flow_tolerance
            && mass_residual <= settings.mass_tolerance
            && energy_residual <= settings.head_tolerance
        {
            converged = true;
            break;
        }
    }

    let mut pipe_flows = vec![0.0; net.pipes().len()];
    let mut pump_flows = Vec::with_capacity(net.pumps().len());
    for (k, pipe) in link_pipe.iter().enumerate() {
        match pipe {
            Some(p) => pipe_flows[*p] = flows[k],
            None => pump_flows.push(flows[k]),
        }
    }
    let state = HydraulicState {
        node_heads: heads,
        pipe_flows,
        pump_flows,
        converged,
        iterations,
        max_mass_residual: mass_residual,
        max_energy_residual: energy_residual,
    };
    if converged {
        Ok(state)
    } else {
        Err(SolveError::NotConverged(Box::new(state)))
    }
}

fn max_mass_residual(net: &PipeNetwork, links: &[Link], flows: &[f64], nj: usize) -> f64 {
    let mut balance: Vec<f64> = net.junctions().iter().map(|j| -j.demand).collect();
    for (link, &q) in links.iter().zip(flows) {
        if link.from < nj {
            balance[link.from] -= q;
        }
        if link.to < nj {
            balance[link.to] += q;
        }
    }
    balance.iter().fold(0.0, |m, b| m.max(b.abs()))
}
