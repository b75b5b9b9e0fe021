//! Hydraulic network data model.
//!
//! A [`PipeNetwork`] is an immutable graph of junctions, fixed-head
//! reservoirs, pipes and (optionally) constant-power pumps. Every pipe refers
//! to an [`OptionTable`] listing the diameters it may take and their unit
//! costs; the genome of the optimizer is one real gene per pipe, rounded to
//! an index into that table.
//!
//! All quantities are stored in SI units: metres, cubic metres per second
//! and watts.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node inside a [`PipeNetwork`]. Junctions come first, followed
/// by reservoirs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeIndex(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub id: String,
    /// Elevation above datum (m).
    pub elevation: f64,
    /// Base demand (m³/s).
    pub demand: f64,
    /// Required pressure head above elevation (m).
    pub min_head: f64,
}

impl Junction {
    /// Minimum acceptable total head (m).
    pub fn required_head(&self) -> f64 {
        self.elevation + self.min_head
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub id: String,
    /// Fixed total head (m).
    pub head: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipe {
    pub id: String,
    pub from: NodeIndex,
    pub to: NodeIndex,
    /// Length (m).
    pub length: f64,
    /// Hazen–Williams C factor.
    pub roughness: f64,
    /// Diameter declared in the source file (m). Only used to build a
    /// single-option table when no cost table is attached.
    pub nominal_diameter: f64,
    pub option_table: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pump {
    pub id: String,
    pub from: NodeIndex,
    pub to: NodeIndex,
    /// Constant shaft power delivered to the water (W).
    pub power: f64,
}

/// One selectable pipe size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeOption {
    /// Internal diameter (m); zero means the pipe is not built.
    pub diameter: f64,
    /// Cost per metre of pipe.
    pub unit_cost: f64,
}

/// Ordered list of diameter options for a pipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionTable {
    options: Vec<PipeOption>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptionTableError {
    #[error("option table is empty")]
    Empty,
    #[error("diameters must be strictly ascending (entry {0})")]
    NonAscendingDiameter(usize),
    #[error("entry {0}: a zero diameter is only allowed as entry 0 with zero cost")]
    MisplacedAbsentOption(usize),
    #[error("entry {0}: diameter and unit cost must be finite and non-negative")]
    InvalidValue(usize),
}

impl OptionTable {
    pub fn new(options: Vec<PipeOption>) -> Result<Self, OptionTableError> {
        if options.is_empty() {
            return Err(OptionTableError::Empty);
        }
        for (i, opt) in options.iter().enumerate() {
            if !(opt.diameter.is_finite() && opt.diameter >= 0.0)
                || !(opt.unit_cost.is_finite() && opt.unit_cost >= 0.0)
            {
                return Err(OptionTableError::InvalidValue(i));
            }
            if opt.diameter == 0.0 && (i != 0 || opt.unit_cost != 0.0) {
                return Err(OptionTableError::MisplacedAbsentOption(i));
            }
            if i > 0 && opt.diameter <= options[i - 1].diameter {
                return Err(OptionTableError::NonAscendingDiameter(i));
            }
        }
        Ok(Self { options })
    }

    /// A table with one fixed diameter at zero cost.
    pub fn fixed(diameter: f64) -> Result<Self, OptionTableError> {
        Self::new(vec![PipeOption {
            diameter,
            unit_cost: 0.0,
        }])
    }

    pub fn options(&self) -> &[PipeOption] {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&PipeOption> {
        self.options.get(index)
    }
}

/// Reference to a network element, used in validation errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Node(String),
    Link(String),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Node(id) => write!(f, "node {id}"),
            Element::Link(id) => write!(f, "link {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("duplicate id {0}")]
    DuplicateId(Element),
    #[error("{element} references unknown node {target}")]
    DanglingReference { element: Element, target: String },
    #[error("{element}: {message}")]
    InvalidValue { element: Element, message: String },
    #[error("network has no reservoir")]
    NoReservoir,
    #[error("{0} is not connected to any reservoir")]
    NotConnected(Element),
    #[error("{element} references missing option table {table}")]
    MissingOptionTable { element: Element, table: usize },
    #[error("link {0} connects a node to itself")]
    SelfLoop(String),
}

/// Pipe description used to build a [`PipeNetwork`] from node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PipeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
    pub roughness: f64,
    pub nominal_diameter: f64,
    pub option_table: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub power: f64,
}

/// Immutable, validated hydraulic network.
#[derive(Debug, Clone, PartialEq)]
pub struct PipeNetwork {
    junctions: Vec<Junction>,
    reservoirs: Vec<Reservoir>,
    pipes: Vec<Pipe>,
    pumps: Vec<Pump>,
    option_tables: Vec<OptionTable>,
    node_lookup: HashMap<String, NodeIndex>,
}

impl PipeNetwork {
    pub fn new(
        junctions: Vec<Junction>,
        reservoirs: Vec<Reservoir>,
        pipes: Vec<PipeSpec>,
        pumps: Vec<PumpSpec>,
        option_tables: Vec<OptionTable>,
    ) -> Result<Self, NetworkError> {
        let mut node_lookup = HashMap::new();
        let node_ids = junctions
            .iter()
            .map(|j| &j.id)
            .chain(reservoirs.iter().map(|r| &r.id));
        for (i, id) in node_ids.enumerate() {
            if node_lookup.insert(id.clone(), NodeIndex(i)).is_some() {
                return Err(NetworkError::DuplicateId(Element::Node(id.clone())));
            }
        }
        for j in &junctions {
            let el = || Element::Node(j.id.clone());
            if !j.elevation.is_finite() || !j.min_head.is_finite() {
                return Err(invalid(el(), "elevation and minimum head must be finite"));
            }
            if !(j.demand.is_finite() && j.demand >= 0.0) {
                return Err(invalid(el(), "demand must be finite and non-negative"));
            }
        }
        for r in &reservoirs {
            if !r.head.is_finite() {
                return Err(invalid(Element::Node(r.id.clone()), "head must be finite"));
            }
        }
        if reservoirs.is_empty() {
            return Err(NetworkError::NoReservoir);
        }

        let resolve = |element: &Element, id: &str| {
            node_lookup
                .get(id)
                .copied()
                .ok_or_else(|| NetworkError::DanglingReference {
                    element: element.clone(),
                    target: id.to_string(),
                })
        };

        let mut link_ids = HashMap::new();
        let mut built_pipes = Vec::with_capacity(pipes.len());
        for p in pipes {
            let el = Element::Link(p.id.clone());
            if link_ids.insert(p.id.clone(), ()).is_some() {
                return Err(NetworkError::DuplicateId(el));
            }
            let from = resolve(&el, &p.from)?;
            let to = resolve(&el, &p.to)?;
            if from == to {
                return Err(NetworkError::SelfLoop(p.id));
            }
            if !(p.length.is_finite() && p.length > 0.0) {
                return Err(invalid(el, "length must be positive"));
            }
            if !(p.roughness.is_finite() && p.roughness > 0.0) {
                return Err(invalid(el, "roughness must be positive"));
            }
            if !(p.nominal_diameter.is_finite() && p.nominal_diameter >= 0.0) {
                return Err(invalid(el, "diameter must be non-negative"));
            }
            if p.option_table >= option_tables.len() {
                return Err(NetworkError::MissingOptionTable {
                    element: el,
                    table: p.option_table,
                });
            }
            built_pipes.push(Pipe {
                id: p.id,
                from,
                to,
                length: p.length,
                roughness: p.roughness,
                nominal_diameter: p.nominal_diameter,
                option_table: p.option_table,
            });
        }
        let mut built_pumps = Vec::with_capacity(pumps.len());
        for p in pumps {
            let el = Element::Link(p.id.clone());
            if link_ids.insert(p.id.clone(), ()).is_some() {
                return Err(NetworkError::DuplicateId(el));
            }
            let from = resolve(&el, &p.from)?;
            let to = resolve(&el, &p.to)?;
            if from == to {
                return Err(NetworkError::SelfLoop(p.id));
            }
            if !(p.power.is_finite() && p.power > 0.0) {
                return Err(invalid(el, "pump power must be positive"));
            }
            built_pumps.push(Pump {
                id: p.id,
                from,
                to,
                power: p.power,
            });
        }

        let net = Self {
            junctions,
            reservoirs,
            pipes: built_pipes,
            pumps: built_pumps,
            option_tables,
            node_lookup,
        };
        if let Some(orphan) = net.unreachable_junctions(|_| true).first() {
            return Err(NetworkError::NotConnected(Element::Node(
                net.junctions[*orphan].id.clone(),
            )));
        }
        Ok(net)
    }

    /// Rebuilds the network with a new set of option tables. `assignment`
    /// maps pipe ids to table positions; unlisted pipes use `default`.
    pub fn with_option_tables(
        &self,
        option_tables: Vec<OptionTable>,
        assignment: &HashMap<String, usize>,
        default: usize,
    ) -> Result<Self, NetworkError> {
        let pipes = self
            .pipes
            .iter()
            .map(|p| PipeSpec {
                id: p.id.clone(),
                from: self.node_id(p.from).to_string(),
                to: self.node_id(p.to).to_string(),
                length: p.length,
                roughness: p.roughness,
                nominal_diameter: p.nominal_diameter,
                option_table: assignment.get(&p.id).copied().unwrap_or(default),
            })
            .collect();
        Self::new(
            self.junctions.clone(),
            self.reservoirs.clone(),
            pipes,
            self.pump_specs(),
            option_tables,
        )
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn reservoirs(&self) -> &[Reservoir] {
        &self.reservoirs
    }

    pub fn pipes(&self) -> &[Pipe] {
        &self.pipes
    }

    pub fn pumps(&self) -> &[Pump] {
        &self.pumps
    }

    pub fn option_tables(&self) -> &[OptionTable] {
        &self.option_tables
    }

    pub fn node_count(&self) -> usize {
        self.junctions.len() + self.reservoirs.len()
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIndex> {
        self.node_lookup.get(id).copied()
    }

    pub fn node_id(&self, node: NodeIndex) -> &str {
        match self.junction_position(node) {
            Some(j) => &self.junctions[j].id,
            None => &self.reservoirs[node.0 - self.junctions.len()].id,
        }
    }

    /// Position in [`Self::junctions`] if `node` is a junction.
    pub fn junction_position(&self, node: NodeIndex) -> Option<usize> {
        (node.0 < self.junctions.len()).then_some(node.0)
    }

    /// Position in [`Self::reservoirs`] if `node` is a reservoir.
    pub fn reservoir_position(&self, node: NodeIndex) -> Option<usize> {
        node.0
            .checked_sub(self.junctions.len())
            .filter(|&r| r < self.reservoirs.len())
    }

    pub fn option_table_of(&self, pipe: usize) -> &OptionTable {
        &self.option_tables[self.pipes[pipe].option_table]
    }

    /// Number of real genes in a design (one per pipe).
    pub fn design_len(&self) -> usize {
        self.pipes.len()
    }

    /// Upper gene bound `K - 1` for every pipe; lower bounds are all zero.
    pub fn gene_bounds(&self) -> GeneBounds {
        GeneBounds {
            upper: (0..self.pipes.len())
                .map(|p| (self.option_table_of(p).len() - 1) as f64)
                .collect(),
        }
    }

    /// Diameter (m) of `pipe` under option `index`.
    pub fn diameter(&self, pipe: usize, index: usize) -> f64 {
        self.option_table_of(pipe).options()[index].diameter
    }

    /// Junctions that cannot reach a reservoir through links for which
    /// `pipe_present` holds. Pumps always count as present.
    pub fn unreachable_junctions(&self, pipe_present: impl Fn(usize) -> bool) -> Vec<usize> {
        let n = self.node_count();
        let mut adjacency = vec![Vec::new(); n];
        for (k, p) in self.pipes.iter().enumerate() {
            if pipe_present(k) {
                adjacency[p.from.0].push(p.to.0);
                adjacency[p.to.0].push(p.from.0);
            }
        }
        for p in &self.pumps {
            adjacency[p.from.0].push(p.to.0);
            adjacency[p.to.0].push(p.from.0);
        }
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = (self.junctions.len()..n).collect();
        for &r in &queue {
            seen[r] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        (0..self.junctions.len()).filter(|&j| !seen[j]).collect()
    }

    fn pump_specs(&self) -> Vec<PumpSpec> {
        self.pumps
            .iter()
            .map(|p| PumpSpec {
                id: p.id.clone(),
                from: self.node_id(p.from).to_string(),
                to: self.node_id(p.to).to_string(),
                power: p.power,
            })
            .collect()
    }
}

fn invalid(element: Element, message: &str) -> NetworkError {
    NetworkError::InvalidValue {
        element,
        message: message.to_string(),
    }
}

/// Per-gene upper bounds `K - 1`; the lower bound is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneBounds {
    pub upper: Vec<f64>,
}

impl GeneBounds {
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn contains(&self, genes: &[f64]) -> bool {
        genes.len() == self.upper.len()
            && genes
                .iter()
                .zip(&self.upper)
                .all(|(&g, &hi)| (0.0..=hi).contains(&g))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("design has {actual} genes, network has {expected} pipes")]
    WrongLength { expected: usize, actual: usize },
    #[error("gene {index} = {value} outside [0, {upper}]")]
    OutOfBounds { index: usize, value: f64, upper: f64 },
}

/// Real-valued genome: one gene per pipe, each within `[0, K - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    genes: Vec<f64>,
}

impl DesignVector {
    pub fn new(genes: Vec<f64>, bounds: &GeneBounds) -> Result<Self, DesignError> {
        if genes.len() != bounds.len() {
            return Err(DesignError::WrongLength {
                expected: bounds.len(),
                actual: genes.len(),
            });
        }
        for (index, (&value, &upper)) in genes.iter().zip(&bounds.upper).enumerate() {
            if !(0.0..=upper).contains(&value) {
                return Err(DesignError::OutOfBounds {
                    index,
                    value,
                    upper,
                });
            }
        }
        Ok(Self { genes })
    }

    /// Builds a design directly from option indices.
    pub fn from_indices(indices: &[usize]) -> Self {
        Self {
            genes: indices.iter().map(|&i| i as f64).collect(),
        }
    }

    /// Wraps genes that are already known to be within bounds.
    pub(crate) fn from_genes_unchecked(genes: Vec<f64>) -> Self {
        Self { genes }
    }

    pub fn genes(&self) -> &[f64] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    /// Nearest option index per gene, ties rounded up.
    pub fn to_indices(&self) -> Vec<usize> {
        round_to_indices(&self.genes)
    }
}

/// Maps every gene to its nearest integer, rounding `.5` upwards.
/// Genes are non-negative, so `f64::round` (half away from zero) is exactly
/// round-half-up here.
pub fn round_to_indices(genes: &[f64]) -> Vec<usize> {
    genes.iter().map(|g| g.max(0.0).round() as usize).collect()
}
