//! Two-objective (cost, resilience) water distribution network design with
//! NSGA-II, an external hypergrid archive, archive-driven local search and
//! archive/population coupling.
//!
//! Pipe networks are read from a subset of the EPANET INP format and solved
//! with a built-in Hazen–Williams global-gradient solver.

pub mod archive;
pub mod config;
pub mod hydraulics;
pub mod inp;
pub mod instances;
pub mod local_search;
pub mod metrics;
pub mod network;
pub mod nsga2;
pub mod objectives;
pub mod orchestrator;

pub use archive::{ArchiveParams, ArchivedSolution, HypergridArchive, InsertOutcome};
pub use hydraulics::{solve_steady_state, HydraulicState, SolveError};
pub use inp::{parse_cost_table, parse_inp, FlowUnits, InpOptions, ParseError};
pub use metrics::{compare_fronts, hypervolume_2d, CompareOptions, ComparisonReport, FrontPoint};
pub use network::{DesignVector, OptionTable, PipeNetwork, PipeOption};
pub use objectives::{evaluate, Evaluation, Evaluator};
pub use orchestrator::{run_all, run_single, RunConfig, RunStats, Scheme};
