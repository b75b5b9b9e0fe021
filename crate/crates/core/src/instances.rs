//! Small bundled networks for tests, demos and benchmarks.
//!
//! The same files ship in `crates/core/data/` together with their TOML
//! sidecars, so they can also be used from the command line.

use crate::inp::{parse_cost_table, parse_inp, InpOptions};
use crate::network::PipeNetwork;

pub const ONE_PIPE_INP: &str = include_str!("../data/one_pipe.inp");
pub const PARALLEL_PIPES_INP: &str = include_str!("../data/parallel_pipes.inp");
pub const TINY_LOOP_INP: &str = include_str!("../data/tiny_loop.inp");
pub const TINY_LOOP_COSTS: &str = include_str!("../data/tiny_loop_costs.csv");
pub const TWO_LOOP8_INP: &str = include_str!("../data/two_loop8.inp");
pub const TWO_LOOP8_COSTS: &str = include_str!("../data/two_loop8_costs.csv");

/// Required pressure head of the tiny loop network (m).
pub const TINY_LOOP_MIN_HEAD: f64 = 20.0;
/// Required pressure head of the eight-pipe network (m).
pub const TWO_LOOP8_MIN_HEAD: f64 = 25.0;

fn with_costs(inp: &str, costs: &str, min_head: f64) -> PipeNetwork {
    let opts = InpOptions {
        min_head,
        ..InpOptions::default()
    };
    let net = parse_inp(inp, &opts).expect("bundled network parses");
    let table = parse_cost_table(costs).expect("bundled cost table parses");
    net.with_option_tables(vec![table], &Default::default(), 0)
        .expect("bundled cost table fits")
}

/// Reservoir at 100 m feeding one junction (elevation 10 m, demand
/// 0.1 m³/s) through 1000 m of 300 mm pipe, C = 130. No pressure
/// requirement and a single fixed diameter at zero cost.
pub fn one_pipe() -> PipeNetwork {
    parse_inp(ONE_PIPE_INP, &InpOptions::default()).expect("bundled network parses")
}

/// Two identical 1500 m, 300 mm, C = 120 pipes from an 80 m reservoir to a
/// junction drawing 0.2 m³/s.
pub fn parallel_pipes() -> PipeNetwork {
    parse_inp(PARALLEL_PIPES_INP, &InpOptions::default()).expect("bundled network parses")
}

/// Three-pipe loop with four diameter options per pipe (64 designs).
pub fn tiny_loop() -> PipeNetwork {
    with_costs(TINY_LOOP_INP, TINY_LOOP_COSTS, TINY_LOOP_MIN_HEAD)
}

/// Two-loop grid of eight pipes with eight diameter options each.
pub fn two_loop8() -> PipeNetwork {
    with_costs(TWO_LOOP8_INP, TWO_LOOP8_COSTS, TWO_LOOP8_MIN_HEAD)
}

/// Every option-index vector of `net`, in lexicographic order.
pub fn enumerate_designs(net: &PipeNetwork) -> Vec<Vec<usize>> {
    let counts: Vec<usize> = (0..net.design_len()).map(|k| net.option_table_of(k).len()).collect();
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut current = vec![0; counts.len()];
    for _ in 0..total {
        out.push(current.clone());
        for k in (0..counts.len()).rev() {
            current[k] += 1;
            if current[k] < counts[k] {
                break;
            }
            current[k] = 0;
        }
    }
    out
}
